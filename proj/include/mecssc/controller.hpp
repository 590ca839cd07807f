#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "flow_table.hpp"
#include "frame.hpp"
#include "gtpc.hpp"
#include "gtpu.hpp"
#include "ipv4.hpp"
#include "message_store.hpp"
#include "replication.hpp"

namespace mecssc {

/// How the manager's outbound signalling reaches the controller.
/// StoreAndForward holds each message at the controller and re-emits it,
/// adding a control-channel round trip; Mirror taps a copy while the original
/// travels on unimpeded.
enum class InterceptMode : std::uint8_t { StoreAndForward, Mirror };

inline const char* intercept_name(InterceptMode m) {
    return m == InterceptMode::StoreAndForward ? "store_and_forward" : "mirror";
}

/// Rule ownership cookies, used for grouped removal.
inline constexpr std::uint64_t TAG_PLUMBING = 1;
inline constexpr std::uint64_t TAG_LEARNING = 2;
inline constexpr std::uint64_t TAG_INTERCEPT = 3;
inline constexpr std::uint64_t TAG_ABSORB = 4;
inline constexpr std::uint64_t TAG_DIVERT_SHARED = 5;
/// Per-session rules get TAG_DIVERT_SESSION_BASE + a running ordinal.
inline constexpr std::uint64_t TAG_DIVERT_SESSION_BASE = 0x100;

/// Controller-to-switch surface. Implementations decide what "send" means
/// (immediate for unit harnesses, a scheduled event for the simulator).
class SouthboundApi {
  public:
    virtual ~SouthboundApi() = default;
    virtual void install_rule(const std::string& sw, const FlowRule& rule) = 0;
    virtual std::size_t remove_rules(const std::string& sw, std::uint64_t app_tag) = 0;
    virtual void packet_out(const std::string& sw, PortId port, const EthernetFrame& frame) = 0;
};

struct GatewayEndpoints {
    std::string name;
    Ipv4Addr ctrl_ip;  // signalling interface
    MacAddr ctrl_mac;
    PortId signalling_port = 0;  // port on the manager's embedded switch
    Ipv4Addr user_ip;            // tunnel endpoint
    Ipv4Addr sgi_ip;             // packet-network side
    MacAddr sgi_mac;
};

struct ControllerTopology {
    std::string gtp_switch = "sw";
    std::string pdn_switch = "pdnsw";
    std::string mme_switch = "mme";

    Ipv4Addr mme_ip;
    MacAddr mme_mac;
    Ipv4Addr gtp_switch_ip;  // the tunnel-aware switch's own interface
    MacAddr gtp_switch_mac;
    Ipv4Addr enb_ip;

    GatewayEndpoints primary;
    GatewayEndpoints replica;
};

/// Central control application. Owns the intercept archive, drives gateway
/// replication over the manager's embedded switch, and rewires the user
/// plane per diverted session. All times come from the caller; the
/// controller itself has no clock.
class Controller {
  public:
    Controller(ControllerTopology topo, SouthboundApi& sb, InterceptMode intercept,
               ReplicationStrategy strategy)
        : topo_(std::move(topo)), sb_(sb), intercept_(intercept), strategy_(strategy) {}

    /// Installs the standing rule set: default forwarding on the user-plane
    /// switches, port plumbing and signalling taps on the manager's switch.
    void bootstrap(TimeUs now) {
        for (const auto& sw : {topo_.gtp_switch, topo_.pdn_switch}) {
            FlowRule classify;
            classify.table_id = 0;
            classify.priority = PRIO_LOW;
            classify.actions = {Action::goto_table(2)};
            classify.app_tag = TAG_PLUMBING;
            sb_.install_rule(sw, classify);

            FlowRule miss;
            miss.table_id = 2;
            miss.priority = PRIO_LOW;
            miss.actions = {Action::output(PORT_CONTROLLER), Action::output(PORT_FLOOD)};
            miss.app_tag = TAG_PLUMBING;
            sb_.install_rule(sw, miss);
        }

        for (const auto* gw : {&topo_.primary, &topo_.replica}) {
            FlowRule out;
            out.table_id = 0;
            out.priority = PRIO_MEDIUM;
            out.match.in_port = PORT_LOCAL;
            out.match.eth_type = ETHTYPE_IPV4;
            out.match.ipv4_dst = gw->ctrl_ip;
            out.actions = {Action::output(gw->signalling_port)};
            out.app_tag = TAG_PLUMBING;
            sb_.install_rule(topo_.mme_switch, out);

            FlowRule in;
            in.table_id = 0;
            in.priority = PRIO_MEDIUM;
            in.match.in_port = gw->signalling_port;
            in.actions = {Action::output(PORT_LOCAL)};
            in.app_tag = TAG_PLUMBING;
            sb_.install_rule(topo_.mme_switch, in);
        }

        if (intercept_ == InterceptMode::StoreAndForward) {
            FlowRule tap;
            tap.table_id = 0;
            tap.priority = PRIO_HIGH;
            tap.match.in_port = PORT_LOCAL;
            tap.match.eth_type = ETHTYPE_IPV4;
            tap.match.ip_proto = IPPROTO_UDP_V;
            tap.match.udp_dst = GTPC_PORT;
            tap.actions = {Action::output(PORT_CONTROLLER)};
            tap.app_tag = TAG_INTERCEPT;
            sb_.install_rule(topo_.mme_switch, tap);
        } else {
            for (const auto* gw : {&topo_.primary, &topo_.replica}) {
                FlowRule tap;
                tap.table_id = 0;
                tap.priority = PRIO_HIGH;
                tap.match.in_port = PORT_LOCAL;
                tap.match.eth_type = ETHTYPE_IPV4;
                tap.match.ipv4_dst = gw->ctrl_ip;
                tap.match.ip_proto = IPPROTO_UDP_V;
                tap.match.udp_dst = GTPC_PORT;
                tap.actions = {Action::output(gw->signalling_port), Action::output(PORT_CONTROLLER)};
                tap.app_tag = TAG_INTERCEPT;
                sb_.install_rule(topo_.mme_switch, tap);
            }
        }
        log_line(now, "standing rules installed (" + std::string(intercept_name(intercept_)) +
                          " intercept)");
    }

    /// Entry point for frames a switch punted to the controller.
    void packet_in(TimeUs now, const std::string& sw, PortId in_port, const EthernetFrame& frame) {
        if (sw == topo_.mme_switch) {
            signalling_packet_in(now, in_port, frame);
        } else {
            learning_packet_in(now, sw, in_port, frame);
        }
    }

    // ------------------------------------------------------------------
    // Northbound operations.

    /// Brings the standby gateway into play: arms the absorb tap so nothing
    /// the replica says upstream ever reaches the manager, and (under the
    /// full-replay strategy) starts feeding it the archive.
    void deploy_replica(TimeUs now) {
        if (deployed_) {
            log_line(now, "replica already deployed, ignoring");
            return;
        }
        deployed_ = true;

        FlowRule absorb;
        absorb.table_id = 0;
        absorb.priority = PRIO_HIGH;
        absorb.match.eth_type = ETHTYPE_IPV4;
        absorb.match.ipv4_src = topo_.replica.ctrl_ip;
        absorb.match.ip_proto = IPPROTO_UDP_V;
        absorb.match.udp_dst = GTPC_PORT;
        absorb.actions = {Action::output(PORT_CONTROLLER)};
        absorb.app_tag = TAG_ABSORB;
        sb_.install_rule(topo_.mme_switch, absorb);

        if (strategy_ == ReplicationStrategy::Naive) {
            std::size_t queued = 0;
            for (const auto& rec : store_.records()) {
                if (rec.spgw_ip != topo_.primary.ctrl_ip) continue;
                feed_.push_back(ReplayItem{rec.payload, rec.seq, rec.kind, rec.imsi,
                                           ReplayItem::Then::Plain});
                ++queued;
            }
            if (queued > 0) {
                activity_start_ = now;
                last_response_ = now;
                have_activity_ = true;
            }
            log_line(now, "replica deployed, replaying " + std::to_string(queued) +
                              " archived messages");
            pump(now);
        } else {
            log_line(now, "replica deployed, sessions move on demand");
        }
    }

    /// Moves one session to the replica. Under full replay the replica
    /// already holds every session, so this only rewires the user plane;
    /// under selective replay it first replays that subscriber's signalling
    /// and finishes asynchronously when the replica's answers come back.
    bool divert_session(TimeUs now, const std::string& imsi, Ipv4Addr ue_ip) {
        if (!deployed_ || failed_) {
            log_line(now, "divert refused for " + imsi + ": replica " +
                              (failed_ ? "unusable" : "not deployed"));
            return false;
        }
        if (strategy_ == ReplicationStrategy::RamModel) {
            log_line(now, "divert refused for " + imsi + ": image transfer moves every session");
            return false;
        }
        if (diverts_.count(imsi)) {
            // A repeated divert replaces the session's rules wholesale.
            remove_session_rules(imsi);
            diverts_.erase(imsi);
        }

        if (strategy_ == ReplicationStrategy::Naive) {
            if (!replication_idle()) {
                log_line(now, "divert refused for " + imsi + ": replay still in progress");
                return false;
            }
            DivertRecord rec;
            rec.imsi = imsi;
            rec.enb_ip = topo_.enb_ip;
            rec.old_spgw_ip = topo_.primary.user_ip;
            rec.new_spgw_ip = topo_.replica.user_ip;
            rec.selective = false;
            rec.old_ue_ip = ue_ip;
            rec.new_ue_ip = ue_ip;  // full replay reproduces the address plan
            install_divert_rules(rec);
            diverts_[imsi] = rec;
            log_line(now, "session " + imsi + " diverted to " + topo_.replica.user_ip.str());
            return true;
        }

        // Selective: replay this subscriber's archived signalling first.
        if (pending_.count(imsi)) {
            log_line(now, "divert refused for " + imsi + ": already in progress");
            return false;
        }
        const StoredMessage* csr = nullptr;
        const StoredMessage* mbr = nullptr;
        for (const StoredMessage* m : store_.for_session(topo_.primary.ctrl_ip, imsi)) {
            if (m->kind == GtpcKind::CreateSessionRequest && !csr) csr = m;
            if (m->kind == GtpcKind::ModifyBearerRequest && !mbr) mbr = m;
        }
        if (!csr || !mbr) {
            log_line(now, "divert refused for " + imsi + ": no active bearer archived");
            return false;
        }
        if (!have_activity_) {
            activity_start_ = now;
            last_response_ = now;
            have_activity_ = true;
        }
        PendingDivert p;
        p.imsi = imsi;
        p.old_ue_ip = ue_ip;
        p.mbr_payload = mbr->payload;
        pending_[imsi] = std::move(p);
        feed_.push_back(
            ReplayItem{csr->payload, csr->seq, csr->kind, imsi, ReplayItem::Then::CaptureSession});
        log_line(now, "replaying session of " + imsi + " toward the replica");
        pump(now);
        return true;
    }

    /// Removes a session's divert rules. Shared plumbing stays; without a
    /// steering entry the session falls back to the original gateway.
    bool undo_divert(TimeUs now, const std::string& imsi) {
        auto it = diverts_.find(imsi);
        if (it == diverts_.end()) {
            log_line(now, "undo refused: " + imsi + " is not diverted");
            return false;
        }
        remove_session_rules(imsi);
        diverts_.erase(it);
        log_line(now, "session " + imsi + " restored to " + topo_.primary.user_ip.str());
        return true;
    }

    void detach(TimeUs now, const std::string& imsi) {
        if (diverts_.count(imsi)) undo_divert(now, imsi);
        std::uint64_t freed = store_.evict_imsi(imsi);
        log_line(now, "detach of " + imsi + " freed " + std::to_string(freed) + " bytes");
    }

    void mme_down(TimeUs now, Ipv4Addr mme_ip) {
        std::uint64_t freed = store_.evict_mme(mme_ip);
        log_line(now, "manager " + mme_ip.str() + " gone, freed " + std::to_string(freed) +
                          " bytes");
    }

    void spgw_down(TimeUs now, Ipv4Addr spgw_ip) {
        std::uint64_t freed = store_.evict_spgw(spgw_ip);
        log_line(now, "gateway " + spgw_ip.str() + " gone, freed " + std::to_string(freed) +
                          " bytes");
    }

    ReplicationReport report() const {
        if (strategy_ == ReplicationStrategy::RamModel) {
            return VmImageModel{}.report(store_.registered_ues(topo_.primary.ctrl_ip));
        }
        ReplicationReport r;
        r.strategy = strategy_;
        r.registered_ues = store_.registered_ues(topo_.primary.ctrl_ip);
        r.moved_ues = diverts_.size();
        r.stored_bytes = store_.total_bytes();
        if (strategy_ == ReplicationStrategy::Selective)
            r.stored_bytes += DivertRecord::SELECTIVE_EXTRA_BYTES * diverts_.size();
        r.transmitted_bytes = tx_bytes_;
        r.elapsed_ms = have_activity_ ? double(last_response_ - activity_start_) / 1000.0 : 0.0;
        r.downtime_ms = 0.0;  // sessions keep flowing throughout
        return r;
    }

    // ------------------------------------------------------------------
    // Introspection.

    const MessageStore& store() const { return store_; }
    const std::map<std::string, DivertRecord>& diverts() const { return diverts_; }
    const std::vector<std::string>& log() const { return log_; }
    bool replication_idle() const { return feed_.empty() && !in_flight_; }
    bool replication_failed() const { return failed_; }
    bool replica_deployed() const { return deployed_; }
    std::uint64_t transmitted_bytes() const { return tx_bytes_; }
    std::uint64_t absorbed_responses() const { return absorbed_; }
    ReplicationStrategy strategy() const { return strategy_; }
    const ControllerTopology& topology() const { return topo_; }

  private:
    struct ReplayItem {
        Bytes payload;
        std::uint32_t seq = 0;
        GtpcKind kind = GtpcKind::CreateSessionRequest;
        std::string imsi;
        enum class Then { Plain, CaptureSession, FinishDivert } then = Then::Plain;
    };

    struct PendingDivert {
        std::string imsi;
        Ipv4Addr old_ue_ip;
        Bytes mbr_payload;
        Teid new_s11 = 0;
        Teid new_s1u = 0;
        Ipv4Addr new_ue_ip;
    };

    // ------------------------------------------------------------------
    // Signalling path.

    void signalling_packet_in(TimeUs now, PortId in_port, const EthernetFrame& frame) {
        Ipv4Packet ip;
        UdpDatagram udp;
        try {
            ip = Ipv4Packet::decode(frame.payload);
            udp = UdpDatagram::decode(ip.payload);
        } catch (const CodecError& e) {
            log_line(now, std::string("non-signalling frame at the manager's switch ignored: ") +
                              e.what());
            return;
        }
        if (udp.dst_port != GTPC_PORT) {
            log_line(now, "unexpected destination port " + std::to_string(udp.dst_port) +
                              " at the manager's switch");
            return;
        }
        if (ip.src == topo_.replica.ctrl_ip) {
            absorb(now, ip, udp.payload);
            return;
        }
        if (in_port == PORT_LOCAL) {
            manager_message(now, ip, udp.payload, frame);
            return;
        }
        log_line(now, "signalling from unexpected source " + ip.src.str() + " ignored");
    }

    void manager_message(TimeUs now, const Ipv4Packet& ip, const Bytes& payload,
                         const EthernetFrame& frame) {
        const StoredMessage* rec = store_.store(now, ip.src, ip.dst, payload);
        if (intercept_ == InterceptMode::StoreAndForward) {
            // The tap kept the original off the wire; send it onward now.
            if (auto port = signalling_port_for(ip.dst)) {
                sb_.packet_out(topo_.mme_switch, *port, frame);
            } else {
                log_line(now, "no signalling port toward " + ip.dst.str() + ", message dropped");
            }
        }
        if (rec && deployed_ && !failed_) duplicate_live(now, *rec);
    }

    /// Keeps the replica in step with signalling that arrives after it was
    /// brought up.
    void duplicate_live(TimeUs now, const StoredMessage& rec) {
        if (rec.spgw_ip != topo_.primary.ctrl_ip) return;
        if (strategy_ == ReplicationStrategy::Naive) {
            feed_.push_back(
                ReplayItem{rec.payload, rec.seq, rec.kind, rec.imsi, ReplayItem::Then::Plain});
            pump(now);
            return;
        }
        // Selective: only moved sessions are mirrored, re-addressed to the
        // replica's copy of the session.
        auto it = diverts_.find(rec.imsi);
        if (it == diverts_.end()) return;
        Bytes payload = rec.payload;
        if (rec.kind == GtpcKind::ModifyBearerRequest) {
            GtpControlMessage m = decode_gtpc(rec.payload, rec.mme_ip, rec.spgw_ip);
            payload = encode_gtpc(rewrite_s11_teid(m, it->second.new_sgw_s11_teid));
        }
        feed_.push_back(ReplayItem{payload, rec.seq, rec.kind, rec.imsi, ReplayItem::Then::Plain});
        pump(now);
    }

    /// Replica-sourced signalling never reaches the manager; it lands here.
    void absorb(TimeUs now, const Ipv4Packet& ip, const Bytes& payload) {
        ++absorbed_;
        GtpControlMessage msg;
        try {
            msg = decode_gtpc(payload, ip.src, ip.dst);
        } catch (const CodecError& e) {
            log_line(now, std::string("absorbed undecodable replica message: ") + e.what());
            return;
        }
        if (msg.is_request()) {
            log_line(now, "absorbed replica-originated " + std::string(gtpc_kind_name(msg.kind)));
            return;
        }
        if (!in_flight_ || msg.seq != in_flight_->seq) {
            log_line(now, "absorbed stray replica response seq " + std::to_string(msg.seq));
            return;
        }

        ReplayItem item = std::move(*in_flight_);
        in_flight_.reset();
        last_response_ = now;

        if (!msg.cause || *msg.cause != GtpcCause::Accepted) {
            failed_ = true;
            feed_.clear();
            pending_.clear();
            log_line(now, "replica rejected " + std::string(gtpc_kind_name(item.kind)) +
                              " for " + item.imsi + ", replication aborted");
            return;
        }

        switch (item.then) {
            case ReplayItem::Then::Plain:
                break;
            case ReplayItem::Then::CaptureSession: {
                auto& p = pending_.at(item.imsi);
                p.new_s11 = msg.sender_s11_teid;
                p.new_s1u = msg.s1u_teid_sgw.value_or(0);
                p.new_ue_ip = msg.ue_ip.value_or(Ipv4Addr{});
                // Follow with the bearer update, re-addressed to the
                // replica's fresh session.
                GtpControlMessage mbr =
                    decode_gtpc(p.mbr_payload, topo_.mme_ip, topo_.primary.ctrl_ip);
                Bytes rewritten = encode_gtpc(rewrite_s11_teid(mbr, p.new_s11));
                feed_.push_front(ReplayItem{std::move(rewritten), mbr.seq, mbr.kind, item.imsi,
                                            ReplayItem::Then::FinishDivert});
                break;
            }
            case ReplayItem::Then::FinishDivert:
                finish_divert(now, item.imsi);
                break;
        }
        pump(now);
    }

    /// Sends the next queued message to the replica. Strictly sequential:
    /// nothing leaves while an answer is outstanding.
    void pump(TimeUs now) {
        if (in_flight_ || feed_.empty() || failed_) return;
        in_flight_ = std::move(feed_.front());
        feed_.pop_front();
        Bytes pkt = make_udp_ipv4(topo_.mme_ip, topo_.replica.ctrl_ip, GTPC_PORT, GTPC_PORT,
                                  in_flight_->payload);
        EthernetFrame f = make_frame(topo_.mme_mac, topo_.replica.ctrl_mac, std::move(pkt));
        sb_.packet_out(topo_.mme_switch, topo_.replica.signalling_port, f);
        tx_bytes_ += in_flight_->payload.size();
        (void)now;
    }

    void finish_divert(TimeUs now, const std::string& imsi) {
        PendingDivert p = std::move(pending_.at(imsi));
        pending_.erase(imsi);
        DivertRecord rec;
        rec.imsi = imsi;
        rec.enb_ip = topo_.enb_ip;
        rec.old_spgw_ip = topo_.primary.user_ip;
        rec.new_spgw_ip = topo_.replica.user_ip;
        rec.selective = true;
        rec.new_sgw_s1u_teid = p.new_s1u;
        rec.new_sgw_s11_teid = p.new_s11;
        rec.old_ue_ip = p.old_ue_ip;
        rec.new_ue_ip = p.new_ue_ip;
        install_divert_rules(rec);
        diverts_[imsi] = rec;
        log_line(now, "session " + imsi + " diverted to " + topo_.replica.user_ip.str() +
                          " (address " + rec.new_ue_ip.str() + " masked as " +
                          rec.old_ue_ip.str() + ")");
    }

    // ------------------------------------------------------------------
    // User-plane rewiring.

    /// Rules shared by every diverted session, installed once. Numbering
    /// follows the canonical layout: (1) re-sourced re-encapsulation, (2)
    /// decapsulated traffic to the steering table, (3) default steering back
    /// to the original gateway, then after the per-session entries the
    /// cutover (5) that pulls uplink tunnels into the local stack.
    void install_shared_core() {
        FlowRule r1;
        r1.table_id = 0;
        r1.priority = PRIO_MEDIUM;
        r1.match.eth_type = ETHTYPE_IPV4;
        r1.match.ipv4_src = topo_.gtp_switch_ip;
        r1.match.ip_proto = IPPROTO_UDP_V;
        r1.match.udp_dst = GTPU_PORT;
        r1.actions = {Action::set_ip_src(topo_.enb_ip), Action::goto_table(2)};
        r1.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r1);

        FlowRule r2;
        r2.table_id = 0;
        r2.priority = PRIO_HIGH;
        r2.match.in_port = PORT_GTP;
        r2.actions = {Action::goto_table(1)};
        r2.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r2);

        FlowRule r3;
        r3.table_id = 1;
        r3.priority = PRIO_LOW;
        r3.actions = {Action::set_tunnel_dst(topo_.primary.user_ip), Action::output(PORT_IN_PORT)};
        r3.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r3);
    }

    void install_cutover() {
        FlowRule r5;
        r5.table_id = 0;
        r5.priority = PRIO_MEDIUM;
        r5.match.eth_type = ETHTYPE_IPV4;
        r5.match.ipv4_src = topo_.enb_ip;
        r5.match.ipv4_dst = topo_.primary.user_ip;
        r5.match.ip_proto = IPPROTO_UDP_V;
        r5.match.udp_dst = GTPU_PORT;
        r5.actions = {Action::set_ip_dst(topo_.gtp_switch_ip),
                      Action::set_eth_dst(topo_.gtp_switch_mac), Action::output(PORT_LOCAL)};
        r5.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r5);
    }

    /// Extra shared rules the selective strategy needs for the reverse
    /// direction: (6) pulls the replica's downlink tunnels into the local
    /// stack, (8) re-sources the re-encapsulated result as the original
    /// gateway so the radio side sees its expected peer.
    void install_selective_shared() {
        FlowRule r6;
        r6.table_id = 0;
        r6.priority = PRIO_MEDIUM;
        r6.match.eth_type = ETHTYPE_IPV4;
        r6.match.ipv4_src = topo_.replica.user_ip;
        r6.match.ip_proto = IPPROTO_UDP_V;
        r6.match.udp_dst = GTPU_PORT;
        r6.actions = {Action::set_ip_dst(topo_.gtp_switch_ip),
                      Action::set_eth_dst(topo_.gtp_switch_mac), Action::output(PORT_LOCAL)};
        r6.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r6);

        FlowRule r8;
        r8.table_id = 0;
        r8.priority = PRIO_HIGH;
        r8.match.eth_type = ETHTYPE_IPV4;
        r8.match.ipv4_src = topo_.gtp_switch_ip;
        r8.match.ipv4_dst = topo_.enb_ip;
        r8.match.ip_proto = IPPROTO_UDP_V;
        r8.match.udp_dst = GTPU_PORT;
        r8.actions = {Action::set_ip_src(topo_.primary.user_ip), Action::goto_table(2)};
        r8.app_tag = TAG_DIVERT_SHARED;
        sb_.install_rule(topo_.gtp_switch, r8);
    }

    void install_divert_rules(const DivertRecord& rec) {
        bool first = !shared_installed_;
        if (first) install_shared_core();

        std::uint64_t tag = next_session_tag_++;
        session_tag_[rec.imsi] = tag;

        // (4) per-session steering toward the replica.
        FlowRule r4;
        r4.table_id = 1;
        r4.priority = PRIO_HIGH;
        r4.match.eth_type = ETHTYPE_IPV4;
        r4.match.ipv4_src = rec.old_ue_ip;
        if (rec.selective) {
            r4.actions = {Action::set_tunnel_dst(topo_.replica.user_ip),
                          Action::set_tunnel_teid(rec.new_sgw_s1u_teid),
                          Action::set_inner_src(rec.new_ue_ip), Action::output(PORT_IN_PORT)};
        } else {
            r4.actions = {Action::set_tunnel_dst(topo_.replica.user_ip),
                          Action::output(PORT_IN_PORT)};
        }
        r4.app_tag = tag;
        sb_.install_rule(topo_.gtp_switch, r4);

        if (rec.selective) {
            // (7) per-session downlink: restore the original address and
            // tunnel the packet back out to the radio side.
            FlowRule r7;
            r7.table_id = 1;
            r7.priority = PRIO_HIGH;
            r7.match.eth_type = ETHTYPE_IPV4;
            r7.match.ipv4_dst = rec.new_ue_ip;
            r7.actions = {Action::set_inner_dst(rec.old_ue_ip),
                          Action::set_tunnel_dst(topo_.enb_ip), Action::output(PORT_IN_PORT)};
            r7.app_tag = tag;
            sb_.install_rule(topo_.gtp_switch, r7);
            if (first) install_selective_shared();
        }

        if (first) {
            install_cutover();
            shared_installed_ = true;
        }

        if (rec.selective) {
            // (9)/(10) address masking at the packet-network edge, so the
            // correspondent keeps seeing the original address. The source
            // MAC pin matters: the replica hands out addresses the original
            // gateway may also be serving, so the IP alone is ambiguous.
            FlowRule r9;
            r9.table_id = 0;
            r9.priority = PRIO_HIGH;
            r9.match.eth_src = topo_.replica.sgi_mac;
            r9.match.eth_type = ETHTYPE_IPV4;
            r9.match.ipv4_src = rec.new_ue_ip;
            r9.actions = {Action::set_ip_src(rec.old_ue_ip), Action::goto_table(2)};
            r9.app_tag = tag;
            sb_.install_rule(topo_.pdn_switch, r9);

            FlowRule r10;
            r10.table_id = 0;
            r10.priority = PRIO_HIGH;
            r10.match.eth_type = ETHTYPE_IPV4;
            r10.match.ipv4_dst = rec.old_ue_ip;
            r10.actions = {Action::set_ip_dst(rec.new_ue_ip),
                           Action::set_eth_dst(topo_.replica.sgi_mac), Action::goto_table(2)};
            r10.app_tag = tag;
            sb_.install_rule(topo_.pdn_switch, r10);
        }
    }

    void remove_session_rules(const std::string& imsi) {
        auto it = session_tag_.find(imsi);
        if (it == session_tag_.end()) return;
        sb_.remove_rules(topo_.gtp_switch, it->second);
        sb_.remove_rules(topo_.pdn_switch, it->second);
        session_tag_.erase(it);
    }

    // ------------------------------------------------------------------
    // Plain L2 learning for the user-plane switches.

    void learning_packet_in(TimeUs now, const std::string& sw, PortId in_port,
                            const EthernetFrame& frame) {
        (void)now;
        if (frame.src.is_zero()) return;
        auto& where = mac_location_[sw];
        where[frame.src] = in_port;
        if (frame.dst.is_zero() || frame.dst.is_broadcast()) return;
        auto dst = where.find(frame.dst);
        if (dst == where.end()) return;  // keep flooding until the far side speaks

        auto key = std::tuple(sw, frame.src, frame.dst);
        auto installed = installed_pairs_.find(key);
        if (installed != installed_pairs_.end() && installed->second == dst->second) return;

        FlowRule fwd;
        fwd.table_id = 2;
        fwd.priority = PRIO_MEDIUM;
        fwd.match.eth_src = frame.src;
        fwd.match.eth_dst = frame.dst;
        fwd.actions = {Action::output(dst->second)};
        fwd.app_tag = TAG_LEARNING;
        sb_.install_rule(sw, fwd);
        installed_pairs_[key] = dst->second;
    }

    // ------------------------------------------------------------------

    std::optional<PortId> signalling_port_for(Ipv4Addr dst) const {
        if (dst == topo_.primary.ctrl_ip) return topo_.primary.signalling_port;
        if (dst == topo_.replica.ctrl_ip) return topo_.replica.signalling_port;
        return std::nullopt;
    }

    void log_line(TimeUs now, const std::string& text) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "[%10.3f ms] ", double(now) / 1000.0);
        log_.push_back(buf + text);
    }

    ControllerTopology topo_;
    SouthboundApi& sb_;
    InterceptMode intercept_;
    ReplicationStrategy strategy_;

    MessageStore store_;
    std::vector<std::string> log_;

    std::map<std::string, std::map<MacAddr, PortId>> mac_location_;
    std::map<std::tuple<std::string, MacAddr, MacAddr>, PortId> installed_pairs_;

    bool deployed_ = false;
    bool failed_ = false;
    bool have_activity_ = false;
    TimeUs activity_start_ = 0;
    TimeUs last_response_ = 0;
    std::uint64_t tx_bytes_ = 0;
    std::uint64_t absorbed_ = 0;

    std::deque<ReplayItem> feed_;
    std::optional<ReplayItem> in_flight_;
    std::map<std::string, PendingDivert> pending_;

    std::map<std::string, DivertRecord> diverts_;
    std::map<std::string, std::uint64_t> session_tag_;
    std::uint64_t next_session_tag_ = TAG_DIVERT_SESSION_BASE;
    bool shared_installed_ = false;
};

}  // namespace mecssc
