#pragma once

#include <map>
#include <string>

#include "gtpc.hpp"
#include "gtpu.hpp"
#include "session.hpp"

namespace mecssc {

// Control-plane processing cost per request, charged by the hosting node.
// Session creation allocates state and an address; bearer updates touch one
// existing record.
inline constexpr TimeUs SPGW_CSR_PROC_US = 10'000;
inline constexpr TimeUs SPGW_MBR_PROC_US = 1'000;

inline TimeUs spgw_control_proc_us(GtpcKind kind) {
    return kind == GtpcKind::CreateSessionRequest ? SPGW_CSR_PROC_US : SPGW_MBR_PROC_US;
}

struct SpgwConfig {
    std::string name;
    Ipv4Addr ctrl_ip;  // bearer signalling endpoint
    Ipv4Addr user_ip;  // tunnel endpoint
    Ipv4Addr sgi_ip;   // packet-network side
    Ipv4Addr pool_network;
    int pool_prefix = 16;
    Teid teid_base = 0x1000;
};

/// Combined serving/packet gateway: terminates bearer signalling, anchors
/// user-plane tunnels, assigns UE addresses. Deliberately free of any notion
/// of time or transport; all state transitions are driven by the messages
/// handed in, in order. That makes the whole gateway replayable: a fresh
/// instance with the same configuration fed the same request sequence ends up
/// in an identical state.
class SpgwInstance {
public:
    explicit SpgwInstance(SpgwConfig cfg)
        : cfg_(std::move(cfg)), pool_(cfg_.pool_network, cfg_.pool_prefix),
          next_teid_(cfg_.teid_base) {}

    const SpgwConfig& config() const noexcept { return cfg_; }

    GtpControlMessage handle_control(const GtpControlMessage& req) {
        if (!req.is_request()) throw CodecError("msg_kind", "gateway handles only requests");
        return req.kind == GtpcKind::CreateSessionRequest ? handle_create(req)
                                                          : handle_modify(req);
    }

    struct UplinkResult {
        bool ok = false;
        std::string diag;
        Bytes inner;
    };

    /// Tunnel ingress: validates the TEID, the bearer state, and that the
    /// inner source really is the address bound to that bearer. The source
    /// check is what stops one UE's tunnel from carrying another's traffic.
    UplinkResult handle_uplink(const GtpUserPacket& pkt) {
        auto s1u = s1u_index_.find(pkt.teid);
        if (s1u == s1u_index_.end())
            return {false, "unknown uplink tunnel " + teid_str(pkt.teid), {}};
        SessionContext& ctx = by_s11_.at(s1u->second);
        if (ctx.state != BearerState::Active)
            return {false, "bearer for " + ctx.imsi + " not active", {}};
        Ipv4View inner = parse_ipv4_view(pkt.inner);
        if (!inner.valid) return {false, "inner packet is not IPv4", {}};
        if (inner.src != ctx.ue_ip)
            return {false, "inner source " + inner.src.str() + " does not match bearer address " +
                               ctx.ue_ip.str(),
                    {}};
        return {true, {}, pkt.inner};
    }

    struct DownlinkResult {
        bool ok = false;
        std::string diag;
        GtpUserPacket pkt;
    };

    /// Wraps a packet arriving from the packet network for delivery through
    /// the bearer whose UE address it targets.
    DownlinkResult make_downlink(Bytes inner_packet) const {
        Ipv4View inner = parse_ipv4_view(inner_packet);
        if (!inner.valid) return {false, "not an IPv4 packet", {}};
        auto idx = ue_ip_index_.find(inner.dst.v);
        if (idx == ue_ip_index_.end())
            return {false, "no bearer for " + inner.dst.str(), {}};
        const SessionContext& ctx = by_s11_.at(idx->second);
        if (ctx.state != BearerState::Active)
            return {false, "bearer for " + ctx.imsi + " not active", {}};
        GtpUserPacket pkt;
        pkt.teid = ctx.s1u_teid_enb;
        pkt.inner = std::move(inner_packet);
        pkt.outer = {cfg_.user_ip, ctx.enb_addr, GTPU_PORT, GTPU_PORT};
        return {true, {}, std::move(pkt)};
    }

    std::size_t session_count() const noexcept { return by_s11_.size(); }

    const SessionContext* session_by_imsi(const std::string& imsi) const {
        auto it = imsi_index_.find(imsi);
        return it == imsi_index_.end() ? nullptr : &by_s11_.at(it->second);
    }

    const SessionContext* session_by_ue_ip(Ipv4Addr ip) const {
        auto it = ue_ip_index_.find(ip.v);
        return it == ue_ip_index_.end() ? nullptr : &by_s11_.at(it->second);
    }

    /// Canonical one-line-per-session rendering, ordered by IMSI. Two
    /// gateways are interchangeable exactly when their snapshots are equal.
    std::string snapshot() const {
        std::string out;
        for (const auto& [imsi, s11] : imsi_index_) {
            out += by_s11_.at(s11).str();
            out += "\n";
        }
        return out;
    }

private:
    GtpControlMessage handle_create(const GtpControlMessage& req) {
        auto existing = imsi_index_.find(req.imsi);
        if (existing != imsi_index_.end()) {
            // Duplicate create: answer from existing state, allocate nothing.
            return accept_response(by_s11_.at(existing->second), req);
        }
        auto ue_ip = pool_.allocate();
        if (!ue_ip) {
            GtpControlMessage rsp;
            rsp.kind = GtpcKind::CreateSessionResponse;
            rsp.seq = req.seq;
            rsp.cause = GtpcCause::NoResources;
            rsp.peer_s11_teid = req.sender_s11_teid;
            rsp.src_ip = cfg_.ctrl_ip;
            rsp.dst_ip = req.sender_s11_addr;
            return rsp;
        }
        SessionContext ctx;
        ctx.imsi = req.imsi;
        ctx.s11_teid_local = next_teid_++;
        ctx.s1u_teid_local = next_teid_++;
        ctx.s11_teid_peer = req.sender_s11_teid;
        ctx.s11_peer_addr = req.sender_s11_addr;
        ctx.ue_ip = *ue_ip;
        ctx.state = BearerState::PendingBearer;
        imsi_index_[ctx.imsi] = ctx.s11_teid_local;
        ue_ip_index_[ctx.ue_ip.v] = ctx.s11_teid_local;
        s1u_index_[ctx.s1u_teid_local] = ctx.s11_teid_local;
        auto [it, inserted] = by_s11_.emplace(ctx.s11_teid_local, std::move(ctx));
        (void)inserted;
        return accept_response(it->second, req);
    }

    GtpControlMessage handle_modify(const GtpControlMessage& req) {
        GtpControlMessage rsp;
        rsp.kind = GtpcKind::ModifyBearerResponse;
        rsp.seq = req.seq;
        rsp.src_ip = cfg_.ctrl_ip;
        rsp.dst_ip = req.sender_s11_addr;
        auto it = by_s11_.find(req.peer_s11_teid);
        if (it == by_s11_.end()) {
            rsp.cause = GtpcCause::ContextNotFound;
            rsp.peer_s11_teid = req.sender_s11_teid;
            return rsp;
        }
        SessionContext& ctx = it->second;
        ctx.s1u_teid_enb = *req.s1u_teid_enb;
        ctx.enb_addr = req.s1u_addr_enb;
        ctx.state = BearerState::Active;
        rsp.cause = GtpcCause::Accepted;
        rsp.peer_s11_teid = ctx.s11_teid_peer;
        return rsp;
    }

    GtpControlMessage accept_response(const SessionContext& ctx, const GtpControlMessage& req) const {
        GtpControlMessage rsp;
        rsp.kind = GtpcKind::CreateSessionResponse;
        rsp.seq = req.seq;
        rsp.cause = GtpcCause::Accepted;
        rsp.peer_s11_teid = ctx.s11_teid_peer;
        rsp.sender_s11_teid = ctx.s11_teid_local;
        rsp.sender_s11_addr = cfg_.ctrl_ip;
        rsp.s1u_teid_sgw = ctx.s1u_teid_local;
        rsp.s1u_addr_sgw = cfg_.user_ip;
        rsp.ue_ip = ctx.ue_ip;
        rsp.src_ip = cfg_.ctrl_ip;
        rsp.dst_ip = ctx.s11_peer_addr;
        return rsp;
    }

    static std::string teid_str(Teid t) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", t);
        return buf;
    }

    SpgwConfig cfg_;
    Ipv4Pool pool_;
    Teid next_teid_;
    std::map<Teid, SessionContext> by_s11_;        // local S11 TEID -> session
    std::map<std::string, Teid> imsi_index_;       // IMSI -> local S11 TEID
    std::map<std::uint32_t, Teid> ue_ip_index_;    // UE address -> local S11 TEID
    std::map<Teid, Teid> s1u_index_;               // local S1U TEID -> local S11 TEID
};

}  // namespace mecssc
