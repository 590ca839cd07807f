#pragma once

#include <map>
#include <string>

#include "gtpu.hpp"
#include "session.hpp"

namespace mecssc {

struct EnbConfig {
    std::string name;
    Ipv4Addr s1u_ip;
    Teid teid_base = 0x2000;
};

struct EnbBearer {
    std::string imsi;
    Ipv4Addr ue_ip;
    Teid enb_teid = 0;      // downlink tunnel into this base station
    Teid sgw_teid = 0;      // uplink tunnel into the gateway
    Ipv4Addr sgw_addr;

    friend bool operator==(const EnbBearer&, const EnbBearer&) = default;
};

struct BearerSetup {
    Teid teid = 0;
    Ipv4Addr addr;
};

/// Base station user-plane endpoint: one radio bearer per attached UE,
/// wrapping uplink traffic toward the gateway and unwrapping downlink traffic
/// for local delivery.
class EnbInstance {
public:
    explicit EnbInstance(EnbConfig cfg) : cfg_(std::move(cfg)), next_teid_(cfg_.teid_base) {}

    const EnbConfig& config() const noexcept { return cfg_; }

    /// Called by the mobility manager once the gateway side of a session
    /// exists. Repeating the call for a known UE refreshes the gateway
    /// endpoint but keeps the already-advertised local TEID.
    BearerSetup setup_bearer(const std::string& imsi, Teid sgw_teid, Ipv4Addr sgw_addr,
                             Ipv4Addr ue_ip) {
        auto it = by_imsi_.find(imsi);
        if (it != by_imsi_.end()) {
            EnbBearer& b = by_teid_.at(it->second);
            b.sgw_teid = sgw_teid;
            b.sgw_addr = sgw_addr;
            b.ue_ip = ue_ip;
            ue_index_[ue_ip.v] = b.enb_teid;
            return {b.enb_teid, cfg_.s1u_ip};
        }
        EnbBearer b;
        b.imsi = imsi;
        b.ue_ip = ue_ip;
        b.enb_teid = next_teid_++;
        b.sgw_teid = sgw_teid;
        b.sgw_addr = sgw_addr;
        by_imsi_[imsi] = b.enb_teid;
        ue_index_[ue_ip.v] = b.enb_teid;
        Teid teid = b.enb_teid;
        by_teid_.emplace(teid, std::move(b));
        return {teid, cfg_.s1u_ip};
    }

    struct UplinkResult {
        bool ok = false;
        std::string diag;
        GtpUserPacket pkt;
    };

    /// Wraps a packet emitted by an attached UE for the tunnel to its gateway.
    UplinkResult uplink(Bytes inner_packet) const {
        Ipv4View inner = parse_ipv4_view(inner_packet);
        if (!inner.valid) return {false, "not an IPv4 packet", {}};
        auto it = ue_index_.find(inner.src.v);
        if (it == ue_index_.end()) return {false, "no bearer for " + inner.src.str(), {}};
        const EnbBearer& b = by_teid_.at(it->second);
        GtpUserPacket pkt;
        pkt.teid = b.sgw_teid;
        pkt.inner = std::move(inner_packet);
        pkt.outer = {cfg_.s1u_ip, b.sgw_addr, GTPU_PORT, GTPU_PORT};
        return {true, {}, std::move(pkt)};
    }

    struct DownlinkResult {
        bool ok = false;
        std::string diag;
        Ipv4Addr ue_ip;
        Bytes inner;
    };

    /// Unwraps a tunnel packet addressed to one of this station's bearers.
    /// Delivery is by bearer, not by inner address: whatever arrives in the
    /// tunnel goes to the UE the tunnel belongs to.
    DownlinkResult downlink(const GtpUserPacket& pkt) const {
        auto it = by_teid_.find(pkt.teid);
        if (it == by_teid_.end())
            return {false, "unknown downlink tunnel", {}, {}};
        return {true, {}, it->second.ue_ip, pkt.inner};
    }

    const EnbBearer* bearer_by_imsi(const std::string& imsi) const {
        auto it = by_imsi_.find(imsi);
        return it == by_imsi_.end() ? nullptr : &by_teid_.at(it->second);
    }

    const EnbBearer* bearer_by_ue_ip(Ipv4Addr ip) const {
        auto it = ue_index_.find(ip.v);
        return it == ue_index_.end() ? nullptr : &by_teid_.at(it->second);
    }

    std::size_t bearer_count() const noexcept { return by_teid_.size(); }

private:
    EnbConfig cfg_;
    Teid next_teid_;
    std::map<Teid, EnbBearer> by_teid_;
    std::map<std::string, Teid> by_imsi_;
    std::map<std::uint32_t, Teid> ue_index_;
};

}  // namespace mecssc
