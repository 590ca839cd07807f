#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "core.hpp"

namespace mecssc {

enum class BearerState : std::uint8_t {
    PendingBearer,  // session created, downlink tunnel endpoint not yet known
    Active,
};

inline const char* bearer_state_name(BearerState s) {
    return s == BearerState::Active ? "active" : "pending";
}

/// One UE's bearer as the gateway sees it.
struct SessionContext {
    std::string imsi;
    Teid s11_teid_local = 0;  // this gateway's control TEID
    Teid s11_teid_peer = 0;   // mobility manager's control TEID
    Ipv4Addr s11_peer_addr;
    Teid s1u_teid_local = 0;  // this gateway's user-plane TEID (uplink target)
    Teid s1u_teid_enb = 0;    // base station's user-plane TEID (downlink target)
    Ipv4Addr enb_addr;
    Ipv4Addr ue_ip;
    BearerState state = BearerState::PendingBearer;

    friend bool operator==(const SessionContext&, const SessionContext&) = default;

    std::string str() const {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "imsi=%s state=%s s11=0x%08x peer=0x%08x s1u=0x%08x enb_teid=0x%08x enb=%s ue=%s",
                      imsi.c_str(), bearer_state_name(state), s11_teid_local, s11_teid_peer,
                      s1u_teid_local, s1u_teid_enb, enb_addr.str().c_str(), ue_ip.str().c_str());
        return buf;
    }
};

/// Hands out host addresses of a network in ascending order, skipping .0 and
/// .255 host bytes. There is no release: allocation order is a pure function
/// of the allocation count, so two identically configured gateways that see
/// the same request sequence assign the same addresses.
class Ipv4Pool {
public:
    Ipv4Pool(Ipv4Addr network, int prefix_len)
        : network_(network), prefix_len_(prefix_len) {
        if (prefix_len < 8 || prefix_len > 30)
            throw std::invalid_argument("pool prefix length out of range");
    }

    Ipv4Addr network() const noexcept { return network_; }
    int prefix_len() const noexcept { return prefix_len_; }
    std::uint32_t allocated() const noexcept { return allocated_; }

    std::optional<Ipv4Addr> allocate() {
        const std::uint32_t broadcast_offset = (1u << (32 - prefix_len_)) - 1;
        while (next_offset_ < broadcast_offset) {
            Ipv4Addr candidate(network_.v + next_offset_);
            ++next_offset_;
            std::uint8_t last = std::uint8_t(candidate.v & 0xff);
            if (last == 0 || last == 255) continue;
            ++allocated_;
            return candidate;
        }
        return std::nullopt;
    }

    bool contains(Ipv4Addr a) const noexcept {
        std::uint32_t mask = prefix_len_ == 0 ? 0 : ~std::uint32_t(0) << (32 - prefix_len_);
        return (a.v & mask) == (network_.v & mask);
    }

private:
    Ipv4Addr network_;
    int prefix_len_;
    std::uint32_t next_offset_ = 1;
    std::uint32_t allocated_ = 0;
};

}  // namespace mecssc
