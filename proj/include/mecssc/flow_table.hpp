#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "frame.hpp"

namespace mecssc {

using PortId = std::uint32_t;

// Reserved port values, mirroring OpenFlow's special ports plus the
// flow-based GTP virtual tunnel port.
inline constexpr PortId PORT_IN_PORT = 0xfffffffa;
inline constexpr PortId PORT_FLOOD = 0xfffffffb;
inline constexpr PortId PORT_CONTROLLER = 0xfffffffc;
inline constexpr PortId PORT_GTP = 0xfffffffd;
inline constexpr PortId PORT_LOCAL = 0xfffffffe;

inline std::string port_name(PortId p) {
    switch (p) {
        case PORT_IN_PORT: return "IN_PORT";
        case PORT_FLOOD: return "FLOOD";
        case PORT_CONTROLLER: return "CONTROLLER";
        case PORT_GTP: return "GTP";
        case PORT_LOCAL: return "LOCAL";
        default: return std::to_string(p);
    }
}

inline constexpr std::uint16_t PRIO_HIGH = 300;
inline constexpr std::uint16_t PRIO_MEDIUM = 200;
inline constexpr std::uint16_t PRIO_LOW = 100;

/// Frame attributes a rule can match on. Every field is optional; an empty
/// match is the catch-all.
struct MatchFields {
    std::optional<PortId> in_port;
    std::optional<std::uint16_t> eth_type;
    std::optional<MacAddr> eth_src;
    std::optional<MacAddr> eth_dst;
    std::optional<Ipv4Addr> ipv4_src;
    std::optional<Ipv4Addr> ipv4_dst;
    std::optional<std::uint8_t> ip_proto;
    std::optional<std::uint16_t> udp_src;
    std::optional<std::uint16_t> udp_dst;

    friend bool operator==(const MatchFields&, const MatchFields&) = default;

    bool matches(PortId port, const EthernetFrame& f, const Ipv4View& ip) const {
        if (in_port && *in_port != port) return false;
        if (eth_type && *eth_type != f.eth_type) return false;
        if (eth_src && *eth_src != f.src) return false;
        if (eth_dst && *eth_dst != f.dst) return false;
        bool needs_ip = ipv4_src || ipv4_dst || ip_proto || udp_src || udp_dst;
        if (!needs_ip) return true;
        if (f.eth_type != ETHTYPE_IPV4 || !ip.valid) return false;
        if (ipv4_src && *ipv4_src != ip.src) return false;
        if (ipv4_dst && *ipv4_dst != ip.dst) return false;
        if (ip_proto && *ip_proto != ip.proto) return false;
        if (udp_src || udp_dst) {
            if (!ip.has_udp) return false;
            if (udp_src && *udp_src != ip.udp_src) return false;
            if (udp_dst && *udp_dst != ip.udp_dst) return false;
        }
        return true;
    }

    std::string str() const {
        std::ostringstream out;
        out << "match{";
        const char* sep = "";
        auto emit = [&](const std::string& kv) {
            out << sep << kv;
            sep = ",";
        };
        if (in_port) emit("in_port=" + port_name(*in_port));
        if (eth_type) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "eth_type=0x%04x", *eth_type);
            emit(buf);
        }
        if (eth_src) emit("eth_src=" + eth_src->str());
        if (eth_dst) emit("eth_dst=" + eth_dst->str());
        if (ipv4_src) emit("ipv4_src=" + ipv4_src->str());
        if (ipv4_dst) emit("ipv4_dst=" + ipv4_dst->str());
        if (ip_proto) emit("ip_proto=" + std::to_string(*ip_proto));
        if (udp_src) emit("udp_src=" + std::to_string(*udp_src));
        if (udp_dst) emit("udp_dst=" + std::to_string(*udp_dst));
        out << "}";
        return out.str();
    }
};

struct Action {
    enum class Kind {
        Output,        // port argument (physical or reserved)
        GotoTable,     // table argument, strictly increasing
        SetEthSrc,
        SetEthDst,
        SetIpSrc,
        SetIpDst,
        SetTunnelDst,  // pending re-encapsulation outer destination
        SetTunnelTeid, // pending re-encapsulation TEID override
        SetInnerSrc,   // rewrite of a decapsulated packet's source
        SetInnerDst,   // rewrite of a decapsulated packet's destination
    };

    Kind kind = Kind::Output;
    PortId port = 0;
    std::uint8_t table = 0;
    MacAddr mac;
    Ipv4Addr ip;
    Teid teid = 0;

    friend bool operator==(const Action&, const Action&) = default;

    static Action output(PortId p) {
        Action a;
        a.kind = Kind::Output;
        a.port = p;
        return a;
    }
    static Action goto_table(std::uint8_t t) {
        Action a;
        a.kind = Kind::GotoTable;
        a.table = t;
        return a;
    }
    static Action set_eth_src(MacAddr m) {
        Action a;
        a.kind = Kind::SetEthSrc;
        a.mac = m;
        return a;
    }
    static Action set_eth_dst(MacAddr m) {
        Action a;
        a.kind = Kind::SetEthDst;
        a.mac = m;
        return a;
    }
    static Action set_ip_src(Ipv4Addr v) {
        Action a;
        a.kind = Kind::SetIpSrc;
        a.ip = v;
        return a;
    }
    static Action set_ip_dst(Ipv4Addr v) {
        Action a;
        a.kind = Kind::SetIpDst;
        a.ip = v;
        return a;
    }
    static Action set_tunnel_dst(Ipv4Addr v) {
        Action a;
        a.kind = Kind::SetTunnelDst;
        a.ip = v;
        return a;
    }
    static Action set_tunnel_teid(Teid t) {
        Action a;
        a.kind = Kind::SetTunnelTeid;
        a.teid = t;
        return a;
    }
    static Action set_inner_src(Ipv4Addr v) {
        Action a;
        a.kind = Kind::SetInnerSrc;
        a.ip = v;
        return a;
    }
    static Action set_inner_dst(Ipv4Addr v) {
        Action a;
        a.kind = Kind::SetInnerDst;
        a.ip = v;
        return a;
    }

    std::string str() const {
        char buf[32];
        switch (kind) {
            case Kind::Output: return "OUTPUT=" + port_name(port);
            case Kind::GotoTable: return "GOTO_TABLE(" + std::to_string(table) + ")";
            case Kind::SetEthSrc: return "SET_ETH_SRC=" + mac.str();
            case Kind::SetEthDst: return "SET_ETH_DST=" + mac.str();
            case Kind::SetIpSrc: return "SET_IP_SRC=" + ip.str();
            case Kind::SetIpDst: return "SET_IP_DST=" + ip.str();
            case Kind::SetTunnelDst: return "SET_TUN_DST=" + ip.str();
            case Kind::SetTunnelTeid:
                std::snprintf(buf, sizeof buf, "SET_TUN_TEID=0x%08x", teid);
                return buf;
            case Kind::SetInnerSrc: return "SET_INNER_SRC=" + ip.str();
            case Kind::SetInnerDst: return "SET_INNER_DST=" + ip.str();
        }
        return "?";
    }
};

struct FlowRule {
    std::uint8_t table_id = 0;
    std::uint16_t priority = PRIO_LOW;
    MatchFields match;
    std::vector<Action> actions;
    std::uint64_t app_tag = 0;  // owner cookie, used for grouped removal

    // Assigned at install time.
    std::uint64_t install_seq = 0;
    // Per-rule counters; reset when the rule is replaced.
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;

    std::string str() const {
        std::string out = "table=" + std::to_string(table_id) + " prio=" + std::to_string(priority) +
                          " seq=" + std::to_string(install_seq) + " " + match.str() + " actions[";
        const char* sep = "";
        for (const auto& a : actions) {
            out += sep;
            out += a.str();
            sep = ",";
        }
        out += "]";
        return out;
    }
};

/// One flow table: installs with replace semantics on (priority, match)
/// duplicates, lookup by highest priority with lowest install_seq tie-break.
class FlowTable {
public:
    /// Returns the installed rule's seq. Replacing resets counters and
    /// assigns a fresh seq (the replacement is a new install).
    std::uint64_t install(FlowRule rule) {
        rule.install_seq = next_seq_++;
        rule.packets = rule.bytes = 0;
        for (auto& existing : rules_) {
            if (existing.priority == rule.priority && existing.match == rule.match) {
                existing = rule;
                return rule.install_seq;
            }
        }
        rules_.push_back(std::move(rule));
        return rules_.back().install_seq;
    }

    bool remove(std::uint16_t priority, const MatchFields& match) {
        auto it = std::find_if(rules_.begin(), rules_.end(), [&](const FlowRule& r) {
            return r.priority == priority && r.match == match;
        });
        if (it == rules_.end()) return false;
        rules_.erase(it);
        return true;
    }

    std::size_t remove_by_tag(std::uint64_t app_tag) {
        std::size_t before = rules_.size();
        std::erase_if(rules_, [&](const FlowRule& r) { return r.app_tag == app_tag; });
        return before - rules_.size();
    }

    FlowRule* lookup(PortId in_port, const EthernetFrame& f, const Ipv4View& ip) {
        FlowRule* best = nullptr;
        for (auto& r : rules_) {
            if (!r.match.matches(in_port, f, ip)) continue;
            if (!best || r.priority > best->priority ||
                (r.priority == best->priority && r.install_seq < best->install_seq))
                best = &r;
        }
        return best;
    }

    const std::vector<FlowRule>& rules() const noexcept { return rules_; }
    std::vector<FlowRule>& rules() noexcept { return rules_; }

private:
    std::vector<FlowRule> rules_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace mecssc
