#pragma once

#include <map>
#include <string>

#include "flow_table.hpp"
#include "gtpu.hpp"

namespace mecssc {

inline constexpr int PIPELINE_TABLES = 3;
inline constexpr int TABLE_CLASSIFY = 0;
inline constexpr int TABLE_GTP = 1;
inline constexpr int TABLE_FORWARD = 2;

// A frame may traverse the GTP virtual port at most twice: once to strip the
// tunnel header and once to wrap a new one. Anything further is a rule loop.
inline constexpr int MAX_RECIRCULATIONS = 2;

struct PacketIn {
    PortId in_port = 0;
    EthernetFrame frame;
};

struct DropDiag {
    std::string reason;
    EthernetFrame frame;
};

struct PipelineResult {
    std::vector<std::pair<PortId, EthernetFrame>> egress;  // physical ports, or LOCAL on host-bound
    std::vector<PacketIn> packet_ins;
    std::vector<DropDiag> drops;
    bool used_gtp_port = false;
};

struct PipelineConfig {
    std::string name;
    std::vector<PortId> physical_ports;
    Ipv4Addr local_ip;   // host stack / tunnel endpoint address
    MacAddr local_mac;
    bool gtp_enabled = false;
};

/// The three-table switch datapath: table 0 classifies, table 1 steers
/// decapsulated traffic back into tunnels, table 2 forwards by MAC. The GTP
/// virtual port is flow-based: Output(LOCAL) on a GTP-U packet addressed to
/// the local endpoint strips the tunnel and re-runs the inner packet from
/// table 0 with in_port=GTP; Output(IN_PORT) from the GTP port wraps the
/// packet with the pending tunnel destination/TEID and re-runs it from the
/// LOCAL port.
class FlowTablePipeline {
public:
    explicit FlowTablePipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

    const PipelineConfig& config() const noexcept { return cfg_; }

    void set_neighbor(Ipv4Addr ip, MacAddr mac) { neighbors_[ip] = mac; }

    std::optional<MacAddr> neighbor(Ipv4Addr ip) const {
        auto it = neighbors_.find(ip);
        if (it == neighbors_.end()) return std::nullopt;
        return it->second;
    }

    std::uint64_t install_rule(FlowRule rule) {
        validate(rule);
        return tables_[rule.table_id].install(std::move(rule));
    }

    bool remove_rule(std::uint8_t table, std::uint16_t priority, const MatchFields& match) {
        if (table >= PIPELINE_TABLES) return false;
        return tables_[table].remove(priority, match);
    }

    std::size_t remove_by_tag(std::uint64_t app_tag) {
        std::size_t n = 0;
        for (auto& t : tables_) n += t.remove_by_tag(app_tag);
        return n;
    }

    const FlowTable& table(int id) const { return tables_.at(std::size_t(id)); }

    PipelineResult process_frame(PortId in_port, EthernetFrame frame) {
        PipelineResult result;
        EthernetFrame cur = std::move(frame);
        PortId cur_port = in_port;
        int table = TABLE_CLASSIFY;
        int recirc = 0;
        struct TunnelMeta {
            bool active = false;
            Teid teid_in = 0;
            std::optional<Ipv4Addr> tun_dst;
            std::optional<Teid> teid_out;
        };
        TunnelMeta tun;

        while (true) {
            Ipv4View ip = cur.eth_type == ETHTYPE_IPV4 ? parse_ipv4_view(cur.payload) : Ipv4View{};
            FlowRule* rule = tables_[table].lookup(cur_port, cur, ip);
            if (!rule) {
                result.drops.push_back({"table " + std::to_string(table) + " miss", cur});
                return result;
            }
            rule->packets += 1;
            rule->bytes += cur.wire_size();

            std::optional<int> goto_table;
            bool recirculated = false;
            for (const auto& act : rule->actions) {
                switch (act.kind) {
                    case Action::Kind::SetEthSrc:
                        cur.src = act.mac;
                        break;
                    case Action::Kind::SetEthDst:
                        cur.dst = act.mac;
                        break;
                    case Action::Kind::SetIpSrc:
                    case Action::Kind::SetInnerSrc:
                        if (cur.eth_type != ETHTYPE_IPV4) {
                            result.drops.push_back({"source rewrite on non-IPv4 frame", cur});
                            return result;
                        }
                        ipv4_set_src(cur.payload, act.ip);
                        break;
                    case Action::Kind::SetIpDst:
                    case Action::Kind::SetInnerDst:
                        if (cur.eth_type != ETHTYPE_IPV4) {
                            result.drops.push_back({"destination rewrite on non-IPv4 frame", cur});
                            return result;
                        }
                        ipv4_set_dst(cur.payload, act.ip);
                        break;
                    case Action::Kind::SetTunnelDst:
                        if (!tun.active) {
                            result.drops.push_back({"tunnel destination outside GTP re-circulation", cur});
                            return result;
                        }
                        tun.tun_dst = act.ip;
                        break;
                    case Action::Kind::SetTunnelTeid:
                        if (!tun.active) {
                            result.drops.push_back({"tunnel TEID outside GTP re-circulation", cur});
                            return result;
                        }
                        tun.teid_out = act.teid;
                        break;
                    case Action::Kind::GotoTable:
                        goto_table = act.table;
                        break;
                    case Action::Kind::Output: {
                        PortId out = act.port;
                        if (out == PORT_IN_PORT) out = cur_port;
                        // Earlier actions in this rule may have rewritten
                        // addresses, so the tunnel check needs a fresh view.
                        ip = cur.eth_type == ETHTYPE_IPV4 ? parse_ipv4_view(cur.payload)
                                                          : Ipv4View{};

                        if (out == PORT_GTP) {
                            // Re-encapsulation: a frame sent back into the
                            // tunnel port is wrapped with the pending tunnel
                            // metadata and re-enters from the local stack.
                            if (++recirc > MAX_RECIRCULATIONS) {
                                result.drops.push_back({"re-circulation budget exceeded", cur});
                                return result;
                            }
                            if (!tun.active || !tun.tun_dst) {
                                result.drops.push_back(
                                    {"re-encapsulation without a tunnel destination", cur});
                                return result;
                            }
                            if (cur.eth_type != ETHTYPE_IPV4) {
                                result.drops.push_back({"re-encapsulation of non-IPv4 frame", cur});
                                return result;
                            }
                            auto mac = neighbor(*tun.tun_dst);
                            if (!mac) {
                                result.drops.push_back(
                                    {"no neighbor entry for tunnel destination " + tun.tun_dst->str(),
                                     cur});
                                return result;
                            }
                            GtpUserPacket p;
                            p.teid = tun.teid_out.value_or(tun.teid_in);
                            p.inner = std::move(cur.payload);
                            p.outer = {cfg_.local_ip, *tun.tun_dst, GTPU_PORT, GTPU_PORT};
                            cur = make_frame(cfg_.local_mac, *mac, gtpu_to_ipv4(p));
                            cur_port = PORT_LOCAL;
                            tun = TunnelMeta{};
                            result.used_gtp_port = true;
                            recirculated = true;
                        } else if (out == PORT_LOCAL && cfg_.gtp_enabled && is_gtpu_to_local(cur, ip)) {
                            // Decapsulation: GTP-U handed to the local stack
                            // re-enters through the virtual tunnel port.
                            if (++recirc > MAX_RECIRCULATIONS) {
                                result.drops.push_back({"re-circulation budget exceeded", cur});
                                return result;
                            }
                            auto decapped = decap(cur, ip, result);
                            if (!decapped) return result;
                            tun = TunnelMeta{true, decapped->first, {}, {}};
                            cur = std::move(decapped->second);
                            cur_port = PORT_GTP;
                            result.used_gtp_port = true;
                            recirculated = true;
                        } else if (out == PORT_LOCAL) {
                            if (cfg_.gtp_enabled) {
                                result.drops.push_back({"host stack discarded non-GTP packet", cur});
                            } else {
                                result.egress.emplace_back(PORT_LOCAL, cur);
                            }
                        } else if (out == PORT_CONTROLLER) {
                            result.packet_ins.push_back({cur_port, cur});
                        } else if (out == PORT_FLOOD) {
                            for (PortId p : cfg_.physical_ports)
                                if (p != cur_port) result.egress.emplace_back(p, cur);
                        } else {
                            result.egress.emplace_back(out, cur);
                        }
                        break;
                    }
                }
                if (recirculated) break;  // remaining actions apply to the consumed frame
            }

            if (recirculated) {
                table = TABLE_CLASSIFY;
                continue;
            }
            if (goto_table) {
                table = *goto_table;
                continue;
            }
            return result;
        }
    }

    /// Stable, diffable rule listing: tables in order, priority descending,
    /// install sequence ascending.
    std::string dump(const std::vector<int>& which = {0, 1, 2}) const {
        std::string out;
        for (int t : which) {
            std::vector<const FlowRule*> sorted;
            for (const auto& r : tables_[t].rules()) sorted.push_back(&r);
            std::sort(sorted.begin(), sorted.end(), [](const FlowRule* a, const FlowRule* b) {
                if (a->priority != b->priority) return a->priority > b->priority;
                return a->install_seq < b->install_seq;
            });
            for (const auto* r : sorted) {
                out += r->str();
                out += "\n";
            }
        }
        return out;
    }

private:
    bool is_gtpu_to_local(const EthernetFrame& f, const Ipv4View& ip) const {
        return f.eth_type == ETHTYPE_IPV4 && ip.valid && ip.dst == cfg_.local_ip && ip.has_udp &&
               ip.udp_dst == GTPU_PORT;
    }

    /// Strips outer IP/UDP/GTP headers; returns the TEID and the inner packet
    /// as a fresh frame entering through the GTP port.
    std::optional<std::pair<Teid, EthernetFrame>> decap(const EthernetFrame& f, const Ipv4View& ip,
                                                        PipelineResult& result) {
        try {
            Bytes udp_payload(f.payload.begin() + std::ptrdiff_t(ip.header_len) + 8, f.payload.end());
            TunnelEndpoints outer{ip.src, ip.dst, ip.udp_src, ip.udp_dst};
            GtpUserPacket p = decode_gtpu(udp_payload, outer);
            EthernetFrame inner;
            inner.eth_type = ETHTYPE_IPV4;
            inner.payload = std::move(p.inner);
            return std::make_pair(p.teid, std::move(inner));
        } catch (const CodecError& e) {
            result.drops.push_back({std::string("tunnel decode failed: ") + e.what(), f});
            return std::nullopt;
        }
    }

    void validate(const FlowRule& rule) const {
        if (rule.table_id >= PIPELINE_TABLES)
            throw FlowError("table " + std::to_string(rule.table_id) + " out of range");
        const MatchFields& m = rule.match;
        bool has_ipv4_fields = m.ipv4_src || m.ipv4_dst || m.ip_proto;
        if (has_ipv4_fields && (!m.eth_type || *m.eth_type != ETHTYPE_IPV4))
            throw FlowError("IPv4 match fields require eth_type=0x0800");
        if ((m.udp_src || m.udp_dst) && (!m.ip_proto || *m.ip_proto != IPPROTO_UDP_V))
            throw FlowError("UDP port match fields require ip_proto=17");
        for (const auto& a : rule.actions) {
            if (a.kind == Action::Kind::GotoTable) {
                if (a.table <= rule.table_id)
                    throw FlowError("GotoTable(" + std::to_string(a.table) + ") from table " +
                                    std::to_string(rule.table_id) + " would not advance");
                if (a.table >= PIPELINE_TABLES)
                    throw FlowError("GotoTable target out of range");
            }
        }
    }

    PipelineConfig cfg_;
    std::array<FlowTable, PIPELINE_TABLES> tables_;
    std::map<Ipv4Addr, MacAddr> neighbors_;
};

}  // namespace mecssc
