#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "controller.hpp"
#include "enb.hpp"
#include "event_queue.hpp"
#include "mme.hpp"
#include "pipeline.hpp"
#include "scenario.hpp"
#include "spgw.hpp"
#include "trace.hpp"

namespace mecssc {

inline constexpr std::uint16_t PROBE_DST_PORT = 7777;
inline constexpr std::uint16_t PROBE_SRC_PORT = 40000;

inline std::string subscriber_imsi(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "00101%010d", index);
    return buf;
}

struct ScenarioResult {
    std::string name;
    Trace trace;
    std::vector<ReplicationReport> reports;
    std::vector<std::string> rule_dumps;
    std::vector<std::string> failures;
    std::vector<std::string> controller_log;
    std::uint64_t events = 0;
    TimeUs end_time = 0;
};

/// The simulated fabric: every declared node, the links between them, one
/// event queue, and the controller wired underneath. Flow programming is
/// applied between events (treated as instantaneous); the configured
/// controller latency applies to the packet path, where it is observable.
class Network : public SouthboundApi {
  public:
    explicit Network(const Scenario& sc) : sc_(sc), rng_(sc.seed) {
        trace_.capture = sc_.capture;
        build_nodes();
        build_links();
        build_neighbors();
        build_controller();
    }

    ScenarioResult run() {
        for (const auto& c : sc_.commands)
            q_.schedule(c.at, SimEventKind::Command, [this, &c] { exec(c); });
        while (!q_.empty() && q_.next_time() <= sc_.horizon_us) {
            SimEvent ev = q_.pop();
            now_ = ev.time;
            ev.fn();
            ++events_;
        }
        ScenarioResult r;
        r.name = sc_.name;
        r.trace = std::move(trace_);
        r.reports = std::move(reports_);
        r.rule_dumps = std::move(dumps_);
        r.failures = std::move(failures_);
        r.controller_log = ctl_->log();
        r.events = events_;
        r.end_time = now_;
        return r;
    }

    // SouthboundApi
    void install_rule(const std::string& sw, const FlowRule& rule) override {
        pipeline(sw).install_rule(rule);
    }
    std::size_t remove_rules(const std::string& sw, std::uint64_t app_tag) override {
        return pipeline(sw).remove_by_tag(app_tag);
    }
    void packet_out(const std::string& sw, PortId port, const EthernetFrame& frame) override {
        int idx = node_index(sw);
        q_.schedule(now_ + sc_.constants.ctrl_one_way_us, SimEventKind::DeliverControl,
                    [this, idx, port, frame] {
                        char d[32];
                        std::snprintf(d, sizeof d, "port=%u", unsigned(port));
                        trace_.add(now_, TraceKind::PacketOut, nodes_[std::size_t(idx)].name, d, {},
                                   0, frame.encode());
                        send_frame(idx, int(port), frame);
                    });
    }

    Controller& controller() { return *ctl_; }
    FlowTablePipeline& pipeline(const std::string& name) {
        return *nodes_[std::size_t(node_index(name))].pipeline;
    }
    SpgwInstance& spgw(const std::string& name) {
        return *nodes_[std::size_t(node_index(name))].spgw;
    }
    EnbInstance& enb() { return *nodes_[std::size_t(enb_idx_)].enb; }
    MmeInstance& mme() { return *nodes_[std::size_t(mme_idx_)].mme; }
    const Trace& trace() const { return trace_; }
    TimeUs now() const { return now_; }

  private:
    enum class NodeKind { Switch, Mme, Spgw, Enb, Server };

    struct Node {
        int idx = 0;
        std::string name;
        NodeKind kind = NodeKind::Switch;
        std::optional<FlowTablePipeline> pipeline;
        std::optional<MmeInstance> mme;
        std::optional<SpgwInstance> spgw;
        std::optional<EnbInstance> enb;
        TimeUs busy_until = 0;                    // gateway control-plane core
        std::vector<Ipv4Addr> iface_ip;           // host interfaces only
        std::vector<MacAddr> iface_mac;
        std::map<std::uint32_t, MacAddr> neighbors;  // static, derived from topology
        std::vector<std::tuple<std::uint32_t, int, MacAddr>> routes;  // net, prefix, next hop
        std::string route_attr;
        int ports = 0;
    };

    struct Endpoint {
        int node = -1;
        int iface = 0;
        friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
    };

    struct Link {
        Endpoint a, b;
        TimeUs latency = 250;
        double bw = 1e9;
        TimeUs busy[2] = {0, 0};
        std::string dir_name[2];
    };

    static MacAddr derived_mac(int node, int iface) {
        return MacAddr{{0x02, 0x00, 0x00, 0x00, std::uint8_t(node), std::uint8_t(iface)}};
    }

    int node_index(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ScenarioError(0, "unknown node '" + name + "'");
        return it->second;
    }

    static Ipv4Addr attr_ip(const NodeDecl& d, const char* key, bool required = true) {
        auto it = d.attrs.find(key);
        if (it == d.attrs.end()) {
            if (required)
                throw ScenarioError(d.line, d.name + " needs " + key + "=<address>");
            return {};
        }
        return Ipv4Addr::parse(it->second);
    }

    void build_nodes() {
        for (const auto& d : sc_.nodes) {
            int idx = int(nodes_.size());
            nodes_.emplace_back();
            Node& n = nodes_.back();
            n.idx = idx;
            n.name = d.name;
            index_[d.name] = idx;
            if (d.kind == "switch") {
                n.kind = NodeKind::Switch;
                auto it = d.attrs.find("ports");
                if (it == d.attrs.end()) throw ScenarioError(d.line, d.name + " needs ports=<n>");
                n.ports = std::stoi(it->second);
                bool gtp = d.attrs.count("gtp") != 0;
                Ipv4Addr ip = attr_ip(d, "ip", gtp);  // a plain switch may stay addressless
                std::vector<PortId> ports;
                for (int p = 1; p <= n.ports; ++p) ports.push_back(PortId(p));
                n.pipeline.emplace(
                    PipelineConfig{d.name, ports, ip, derived_mac(idx, 0xfe), gtp});
                if (gtp) {
                    if (gtp_idx_ >= 0) throw ScenarioError(d.line, "more than one tunnel-aware switch");
                    gtp_idx_ = idx;
                } else {
                    if (pdn_idx_ >= 0) throw ScenarioError(d.line, "more than one packet-network switch");
                    pdn_idx_ = idx;
                }
            } else if (d.kind == "mme") {
                n.kind = NodeKind::Mme;
                if (mme_idx_ >= 0) throw ScenarioError(d.line, "more than one mobility manager");
                mme_idx_ = idx;
                n.ports = 2;
                Ipv4Addr ip = attr_ip(d, "ip");
                n.iface_ip = {ip};
                n.iface_mac = {derived_mac(idx, 0)};
                n.pipeline.emplace(
                    PipelineConfig{d.name, {1, 2}, ip, derived_mac(idx, 0), false});
                n.mme.emplace(MmeConfig{d.name, ip, 0x0100},
                              [this](const std::string& imsi, Teid sgw_teid, Ipv4Addr sgw_addr,
                                     Ipv4Addr ue_ip) {
                                  return nodes_[std::size_t(enb_idx_)].enb->setup_bearer(
                                      imsi, sgw_teid, sgw_addr, ue_ip);
                              });
            } else if (d.kind == "spgw") {
                n.kind = NodeKind::Spgw;
                spgw_order_.push_back(idx);
                SpgwConfig cfg;
                cfg.name = d.name;
                cfg.ctrl_ip = attr_ip(d, "ctrl");
                cfg.user_ip = attr_ip(d, "user");
                cfg.sgi_ip = attr_ip(d, "sgi");
                auto pool = d.attrs.find("pool");
                if (pool == d.attrs.end())
                    throw ScenarioError(d.line, d.name + " needs pool=<net>/<prefix>");
                auto slash = pool->second.find('/');
                if (slash == std::string::npos)
                    throw ScenarioError(d.line, "pool must be <net>/<prefix>");
                cfg.pool_network = Ipv4Addr::parse(pool->second.substr(0, slash));
                cfg.pool_prefix = std::stoi(pool->second.substr(slash + 1));
                n.spgw.emplace(cfg);
                n.iface_ip = {cfg.ctrl_ip, cfg.user_ip, cfg.sgi_ip};
                n.iface_mac = {derived_mac(idx, 0), derived_mac(idx, 1), derived_mac(idx, 2)};
            } else if (d.kind == "enb") {
                n.kind = NodeKind::Enb;
                if (enb_idx_ >= 0) throw ScenarioError(d.line, "more than one base station");
                enb_idx_ = idx;
                Ipv4Addr ip = attr_ip(d, "ip");
                n.enb.emplace(EnbConfig{d.name, ip, 0x2000});
                n.iface_ip = {ip};
                n.iface_mac = {derived_mac(idx, 0)};
            } else {
                n.kind = NodeKind::Server;
                if (srv_idx_ >= 0) throw ScenarioError(d.line, "more than one server");
                srv_idx_ = idx;
                Ipv4Addr ip = attr_ip(d, "ip");
                n.iface_ip = {ip};
                n.iface_mac = {derived_mac(idx, 0)};
                if (auto it = d.attrs.find("route"); it != d.attrs.end()) n.route_attr = it->second;
            }
        }
        if (gtp_idx_ < 0) throw ScenarioError(0, "topology needs a tunnel-aware switch");
        if (pdn_idx_ < 0) throw ScenarioError(0, "topology needs a packet-network switch");
        if (mme_idx_ < 0) throw ScenarioError(0, "topology needs a mobility manager");
        if (enb_idx_ < 0) throw ScenarioError(0, "topology needs a base station");
        if (srv_idx_ < 0) throw ScenarioError(0, "topology needs a server");
        if (spgw_order_.size() != 2)
            throw ScenarioError(0, "topology needs exactly two gateways, primary then replica");
    }

    int host_iface_index(const Node& n, const std::string& iface, int line) const {
        if (n.kind == NodeKind::Spgw) {
            if (iface == "ctrl") return 0;
            if (iface == "user") return 1;
            if (iface == "sgi") return 2;
        } else if (n.kind == NodeKind::Enb) {
            if (iface == "s1u") return 0;
        } else if (n.kind == NodeKind::Server) {
            if (iface == "eth") return 0;
        }
        throw ScenarioError(line, n.name + " has no interface '" + iface + "'");
    }

    void build_links() {
        for (const auto& d : sc_.links) {
            auto resolve = [&](const std::string& node, const std::string& iface) {
                auto it = index_.find(node);
                if (it == index_.end())
                    throw ScenarioError(d.line, "link references unknown node '" + node + "'");
                Node& n = nodes_[std::size_t(it->second)];
                if (n.kind == NodeKind::Switch || n.kind == NodeKind::Mme) {
                    int port = 0;
                    try {
                        port = std::stoi(iface);
                    } catch (const std::exception&) {
                        throw ScenarioError(d.line, "switch interface must be a port number");
                    }
                    if (port < 1 || port > n.ports)
                        throw ScenarioError(d.line, n.name + " has no port " + iface);
                    return Endpoint{n.idx, port};
                }
                return Endpoint{n.idx, host_iface_index(n, iface, d.line)};
            };
            Link l;
            l.a = resolve(d.a_node, d.a_iface);
            l.b = resolve(d.b_node, d.b_iface);
            l.latency = d.latency_us;
            l.bw = d.bandwidth_bps;
            l.dir_name[0] = d.a_node + ":" + d.a_iface + ">" + d.b_node + ":" + d.b_iface;
            l.dir_name[1] = d.b_node + ":" + d.b_iface + ">" + d.a_node + ":" + d.a_iface;
            int li = int(links_.size());
            if (!link_at_.emplace(l.a, std::make_pair(li, 0)).second)
                throw ScenarioError(d.line, d.a_node + ":" + d.a_iface + " is already linked");
            if (!link_at_.emplace(l.b, std::make_pair(li, 1)).second)
                throw ScenarioError(d.line, d.b_node + ":" + d.b_iface + " is already linked");
            links_.push_back(std::move(l));
        }
    }

    /// Seeds every host's neighbor table with the other interfaces on its
    /// switch segment (static entries, there is no address resolution on the
    /// wire), and teaches the tunnel-aware switch where tunnel endpoints live.
    void build_neighbors() {
        for (Node& sw : nodes_) {
            if (!sw.pipeline) continue;
            std::vector<std::pair<Ipv4Addr, MacAddr>> members;
            std::vector<int> host_nodes;
            for (int p = 1; p <= sw.ports; ++p) {
                auto it = link_at_.find(Endpoint{sw.idx, p});
                if (it == link_at_.end()) continue;
                const Link& l = links_[std::size_t(it->second.first)];
                Endpoint far = it->second.second == 0 ? l.b : l.a;
                Node& h = nodes_[std::size_t(far.node)];
                if (!h.iface_ip.empty() && far.iface < int(h.iface_ip.size())) {
                    members.emplace_back(h.iface_ip[std::size_t(far.iface)],
                                         h.iface_mac[std::size_t(far.iface)]);
                    host_nodes.push_back(far.node);
                }
            }
            if (sw.kind == NodeKind::Mme) {
                members.emplace_back(sw.iface_ip[0], sw.iface_mac[0]);
                host_nodes.push_back(sw.idx);
            } else if (!sw.pipeline->config().local_ip.is_zero()) {
                members.emplace_back(sw.pipeline->config().local_ip, sw.pipeline->config().local_mac);
            }
            for (int hn : host_nodes) {
                Node& h = nodes_[std::size_t(hn)];
                for (const auto& [ip, mac] : members) h.neighbors[ip.v] = mac;
            }
            if (sw.idx == gtp_idx_)
                for (const auto& [ip, mac] : members) sw.pipeline->set_neighbor(ip, mac);
        }
        Node& srv = nodes_[std::size_t(srv_idx_)];
        if (!srv.route_attr.empty()) {
            auto colon = srv.route_attr.rfind(':');
            auto slash = srv.route_attr.find('/');
            if (colon == std::string::npos || slash == std::string::npos || slash > colon)
                throw ScenarioError(0, "route must be <net>/<prefix>:<gateway-node>");
            Ipv4Addr net = Ipv4Addr::parse(srv.route_attr.substr(0, slash));
            int prefix = std::stoi(srv.route_attr.substr(slash + 1, colon - slash - 1));
            const std::string gw_name = srv.route_attr.substr(colon + 1);
            Node& gw = nodes_[std::size_t(node_index(gw_name))];
            MacAddr hop{};
            for (std::size_t i = 0; i < gw.iface_ip.size(); ++i)
                if (srv.neighbors.count(gw.iface_ip[i].v)) hop = gw.iface_mac[i];
            if (hop.is_zero())
                throw ScenarioError(0, "route gateway '" + gw_name + "' shares no segment with " + srv.name);
            srv.routes.emplace_back(net.v, prefix, hop);
        }
    }

    void build_controller() {
        Node& gtp = nodes_[std::size_t(gtp_idx_)];
        Node& mmen = nodes_[std::size_t(mme_idx_)];
        auto gateway = [&](int idx) {
            Node& g = nodes_[std::size_t(idx)];
            auto it = link_at_.find(Endpoint{g.idx, 0});
            if (it == link_at_.end())
                throw ScenarioError(0, g.name + " has no signalling link");
            const Link& l = links_[std::size_t(it->second.first)];
            Endpoint far = it->second.second == 0 ? l.b : l.a;
            if (far.node != mme_idx_)
                throw ScenarioError(0, g.name + " signalling must terminate at the mobility manager");
            return GatewayEndpoints{g.name,          g.iface_ip[0], g.iface_mac[0],
                                    PortId(far.iface), g.iface_ip[1], g.iface_ip[2],
                                    g.iface_mac[2]};
        };
        ControllerTopology topo;
        topo.gtp_switch = gtp.name;
        topo.pdn_switch = nodes_[std::size_t(pdn_idx_)].name;
        topo.mme_switch = mmen.name;
        topo.mme_ip = mmen.iface_ip[0];
        topo.mme_mac = mmen.iface_mac[0];
        topo.gtp_switch_ip = gtp.pipeline->config().local_ip;
        topo.gtp_switch_mac = gtp.pipeline->config().local_mac;
        topo.enb_ip = nodes_[std::size_t(enb_idx_)].iface_ip[0];
        topo.primary = gateway(spgw_order_[0]);
        topo.replica = gateway(spgw_order_[1]);
        ctl_.emplace(topo, *this, sc_.intercept, sc_.strategy);
        ctl_->bootstrap(0);
    }

    TimeUs jitter() {
        if (sc_.constants.jitter_us <= 0) return 0;
        return TimeUs(rng_() % std::uint64_t(sc_.constants.jitter_us));
    }

    static TimeUs serialization_us(std::size_t wire_bytes, double bw_bps) {
        return TimeUs(std::ceil(double(wire_bytes) * 8.0 / bw_bps * 1e6));
    }

    void send_frame(int node, int iface, const EthernetFrame& f, TimeUs extra = 0) {
        if (extra > 0) {
            q_.schedule(now_ + extra, SimEventKind::Timer,
                        [this, node, iface, f] { send_frame(node, iface, f); });
            return;
        }
        auto it = link_at_.find(Endpoint{node, iface});
        if (it == link_at_.end()) {
            drop(nodes_[std::size_t(node)].name, "no link on interface", f);
            return;
        }
        Link& l = links_[std::size_t(it->second.first)];
        int dir = it->second.second;
        TimeUs ser = serialization_us(f.wire_size(), l.bw);
        TimeUs depart = std::max(now_, l.busy[dir]);
        l.busy[dir] = depart + ser;
        TimeUs arrive = depart + ser + l.latency + jitter();
        trace_.add(depart, TraceKind::Send, nodes_[std::size_t(node)].name, l.dir_name[dir], {},
                   0, f.encode());
        Endpoint dst = dir == 0 ? l.b : l.a;
        std::string dname = l.dir_name[dir];
        q_.schedule(arrive, SimEventKind::DeliverFrame, [this, dst, f, dname = std::move(dname)] {
            trace_.add(now_, TraceKind::Deliver, nodes_[std::size_t(dst.node)].name, dname);
            deliver(dst, f);
        });
    }

    void drop(const std::string& node, const std::string& reason, const EthernetFrame& f) {
        trace_.add(now_, TraceKind::Drop, node, "reason=\"" + reason + "\"", {}, 0, f.encode());
    }

    void deliver(Endpoint ep, const EthernetFrame& f) {
        Node& n = nodes_[std::size_t(ep.node)];
        switch (n.kind) {
            case NodeKind::Switch:
            case NodeKind::Mme: pipeline_rx(n, PortId(ep.iface), f); break;
            case NodeKind::Spgw:
                if (ep.iface == 0) spgw_ctrl_rx(n, f);
                else if (ep.iface == 1) spgw_user_rx(n, f);
                else spgw_sgi_rx(n, f);
                break;
            case NodeKind::Enb: enb_rx(n, f); break;
            case NodeKind::Server: server_rx(n, f); break;
        }
    }

    void pipeline_rx(Node& n, PortId port, const EthernetFrame& f) {
        auto res = n.pipeline->process_frame(port, f);
        TimeUs extra = res.used_gtp_port ? sc_.constants.gtp_proc_us : 0;
        for (auto& [out_port, of] : res.egress) {
            if (out_port == PORT_LOCAL) {
                if (n.kind == NodeKind::Mme) mme_host_rx(n, of);
                else drop(n.name, "no host behind the local port", of);
            } else {
                send_frame(n.idx, int(out_port), of, extra);
            }
        }
        for (auto& pi : res.packet_ins) {
            char d[32];
            std::snprintf(d, sizeof d, "in_port=%u", unsigned(pi.in_port));
            trace_.add(now_, TraceKind::PacketIn, n.name, d, {}, 0, pi.frame.encode());
            q_.schedule(now_ + sc_.constants.ctrl_one_way_us, SimEventKind::DeliverControl,
                        [this, name = n.name, pi] { ctl_->packet_in(now_, name, pi.in_port, pi.frame); });
        }
        for (auto& dr : res.drops) drop(n.name, dr.reason, f);
    }

    bool addressed_to(const Node& n, std::size_t iface, const EthernetFrame& f) {
        if (f.dst == n.iface_mac[iface] || f.dst.is_broadcast()) return true;
        drop(n.name, "not addressed to this interface", f);
        return false;
    }

    void mme_host_rx(Node& n, const EthernetFrame& f) {
        GtpControlMessage rsp;
        try {
            Ipv4Packet ip = Ipv4Packet::decode(f.payload);
            UdpDatagram udp = UdpDatagram::decode(ip.payload);
            rsp = decode_gtpc(udp.payload, ip.src, ip.dst);
        } catch (const CodecError& e) {
            drop(n.name, std::string("undecodable signalling at manager: ") + e.what(), f);
            return;
        }
        trace_.add(now_, TraceKind::CtrlDeliver, n.name, gtpc_kind_name(rsp.kind), {}, rsp.seq);
        if (auto next = n.mme->handle_control(rsp)) mme_emit(n, *next);
    }

    void mme_emit(Node& n, const GtpControlMessage& msg) {
        auto nbr = n.neighbors.find(msg.dst_ip.v);
        Bytes pkt = make_udp_ipv4(msg.src_ip, msg.dst_ip, GTPC_PORT, GTPC_PORT, encode_gtpc(msg));
        EthernetFrame f = make_frame(n.iface_mac[0],
                                     nbr == n.neighbors.end() ? MacAddr{} : nbr->second,
                                     std::move(pkt));
        if (nbr == n.neighbors.end()) {
            drop(n.name, "no signalling neighbor for " + msg.dst_ip.str(), f);
            return;
        }
        trace_.add(now_, TraceKind::CtrlSend, n.name, gtpc_kind_name(msg.kind), {}, msg.seq);
        pipeline_rx(n, PORT_LOCAL, f);
    }

    void spgw_ctrl_rx(Node& n, const EthernetFrame& f) {
        if (!addressed_to(n, 0, f)) return;
        GtpControlMessage req;
        try {
            Ipv4Packet ip = Ipv4Packet::decode(f.payload);
            UdpDatagram udp = UdpDatagram::decode(ip.payload);
            if (ip.dst != n.iface_ip[0] || udp.dst_port != GTPC_PORT) {
                drop(n.name, "not signalling for this gateway", f);
                return;
            }
            req = decode_gtpc(udp.payload, ip.src, ip.dst);
        } catch (const CodecError& e) {
            drop(n.name, std::string("undecodable signalling at gateway: ") + e.what(), f);
            return;
        }
        if (!req.is_request()) {
            drop(n.name, "response delivered to a gateway", f);
            return;
        }
        TimeUs proc = req.kind == GtpcKind::CreateSessionRequest ? sc_.constants.csr_proc_us
                                                                 : sc_.constants.mbr_proc_us;
        TimeUs done = std::max(now_, n.busy_until) + proc;
        n.busy_until = done;
        int idx = n.idx;
        q_.schedule(done, SimEventKind::Timer, [this, idx, req] {
            Node& g = nodes_[std::size_t(idx)];
            GtpControlMessage rsp = g.spgw->handle_control(req);
            Bytes pkt = make_udp_ipv4(g.iface_ip[0], req.src_ip, GTPC_PORT, GTPC_PORT,
                                      encode_gtpc(rsp));
            auto nbr = g.neighbors.find(req.src_ip.v);
            EthernetFrame out = make_frame(g.iface_mac[0],
                                           nbr == g.neighbors.end() ? MacAddr{} : nbr->second,
                                           std::move(pkt));
            if (nbr == g.neighbors.end()) {
                drop(g.name, "no signalling neighbor for " + req.src_ip.str(), out);
                return;
            }
            send_frame(g.idx, 0, out);
        });
    }

    void spgw_user_rx(Node& n, const EthernetFrame& f) {
        if (!addressed_to(n, 1, f)) return;
        GtpUserPacket pkt;
        try {
            Ipv4Packet ip = Ipv4Packet::decode(f.payload);
            UdpDatagram udp = UdpDatagram::decode(ip.payload);
            pkt = decode_gtpu(udp.payload, TunnelEndpoints{ip.src, ip.dst, udp.src_port, udp.dst_port});
        } catch (const CodecError& e) {
            drop(n.name, std::string("undecodable tunnel packet: ") + e.what(), f);
            return;
        }
        auto res = n.spgw->handle_uplink(pkt);
        if (!res.ok) {
            drop(n.name, res.diag, f);
            return;
        }
        Ipv4View inner = parse_ipv4_view(res.inner);
        auto nbr = n.neighbors.find(inner.dst.v);
        if (nbr == n.neighbors.end()) {
            drop(n.name, "no packet-network neighbor for " + inner.dst.str(), f);
            return;
        }
        send_frame(n.idx, 2, make_frame(n.iface_mac[2], nbr->second, res.inner));
    }

    void spgw_sgi_rx(Node& n, const EthernetFrame& f) {
        if (!addressed_to(n, 2, f)) return;
        auto res = n.spgw->make_downlink(f.payload);
        if (!res.ok) {
            drop(n.name, res.diag, f);
            return;
        }
        auto nbr = n.neighbors.find(res.pkt.outer.dst.v);
        if (nbr == n.neighbors.end()) {
            drop(n.name, "no tunnel neighbor for " + res.pkt.outer.dst.str(), f);
            return;
        }
        send_frame(n.idx, 1, make_frame(n.iface_mac[1], nbr->second, gtpu_to_ipv4(res.pkt)));
    }

    /// Probe payloads carry their own identity so delivery accounting
    /// survives any address rewriting on the path.
    static Bytes probe_payload(int ue_index, int k) {
        Bytes b{'P', 'R'};
        for (int shift = 24; shift >= 0; shift -= 8) b.push_back(std::uint8_t(ue_index >> shift));
        for (int shift = 24; shift >= 0; shift -= 8) b.push_back(std::uint8_t(k >> shift));
        return b;
    }

    static std::uint64_t probe_id(const Bytes& udp_payload) {
        if (udp_payload.size() < 10 || udp_payload[0] != 'P' || udp_payload[1] != 'R') return 0;
        std::uint64_t v = 0;
        for (int i = 2; i < 10; ++i) v = (v << 8) | udp_payload[std::size_t(i)];
        return v;
    }

    static std::uint64_t inner_probe_id(const Bytes& inner_packet) {
        Ipv4View v = parse_ipv4_view(inner_packet);
        if (!v.valid || !v.has_udp) return 0;
        return probe_id(Bytes(inner_packet.begin() + std::ptrdiff_t(v.header_len) + 8,
                              inner_packet.end()));
    }

    void enb_rx(Node& n, const EthernetFrame& f) {
        if (!addressed_to(n, 0, f)) return;
        GtpUserPacket pkt;
        try {
            Ipv4Packet ip = Ipv4Packet::decode(f.payload);
            UdpDatagram udp = UdpDatagram::decode(ip.payload);
            pkt = decode_gtpu(udp.payload, TunnelEndpoints{ip.src, ip.dst, udp.src_port, udp.dst_port});
        } catch (const CodecError& e) {
            drop(n.name, std::string("undecodable tunnel packet: ") + e.what(), f);
            return;
        }
        auto res = n.enb->downlink(pkt);
        if (!res.ok) {
            drop(n.name, res.diag, f);
            return;
        }
        trace_.add(now_, TraceKind::AppDeliver, n.name, "", res.ue_ip, inner_probe_id(res.inner));
    }

    void server_rx(Node& n, const EthernetFrame& f) {
        if (!addressed_to(n, 0, f)) return;
        Ipv4Packet ip;
        UdpDatagram udp;
        try {
            ip = Ipv4Packet::decode(f.payload);
            if (ip.dst != n.iface_ip[0]) {
                drop(n.name, "not addressed to this host", f);
                return;
            }
            if (ip.proto != IPPROTO_UDP_V) {
                drop(n.name, "no listener for protocol", f);
                return;
            }
            udp = UdpDatagram::decode(ip.payload);
        } catch (const CodecError& e) {
            drop(n.name, std::string("undecodable packet at server: ") + e.what(), f);
            return;
        }
        trace_.add(now_, TraceKind::AppDeliver, n.name, "", ip.src, probe_id(udp.payload));
        if (udp.dst_port != PROBE_DST_PORT) return;
        Bytes reply = make_udp_ipv4(n.iface_ip[0], ip.src, udp.dst_port, udp.src_port, udp.payload);
        MacAddr hop{};
        if (auto nbr = n.neighbors.find(ip.src.v); nbr != n.neighbors.end()) {
            hop = nbr->second;
        } else {
            int best = -1;
            for (const auto& [net, prefix, mac] : n.routes) {
                std::uint32_t mask = prefix == 0 ? 0 : ~std::uint32_t(0) << (32 - prefix);
                if ((ip.src.v & mask) == net && prefix > best) {
                    best = prefix;
                    hop = mac;
                }
            }
        }
        EthernetFrame out = make_frame(n.iface_mac[0], hop, std::move(reply));
        if (hop.is_zero()) {
            drop(n.name, "no route back to " + ip.src.str(), out);
            return;
        }
        send_frame(n.idx, 0, out);
    }

    void fire_probe(int ue_index, int k) {
        Node& n = nodes_[std::size_t(enb_idx_)];
        const EnbBearer* b = n.enb->bearer_by_imsi(subscriber_imsi(ue_index));
        if (!b) {
            trace_.add(now_, TraceKind::Drop, n.name, "reason=\"probe for unknown subscriber\"");
            return;
        }
        Bytes inner = make_udp_ipv4(b->ue_ip, nodes_[std::size_t(srv_idx_)].iface_ip[0],
                                    PROBE_SRC_PORT, PROBE_DST_PORT, probe_payload(ue_index, k));
        trace_.add(now_, TraceKind::AppSend, n.name, "", b->ue_ip,
                   (std::uint64_t(std::uint32_t(ue_index)) << 32) | std::uint32_t(k));
        auto up = n.enb->uplink(inner);
        if (!up.ok) {
            trace_.add(now_, TraceKind::Drop, n.name, "reason=\"" + up.diag + "\"");
            return;
        }
        auto nbr = n.neighbors.find(up.pkt.outer.dst.v);
        if (nbr == n.neighbors.end()) {
            trace_.add(now_, TraceKind::Drop, n.name, "reason=\"no tunnel neighbor\"");
            return;
        }
        send_frame(n.idx, 0, make_frame(n.iface_mac[0], nbr->second, gtpu_to_ipv4(up.pkt)));
    }

    void fail(const ScenarioCommand& c, const std::string& why) {
        failures_.push_back("line " + std::to_string(c.line) + ": " + c.text + ": " + why);
    }

    void exec(const ScenarioCommand& c) {
        trace_.add(now_, TraceKind::Command, "script", c.text);
        using K = ScenarioCommand::Kind;
        int ue_index = c.ue.empty() ? 0 : std::stoi(c.ue.substr(2));
        std::string imsi = c.ue.empty() ? std::string() : subscriber_imsi(ue_index);
        Node& mmen = nodes_[std::size_t(mme_idx_)];
        switch (c.kind) {
            case K::Attach:
                mme_emit(mmen, mmen.mme->start_attach(
                                   imsi, nodes_[std::size_t(spgw_order_[0])].iface_ip[0]));
                break;
            case K::Detach: ctl_->detach(now_, imsi); break;
            case K::Deploy: ctl_->deploy_replica(now_); break;
            case K::Divert: {
                const AttachContext* ctx = mmen.mme->attach(imsi);
                if (!ctx || ctx->ue_ip.is_zero()) {
                    fail(c, "attach incomplete");
                    break;
                }
                if (!ctl_->divert_session(now_, imsi, ctx->ue_ip)) fail(c, "refused");
                break;
            }
            case K::UndoDivert:
                if (!ctl_->undo_divert(now_, imsi)) fail(c, "nothing to undo");
                break;
            case K::Probe:
                for (int k = 0; k < c.count; ++k)
                    q_.schedule(now_ + TimeUs(k) * c.period_us, SimEventKind::Timer,
                                [this, ue_index, k] { fire_probe(ue_index, k); });
                break;
            case K::Report: reports_.push_back(ctl_->report()); break;
            case K::Dump:
                dumps_.push_back(pipeline(c.dump_switch).dump(c.dump_tables));
                break;
            case K::Expect: check_expect(c, ue_index, imsi); break;
        }
    }

    void check_expect(const ScenarioCommand& c, int ue_index, const std::string& imsi) {
        double actual = 0;
        if (c.metric == "gap" || c.metric == "rtt" || c.metric == "lost" ||
            c.metric == "delivered") {
            const AttachContext* ctx = nodes_[std::size_t(mme_idx_)].mme->attach(imsi);
            if (!ctx || ctx->ue_ip.is_zero()) {
                fail(c, "unknown subscriber");
                return;
            }
            Ipv4Addr ue = ctx->ue_ip;
            if (c.metric == "gap") {
                actual = double(measure_gap(trace_, ue));
            } else if (c.metric == "rtt") {
                auto rtts = measure_rtt(trace_, ue);
                for (TimeUs r : rtts) actual = std::max(actual, double(r));
            } else if (c.metric == "lost") {
                actual = double(app_sent(trace_, ue)) - double(app_delivered(trace_, ue));
            } else {
                actual = double(app_delivered(trace_, ue));
            }
            (void)ue_index;
        } else {
            ReplicationReport r = ctl_->report();
            if (c.metric == "downtime") actual = r.downtime_ms * 1000.0;
            else if (c.metric == "elapsed") actual = r.elapsed_ms * 1000.0;
            else if (c.metric == "stored") actual = double(r.stored_bytes);
            else actual = double(r.transmitted_bytes);
        }
        bool ok = c.op == "==" ? actual == c.value
                  : c.op == "!=" ? actual != c.value
                  : c.op == "<=" ? actual <= c.value
                  : c.op == ">=" ? actual >= c.value
                  : c.op == "<"  ? actual < c.value
                                 : actual > c.value;
        if (!ok) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "actual %.3f, limit %.3f", actual, c.value);
            fail(c, buf);
        }
    }

    Scenario sc_;
    std::mt19937 rng_;
    EventQueue q_;
    Trace trace_;
    TimeUs now_ = 0;
    std::uint64_t events_ = 0;

    std::deque<Node> nodes_;
    std::map<std::string, int> index_;
    std::vector<Link> links_;
    std::map<Endpoint, std::pair<int, int>> link_at_;  // endpoint -> (link, direction)
    int gtp_idx_ = -1, pdn_idx_ = -1, mme_idx_ = -1, enb_idx_ = -1, srv_idx_ = -1;
    std::vector<int> spgw_order_;
    std::optional<Controller> ctl_;

    std::vector<ReplicationReport> reports_;
    std::vector<std::string> dumps_;
    std::vector<std::string> failures_;
};

inline ScenarioResult run_scenario(const Scenario& sc) {
    Network net(sc);
    return net.run();
}

}  // namespace mecssc
