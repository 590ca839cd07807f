#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "mecssc/pipeline.hpp"
#include "test_util.hpp"

using namespace mecssc;

namespace {

MacAddr mac(std::uint8_t node, std::uint8_t iface) {
    return MacAddr{{0x02, 0x00, 0x00, 0x00, node, iface}};
}

const Ipv4Addr OVS_IP = Ipv4Addr::parse("10.0.2.2");
const Ipv4Addr ENB_IP = Ipv4Addr::parse("10.0.2.10");
const Ipv4Addr SPGW1_IP = Ipv4Addr::parse("10.0.2.1");
const Ipv4Addr SPGW2_IP = Ipv4Addr::parse("10.0.2.3");
const Ipv4Addr UE1_IP = Ipv4Addr::parse("10.8.0.1");
const Ipv4Addr UE2_IP = Ipv4Addr::parse("10.8.0.2");
const Ipv4Addr SRV_IP = Ipv4Addr::parse("10.0.5.7");

const MacAddr OVS_MAC = mac(0, 0xfe);
const MacAddr SPGW1_MAC = mac(3, 0);
const MacAddr SPGW2_MAC = mac(4, 0);
const MacAddr ENB_MAC = mac(5, 0);

constexpr PortId PORT_ENB = 1;
constexpr PortId PORT_SPGW1 = 2;
constexpr PortId PORT_SPGW2 = 3;

FlowTablePipeline make_switch(bool gtp = true) {
    PipelineConfig cfg;
    cfg.name = "sw";
    cfg.physical_ports = {PORT_ENB, PORT_SPGW1, PORT_SPGW2};
    cfg.local_ip = OVS_IP;
    cfg.local_mac = OVS_MAC;
    cfg.gtp_enabled = gtp;
    FlowTablePipeline sw(cfg);
    sw.set_neighbor(ENB_IP, ENB_MAC);
    sw.set_neighbor(SPGW1_IP, SPGW1_MAC);
    sw.set_neighbor(SPGW2_IP, SPGW2_MAC);
    return sw;
}

FlowRule rule(std::uint8_t table, std::uint16_t prio, MatchFields m, std::vector<Action> a) {
    FlowRule r;
    r.table_id = table;
    r.priority = prio;
    r.match = std::move(m);
    r.actions = std::move(a);
    return r;
}

void install_default_forwarding(FlowTablePipeline& sw) {
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::goto_table(2)}));
    sw.install_rule(rule(2, PRIO_LOW, {},
                         {Action::output(PORT_CONTROLLER), Action::output(PORT_FLOOD)}));
}

void learn(FlowTablePipeline& sw, MacAddr src, MacAddr dst, PortId port) {
    MatchFields m;
    m.eth_src = src;
    m.eth_dst = dst;
    sw.install_rule(rule(2, PRIO_MEDIUM, m, {Action::output(port)}));
}

// The session-diverting rule set steering UE1's bearer to the replica
// gateway, in its canonical installation order. Between the classification
// default and these five rules, install sequences land at fixed values, which
// is what makes the rule listing reproducible.
void install_divert_policy(FlowTablePipeline& sw) {
    MatchFields from_ovs;  // re-encapsulated tunnel traffic leaving the local stack
    from_ovs.eth_type = ETHTYPE_IPV4;
    from_ovs.ipv4_src = OVS_IP;
    from_ovs.ip_proto = IPPROTO_UDP_V;
    from_ovs.udp_dst = GTPU_PORT;
    sw.install_rule(rule(0, PRIO_MEDIUM, from_ovs,
                         {Action::set_ip_src(ENB_IP), Action::goto_table(2)}));

    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));

    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(SPGW1_IP), Action::output(PORT_IN_PORT)}));

    MatchFields diverted_ue;
    diverted_ue.eth_type = ETHTYPE_IPV4;
    diverted_ue.ipv4_src = UE1_IP;
    sw.install_rule(rule(1, PRIO_HIGH, diverted_ue,
                         {Action::set_tunnel_dst(SPGW2_IP), Action::output(PORT_IN_PORT)}));

    MatchFields uplink;
    uplink.eth_type = ETHTYPE_IPV4;
    uplink.ipv4_src = ENB_IP;
    uplink.ipv4_dst = SPGW1_IP;
    uplink.ip_proto = IPPROTO_UDP_V;
    uplink.udp_dst = GTPU_PORT;
    sw.install_rule(rule(0, PRIO_MEDIUM, uplink,
                         {Action::set_ip_dst(OVS_IP), Action::set_eth_dst(OVS_MAC),
                          Action::output(PORT_LOCAL)}));
}

Bytes inner_packet(Ipv4Addr src, Ipv4Addr dst, Bytes payload = {0xde, 0xad}) {
    return make_udp_ipv4(src, dst, 40000, 5000, std::move(payload));
}

EthernetFrame tunnel_frame(MacAddr esrc, MacAddr edst, Ipv4Addr osrc, Ipv4Addr odst, Teid teid,
                           Bytes inner) {
    GtpUserPacket p;
    p.teid = teid;
    p.inner = std::move(inner);
    p.outer = {osrc, odst, GTPU_PORT, GTPU_PORT};
    return make_frame(esrc, edst, gtpu_to_ipv4(p));
}

struct DecodedTunnel {
    Ipv4Addr outer_src;
    Ipv4Addr outer_dst;
    Teid teid = 0;
    Bytes inner;
};

DecodedTunnel decode_tunnel(const EthernetFrame& f) {
    Ipv4Packet outer = Ipv4Packet::decode(f.payload);
    UdpDatagram udp = UdpDatagram::decode(outer.payload);
    GtpUserPacket p = decode_gtpu(udp.payload, {outer.src, outer.dst, udp.src_port, udp.dst_port});
    return {outer.src, outer.dst, p.teid, p.inner};
}

}  // namespace

TEST_CASE("install rejects inconsistent matches", "[flow]") {
    auto sw = make_switch();

    MatchFields udp_only;
    udp_only.udp_dst = GTPU_PORT;
    REQUIRE_THROWS_AS(sw.install_rule(rule(0, PRIO_LOW, udp_only, {Action::goto_table(2)})),
                      FlowError);

    MatchFields udp_wrong_proto;
    udp_wrong_proto.eth_type = ETHTYPE_IPV4;
    udp_wrong_proto.ip_proto = 6;
    udp_wrong_proto.udp_dst = GTPU_PORT;
    REQUIRE_THROWS_AS(sw.install_rule(rule(0, PRIO_LOW, udp_wrong_proto, {Action::goto_table(2)})),
                      FlowError);

    MatchFields ip_no_eth;
    ip_no_eth.ipv4_src = UE1_IP;
    REQUIRE_THROWS_AS(sw.install_rule(rule(0, PRIO_LOW, ip_no_eth, {Action::goto_table(2)})),
                      FlowError);

    MatchFields proto_no_eth;
    proto_no_eth.ip_proto = IPPROTO_UDP_V;
    REQUIRE_THROWS_AS(sw.install_rule(rule(0, PRIO_LOW, proto_no_eth, {Action::goto_table(2)})),
                      FlowError);

    FlowRule bad_table = rule(0, PRIO_LOW, {}, {Action::goto_table(2)});
    bad_table.table_id = 3;
    REQUIRE_THROWS_AS(sw.install_rule(bad_table), FlowError);
}

TEST_CASE("goto-table must advance through the pipeline", "[flow]") {
    auto sw = make_switch();
    REQUIRE_THROWS_AS(sw.install_rule(rule(1, PRIO_LOW, {}, {Action::goto_table(0)})), FlowError);
    REQUIRE_THROWS_AS(sw.install_rule(rule(1, PRIO_LOW, {}, {Action::goto_table(1)})), FlowError);
    REQUIRE_THROWS_AS(sw.install_rule(rule(2, PRIO_LOW, {}, {Action::goto_table(3)})), FlowError);
    REQUIRE_NOTHROW(sw.install_rule(rule(0, PRIO_LOW, {}, {Action::goto_table(2)})));
    REQUIRE_NOTHROW(sw.install_rule(rule(1, PRIO_HIGH, {}, {Action::goto_table(2)})));
}

TEST_CASE("reinstalling a rule replaces it and resets its counters", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    learn(sw, ENB_MAC, SPGW1_MAC, PORT_SPGW1);

    EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
    sw.process_frame(PORT_ENB, f);
    sw.process_frame(PORT_ENB, f);

    MatchFields m;
    m.eth_src = ENB_MAC;
    m.eth_dst = SPGW1_MAC;
    const auto& rules = sw.table(2).rules();
    auto it = std::find_if(rules.begin(), rules.end(),
                           [&](const FlowRule& r) { return r.match == m; });
    REQUIRE(it != rules.end());
    CHECK(it->packets == 2);
    CHECK(it->bytes == 2 * f.wire_size());
    std::uint64_t old_seq = it->install_seq;

    // Same (priority, match): replacement, not accumulation.
    learn(sw, ENB_MAC, SPGW1_MAC, PORT_SPGW2);
    REQUIRE(sw.table(2).rules().size() == rules.size());
    it = std::find_if(rules.begin(), rules.end(), [&](const FlowRule& r) { return r.match == m; });
    CHECK(it->packets == 0);
    CHECK(it->bytes == 0);
    CHECK(it->install_seq > old_seq);
    CHECK(it->actions == std::vector<Action>{Action::output(PORT_SPGW2)});
}

TEST_CASE("lookup prefers priority, then earliest install", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);

    MatchFields any_udp;
    any_udp.eth_type = ETHTYPE_IPV4;
    any_udp.ip_proto = IPPROTO_UDP_V;

    SECTION("higher priority wins regardless of install order") {
        sw.install_rule(rule(2, PRIO_HIGH, any_udp, {Action::output(PORT_SPGW2)}));
        learn(sw, ENB_MAC, SPGW1_MAC, PORT_SPGW1);  // PRIO_MEDIUM, installed later
        EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
        auto res = sw.process_frame(PORT_ENB, f);
        REQUIRE(res.egress.size() == 1);
        CHECK(res.egress[0].first == PORT_SPGW2);
    }

    SECTION("equal priority: first installed wins, removal exposes the second") {
        MatchFields to_spgw1;
        to_spgw1.eth_type = ETHTYPE_IPV4;
        to_spgw1.ipv4_dst = SPGW1_IP;
        sw.install_rule(rule(2, PRIO_HIGH, to_spgw1, {Action::output(PORT_SPGW1)}));
        sw.install_rule(rule(2, PRIO_HIGH, any_udp, {Action::output(PORT_SPGW2)}));

        EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
        auto res = sw.process_frame(PORT_ENB, f);
        REQUIRE(res.egress.size() == 1);
        CHECK(res.egress[0].first == PORT_SPGW1);

        REQUIRE(sw.remove_rule(2, PRIO_HIGH, to_spgw1));
        res = sw.process_frame(PORT_ENB, f);
        REQUIRE(res.egress.size() == 1);
        CHECK(res.egress[0].first == PORT_SPGW2);
    }
}

TEST_CASE("rules are removable by owner tag", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);

    FlowRule a = rule(0, PRIO_HIGH, {}, {Action::goto_table(2)});
    a.match.in_port = PORT_GTP;
    a.app_tag = 42;
    FlowRule b = rule(1, PRIO_LOW, {}, {Action::set_tunnel_dst(SPGW1_IP), Action::output(PORT_IN_PORT)});
    b.app_tag = 42;
    sw.install_rule(a);
    sw.install_rule(b);
    REQUIRE(sw.table(0).rules().size() == 2);
    REQUIRE(sw.table(1).rules().size() == 1);

    CHECK(sw.remove_by_tag(42) == 2);
    CHECK(sw.table(0).rules().size() == 1);
    CHECK(sw.table(1).rules().empty());
    CHECK(sw.remove_by_tag(42) == 0);
}

TEST_CASE("rule listing renders tables in canonical order", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    install_divert_policy(sw);

    const std::string expected =
        "table=0 prio=300 seq=2 match{in_port=GTP} actions[GOTO_TABLE(1)]\n"
        "table=0 prio=200 seq=1 match{eth_type=0x0800,ipv4_src=10.0.2.2,ip_proto=17,udp_dst=2152}"
        " actions[SET_IP_SRC=10.0.2.10,GOTO_TABLE(2)]\n"
        "table=0 prio=200 seq=3 match{eth_type=0x0800,ipv4_src=10.0.2.10,ipv4_dst=10.0.2.1,"
        "ip_proto=17,udp_dst=2152}"
        " actions[SET_IP_DST=10.0.2.2,SET_ETH_DST=02:00:00:00:00:fe,OUTPUT=LOCAL]\n"
        "table=0 prio=100 seq=0 match{} actions[GOTO_TABLE(2)]\n"
        "table=1 prio=300 seq=1 match{eth_type=0x0800,ipv4_src=10.8.0.1}"
        " actions[SET_TUN_DST=10.0.2.3,OUTPUT=IN_PORT]\n"
        "table=1 prio=100 seq=0 match{} actions[SET_TUN_DST=10.0.2.1,OUTPUT=IN_PORT]\n";
    CHECK(sw.dump({0, 1}) == expected);
}

TEST_CASE("uplink of a diverted session reaches the replica gateway", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    install_divert_policy(sw);

    Bytes inner = inner_packet(UE1_IP, SRV_IP, {1, 2, 3, 4, 5});
    EthernetFrame up = tunnel_frame(ENB_MAC, SPGW1_MAC, ENB_IP, SPGW1_IP, 0x1000, inner);

    SECTION("with a learned forwarding entry") {
        learn(sw, OVS_MAC, SPGW2_MAC, PORT_SPGW2);
        auto res = sw.process_frame(PORT_ENB, up);
        REQUIRE(res.drops.empty());
        REQUIRE(res.packet_ins.empty());
        REQUIRE(res.egress.size() == 1);
        CHECK(res.egress[0].first == PORT_SPGW2);
        CHECK(res.used_gtp_port);

        const EthernetFrame& out = res.egress[0].second;
        CHECK(out.src == OVS_MAC);
        CHECK(out.dst == SPGW2_MAC);
        DecodedTunnel t = decode_tunnel(out);
        CHECK(t.outer_src == ENB_IP);  // replica sees the base station as sender
        CHECK(t.outer_dst == SPGW2_IP);
        CHECK(t.teid == 0x1000);       // bearer id carried over unchanged
        CHECK(t.inner == inner);       // user payload untouched
    }

    SECTION("without one, the frame floods and the controller hears about it") {
        auto res = sw.process_frame(PORT_ENB, up);
        REQUIRE(res.drops.empty());
        REQUIRE(res.packet_ins.size() == 1);
        // Re-encapsulated traffic enters from the local stack, so every
        // physical port is eligible for the flood.
        REQUIRE(res.egress.size() == 3);
        for (const auto& [port, frame] : res.egress) {
            DecodedTunnel t = decode_tunnel(frame);
            CHECK(t.outer_dst == SPGW2_IP);
        }
    }
}

TEST_CASE("non-diverted sessions are untouched at the network layer", "[flow]") {
    auto plain = make_switch();
    install_default_forwarding(plain);
    learn(plain, ENB_MAC, SPGW1_MAC, PORT_SPGW1);

    auto diverted = make_switch();
    install_default_forwarding(diverted);
    install_divert_policy(diverted);
    learn(diverted, OVS_MAC, SPGW1_MAC, PORT_SPGW1);

    Bytes inner = inner_packet(UE2_IP, SRV_IP, {9, 9, 9});
    EthernetFrame up = tunnel_frame(ENB_MAC, SPGW1_MAC, ENB_IP, SPGW1_IP, 0x1001, inner);

    auto base = plain.process_frame(PORT_ENB, up);
    auto via = diverted.process_frame(PORT_ENB, up);

    REQUIRE(base.egress.size() == 1);
    REQUIRE(via.egress.size() == 1);
    CHECK(base.egress[0].first == PORT_SPGW1);
    CHECK(via.egress[0].first == PORT_SPGW1);
    // The divert policy decapsulates and re-wraps even non-diverted bearers;
    // the reassembled packet must be indistinguishable from the original from
    // the IP layer up. Link-layer source necessarily changes.
    CHECK(base.egress[0].second.payload == via.egress[0].second.payload);
    CHECK(via.used_gtp_port);
    CHECK_FALSE(base.used_gtp_port);
}

TEST_CASE("downlink from the replica passes through as plain traffic", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    install_divert_policy(sw);
    learn(sw, SPGW2_MAC, ENB_MAC, PORT_ENB);

    Bytes inner = inner_packet(SRV_IP, UE1_IP, {7});
    EthernetFrame down = tunnel_frame(SPGW2_MAC, ENB_MAC, SPGW2_IP, ENB_IP, 0x2000, inner);
    auto res = sw.process_frame(PORT_SPGW2, down);

    REQUIRE(res.drops.empty());
    REQUIRE(res.egress.size() == 1);
    CHECK(res.egress[0].first == PORT_ENB);
    CHECK(res.egress[0].second == down);  // bit-for-bit, link layer included
    CHECK_FALSE(res.used_gtp_port);
}

TEST_CASE("decapsulation and re-encapsulation are inverse", "[flow]") {
    auto sw = make_switch();
    // Loop policy: strip the tunnel, steer straight back to the original
    // sender, forward out port 2.
    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));
    MatchFields from_local;
    from_local.in_port = PORT_LOCAL;
    sw.install_rule(rule(0, PRIO_MEDIUM, from_local, {Action::goto_table(2)}));
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(ENB_IP), Action::output(PORT_IN_PORT)}));
    sw.install_rule(rule(2, PRIO_LOW, {}, {Action::output(PORT_SPGW1)}));

    auto rng = testutil::make_rng(0x5eed);
    for (int i = 0; i < 300; ++i) {
        Bytes inner = inner_packet(testutil::rand_ip(rng), testutil::rand_ip(rng),
                                   testutil::rand_bytes(rng, 0, 64));
        Teid teid = testutil::rand_u32(rng);
        EthernetFrame f = tunnel_frame(ENB_MAC, OVS_MAC, ENB_IP, OVS_IP, teid, inner);

        auto res = sw.process_frame(PORT_ENB, f);
        REQUIRE(res.drops.empty());
        REQUIRE(res.egress.size() == 1);
        DecodedTunnel t = decode_tunnel(res.egress[0].second);
        CHECK(t.outer_src == OVS_IP);
        CHECK(t.outer_dst == ENB_IP);
        CHECK(t.teid == teid);
        CHECK(t.inner == inner);
    }
}

TEST_CASE("tunnel teid override applies on re-encapsulation", "[flow]") {
    auto sw = make_switch();
    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));
    MatchFields from_local;
    from_local.in_port = PORT_LOCAL;
    sw.install_rule(rule(0, PRIO_MEDIUM, from_local, {Action::goto_table(2)}));
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(SPGW2_IP), Action::set_tunnel_teid(0xabcd),
                          Action::output(PORT_IN_PORT)}));
    sw.install_rule(rule(2, PRIO_LOW, {}, {Action::output(PORT_SPGW2)}));

    EthernetFrame f =
        tunnel_frame(ENB_MAC, OVS_MAC, ENB_IP, OVS_IP, 0x1000, inner_packet(UE1_IP, SRV_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.size() == 1);
    CHECK(decode_tunnel(res.egress[0].second).teid == 0xabcd);
}

TEST_CASE("re-circulation budget terminates tunnel loops", "[flow]") {
    auto sw = make_switch();
    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));
    // Steers the re-wrapped packet back at the switch itself: decap, encap,
    // then the attempted second decap must be cut off.
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(OVS_IP), Action::output(PORT_IN_PORT)}));
    sw.set_neighbor(OVS_IP, OVS_MAC);

    EthernetFrame f =
        tunnel_frame(ENB_MAC, OVS_MAC, ENB_IP, OVS_IP, 0x1000, inner_packet(UE1_IP, SRV_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.empty());
    REQUIRE(res.drops.size() == 1);
    CHECK(res.drops[0].reason == "re-circulation budget exceeded");
}

TEST_CASE("tunnel actions outside a tunnel context are diagnosed", "[flow]") {
    auto sw = make_switch();
    sw.install_rule(rule(0, PRIO_LOW, {},
                         {Action::set_tunnel_dst(SPGW1_IP), Action::output(PORT_SPGW1)}));
    EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.empty());
    REQUIRE(res.drops.size() == 1);
    CHECK(res.drops[0].reason == "tunnel destination outside GTP re-circulation");
}

TEST_CASE("re-encapsulation needs a neighbor entry for the tunnel endpoint", "[flow]") {
    auto sw = make_switch();
    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
    Ipv4Addr stranger = Ipv4Addr::parse("10.0.2.99");
    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(stranger), Action::output(PORT_IN_PORT)}));

    EthernetFrame f =
        tunnel_frame(ENB_MAC, OVS_MAC, ENB_IP, OVS_IP, 0x1000, inner_packet(UE1_IP, SRV_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.empty());
    REQUIRE(res.drops.size() == 1);
    CHECK(res.drops[0].reason.find("no neighbor entry") == 0);
}

TEST_CASE("output to the host stack depends on the pipeline role", "[flow]") {
    EthernetFrame plain = make_frame(ENB_MAC, OVS_MAC, inner_packet(ENB_IP, OVS_IP));

    SECTION("a tunnel endpoint discards non-tunnel traffic") {
        auto sw = make_switch(true);
        sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
        auto res = sw.process_frame(PORT_ENB, plain);
        REQUIRE(res.egress.empty());
        REQUIRE(res.drops.size() == 1);
        CHECK(res.drops[0].reason == "host stack discarded non-GTP packet");
    }

    SECTION("a plain switch hands the frame to its host") {
        auto sw = make_switch(false);
        sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_LOCAL)}));
        auto res = sw.process_frame(PORT_ENB, plain);
        REQUIRE(res.drops.empty());
        REQUIRE(res.egress.size() == 1);
        CHECK(res.egress[0].first == PORT_LOCAL);
        CHECK(res.egress[0].second == plain);
    }
}

TEST_CASE("a recirculating output ends its action list", "[flow]") {
    auto sw = make_switch();
    MatchFields from_gtp;
    from_gtp.in_port = PORT_GTP;
    sw.install_rule(rule(0, PRIO_HIGH, from_gtp, {Action::goto_table(1)}));
    MatchFields from_local;
    from_local.in_port = PORT_LOCAL;
    sw.install_rule(rule(0, PRIO_MEDIUM, from_local, {Action::goto_table(2)}));
    // The trailing rewrite must never run: the output consumed the frame.
    Ipv4Addr poison = Ipv4Addr::parse("9.9.9.9");
    sw.install_rule(rule(0, PRIO_LOW, {},
                         {Action::output(PORT_LOCAL), Action::set_ip_src(poison)}));
    sw.install_rule(rule(1, PRIO_LOW, {},
                         {Action::set_tunnel_dst(ENB_IP), Action::output(PORT_IN_PORT)}));
    sw.install_rule(rule(2, PRIO_LOW, {}, {Action::output(PORT_SPGW1)}));

    Bytes inner = inner_packet(UE1_IP, SRV_IP);
    EthernetFrame f = tunnel_frame(ENB_MAC, OVS_MAC, ENB_IP, OVS_IP, 0x1000, inner);
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.size() == 1);
    DecodedTunnel t = decode_tunnel(res.egress[0].second);
    CHECK(t.inner == inner);
}

TEST_CASE("flood excludes the ingress port", "[flow]") {
    auto sw = make_switch();
    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::output(PORT_FLOOD)}));
    EthernetFrame f = make_frame(ENB_MAC, MacAddr::broadcast(), inner_packet(ENB_IP, SRV_IP));
    auto res = sw.process_frame(PORT_SPGW1, f);
    REQUIRE(res.egress.size() == 2);
    CHECK(res.egress[0].first == PORT_ENB);
    CHECK(res.egress[1].first == PORT_SPGW2);
}

TEST_CASE("a table miss is a diagnosed drop", "[flow]") {
    auto sw = make_switch();
    EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.drops.size() == 1);
    CHECK(res.drops[0].reason == "table 0 miss");

    sw.install_rule(rule(0, PRIO_LOW, {}, {Action::goto_table(2)}));
    res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.drops.size() == 1);
    CHECK(res.drops[0].reason == "table 2 miss");
}

TEST_CASE("plain traffic never reaches the tunnel steering table", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    install_divert_policy(sw);
    learn(sw, ENB_MAC, SPGW1_MAC, PORT_SPGW1);

    // Not GTP-U: an ordinary UDP exchange between hosts on the segment.
    EthernetFrame f = make_frame(ENB_MAC, SPGW1_MAC, inner_packet(ENB_IP, SPGW1_IP));
    auto res = sw.process_frame(PORT_ENB, f);
    REQUIRE(res.egress.size() == 1);
    CHECK(res.egress[0].first == PORT_SPGW1);
    CHECK_FALSE(res.used_gtp_port);
    for (const auto& r : sw.table(1).rules()) {
        CHECK(r.packets == 0);
    }
}

TEST_CASE("rule counters track matched frames and bytes", "[flow]") {
    auto sw = make_switch();
    install_default_forwarding(sw);
    install_divert_policy(sw);
    learn(sw, OVS_MAC, SPGW2_MAC, PORT_SPGW2);

    Bytes inner = inner_packet(UE1_IP, SRV_IP);
    EthernetFrame up = tunnel_frame(ENB_MAC, SPGW1_MAC, ENB_IP, SPGW1_IP, 0x1000, inner);
    for (int i = 0; i < 3; ++i) sw.process_frame(PORT_ENB, up);

    MatchFields diverted_ue;
    diverted_ue.eth_type = ETHTYPE_IPV4;
    diverted_ue.ipv4_src = UE1_IP;
    const auto& t1 = sw.table(1).rules();
    auto it = std::find_if(t1.begin(), t1.end(),
                           [&](const FlowRule& r) { return r.match == diverted_ue; });
    REQUIRE(it != t1.end());
    CHECK(it->packets == 3);
    // Decapsulated frames carry the inner packet behind a synthetic header.
    CHECK(it->bytes == 3 * (14 + inner.size()));
}
