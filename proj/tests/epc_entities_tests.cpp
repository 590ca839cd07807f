#include <catch2/catch_amalgamated.hpp>

#include "mecssc/mme.hpp"
#include "mecssc/spgw.hpp"
#include "test_util.hpp"

using namespace mecssc;

namespace {

const Ipv4Addr MME_IP = Ipv4Addr::parse("10.0.9.1");
const Ipv4Addr ENB_S1U = Ipv4Addr::parse("10.0.2.10");

SpgwConfig spgw1_config(int pool_prefix = 16) {
    SpgwConfig cfg;
    cfg.name = "spgw1";
    cfg.ctrl_ip = Ipv4Addr::parse("10.0.9.11");
    cfg.user_ip = Ipv4Addr::parse("10.0.2.1");
    cfg.sgi_ip = Ipv4Addr::parse("10.0.5.1");
    cfg.pool_network = Ipv4Addr::parse("10.8.0.0");
    cfg.pool_prefix = pool_prefix;
    return cfg;
}

EnbInstance make_enb() { return EnbInstance({"enb", ENB_S1U, 0x2000}); }

MmeInstance make_mme(EnbInstance& enb) {
    return MmeInstance({"mme", MME_IP, 0x0100},
                       [&enb](const std::string& imsi, Teid sgw_teid, Ipv4Addr sgw_addr,
                              Ipv4Addr ue_ip) {
                           return enb.setup_bearer(imsi, sgw_teid, sgw_addr, ue_ip);
                       });
}

std::string imsi_n(int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "00101%010d", n);
    return buf;
}

struct AttachTranscript {
    std::vector<Bytes> mme_tx;  // requests, on the wire
    std::vector<Bytes> sgw_tx;  // answers, on the wire
};

// Full attach over serialized messages, so every hop exercises the codec the
// way the wire would.
AttachTranscript run_attach(MmeInstance& mme, SpgwInstance& spgw, const std::string& imsi) {
    AttachTranscript t;
    GtpControlMessage msg = mme.start_attach(imsi, spgw.config().ctrl_ip);
    while (true) {
        Bytes wire = encode_gtpc(msg);
        t.mme_tx.push_back(wire);
        GtpControlMessage rsp =
            spgw.handle_control(decode_gtpc(wire, msg.src_ip, msg.dst_ip));
        Bytes rsp_wire = encode_gtpc(rsp);
        t.sgw_tx.push_back(rsp_wire);
        auto next = mme.handle_control(decode_gtpc(rsp_wire, rsp.src_ip, rsp.dst_ip));
        if (!next) break;
        msg = *next;
    }
    return t;
}

Bytes ue_packet(Ipv4Addr ue, Ipv4Addr dst = Ipv4Addr::parse("10.0.5.7")) {
    return make_udp_ipv4(ue, dst, 40000, 5000, {0xca, 0xfe});
}

}  // namespace

TEST_CASE("attach completes in two request/response rounds", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config());

    auto t = run_attach(mme, spgw, imsi_n(1));

    REQUIRE(t.mme_tx.size() == 2);
    REQUIRE(t.sgw_tx.size() == 2);
    CHECK(t.mme_tx[0].size() == CSR_WIRE_SIZE);
    CHECK(t.sgw_tx[0].size() == 53);
    CHECK(t.mme_tx[1].size() == MBR_WIRE_SIZE);
    CHECK(t.sgw_tx[1].size() == 18);
    CHECK(t.mme_tx[0].size() + t.mme_tx[1].size() == ATTACH_WIRE_BYTES);

    const AttachContext* a = mme.attach(imsi_n(1));
    REQUIRE(a != nullptr);
    CHECK(a->phase == AttachPhase::Done);
    CHECK(a->mme_s11_teid == 0x0100);
    CHECK(a->sgw_s11_teid == 0x1000);
    CHECK(a->sgw_s1u_teid == 0x1001);
    CHECK(a->ue_ip == Ipv4Addr::parse("10.8.0.1"));

    const SessionContext* s = spgw.session_by_imsi(imsi_n(1));
    REQUIRE(s != nullptr);
    CHECK(s->state == BearerState::Active);
    CHECK(s->s11_teid_peer == 0x0100);
    CHECK(s->s1u_teid_enb == 0x2000);
    CHECK(s->enb_addr == ENB_S1U);

    const EnbBearer* b = enb.bearer_by_imsi(imsi_n(1));
    REQUIRE(b != nullptr);
    CHECK(b->enb_teid == 0x2000);
    CHECK(b->sgw_teid == 0x1001);
    CHECK(b->sgw_addr == spgw.config().user_ip);
    CHECK(b->ue_ip == Ipv4Addr::parse("10.8.0.1"));
}

TEST_CASE("gateway sessions render as a canonical snapshot", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config());
    run_attach(mme, spgw, imsi_n(1));
    run_attach(mme, spgw, imsi_n(2));

    CHECK(spgw.snapshot() ==
          "imsi=001010000000001 state=active s11=0x00001000 peer=0x00000100 s1u=0x00001001"
          " enb_teid=0x00002000 enb=10.0.2.10 ue=10.8.0.1\n"
          "imsi=001010000000002 state=active s11=0x00001002 peer=0x00000101 s1u=0x00001003"
          " enb_teid=0x00002001 enb=10.0.2.10 ue=10.8.0.2\n");
}

TEST_CASE("gateway state is a pure function of the request sequence", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance primary(spgw1_config());

    // Drive the primary through a batch of attaches, recording every request
    // byte-for-byte as it crossed the wire.
    std::vector<Bytes> request_log;
    const int n = 40;
    for (int i = 1; i <= n; ++i) {
        auto t = run_attach(mme, primary, imsi_n(i));
        for (auto& w : t.mme_tx) request_log.push_back(std::move(w));
    }
    REQUIRE(primary.session_count() == n);

    // A second gateway with the same configuration fed the same requests in
    // the same order must end up interchangeable with the first, answers
    // included.
    SpgwInstance replica(spgw1_config());
    for (const auto& wire : request_log)
        replica.handle_control(decode_gtpc(wire, MME_IP, replica.config().ctrl_ip));

    CHECK(replica.session_count() == primary.session_count());
    CHECK(replica.snapshot() == primary.snapshot());
}

TEST_CASE("replayed requests produce byte-identical answers", "[epc]") {
    auto rng = testutil::make_rng(77);
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance primary(spgw1_config());
    SpgwInstance replica(spgw1_config());

    for (int i = 0; i < 25; ++i) {
        std::string imsi = testutil::rand_imsi(rng);
        GtpControlMessage msg = mme.start_attach(imsi, primary.config().ctrl_ip);
        while (true) {
            Bytes wire = encode_gtpc(msg);
            GtpControlMessage rsp =
                primary.handle_control(decode_gtpc(wire, msg.src_ip, msg.dst_ip));
            GtpControlMessage rsp2 =
                replica.handle_control(decode_gtpc(wire, msg.src_ip, msg.dst_ip));
            REQUIRE(encode_gtpc(rsp) == encode_gtpc(rsp2));
            auto next = mme.handle_control(rsp);
            if (!next) break;
            msg = *next;
        }
    }
    CHECK(primary.snapshot() == replica.snapshot());
}

TEST_CASE("a duplicate session request is answered from existing state", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config());

    GtpControlMessage csr = mme.start_attach(imsi_n(1), spgw.config().ctrl_ip);
    GtpControlMessage first = spgw.handle_control(csr);
    GtpControlMessage second = spgw.handle_control(csr);

    CHECK(spgw.session_count() == 1);
    CHECK(encode_gtpc(first) == encode_gtpc(second));

    // The duplicate allocated nothing: the next UE still gets the next
    // address and TEIDs in sequence.
    GtpControlMessage csr2 = mme.start_attach(imsi_n(2), spgw.config().ctrl_ip);
    GtpControlMessage rsp2 = spgw.handle_control(csr2);
    CHECK(*rsp2.ue_ip == Ipv4Addr::parse("10.8.0.2"));
    CHECK(rsp2.sender_s11_teid == 0x1002);
}

TEST_CASE("a bearer update for an unknown session is refused", "[epc]") {
    SpgwInstance spgw(spgw1_config());
    GtpControlMessage mbr;
    mbr.kind = GtpcKind::ModifyBearerRequest;
    mbr.seq = 9;
    mbr.sender_s11_teid = 0x0100;
    mbr.sender_s11_addr = MME_IP;
    mbr.peer_s11_teid = 0xdeadbeef;
    mbr.s1u_teid_enb = 0x2000;
    mbr.s1u_addr_enb = ENB_S1U;

    GtpControlMessage rsp = spgw.handle_control(mbr);
    CHECK(rsp.kind == GtpcKind::ModifyBearerResponse);
    CHECK(rsp.cause == GtpcCause::ContextNotFound);
    CHECK(rsp.seq == 9);
    CHECK(spgw.session_count() == 0);
}

TEST_CASE("address pool exhaustion refuses further sessions", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config(30));  // two usable addresses

    run_attach(mme, spgw, imsi_n(1));
    run_attach(mme, spgw, imsi_n(2));
    REQUIRE(spgw.session_count() == 2);

    GtpControlMessage csr = mme.start_attach(imsi_n(3), spgw.config().ctrl_ip);
    GtpControlMessage rsp = spgw.handle_control(csr);
    CHECK(rsp.cause == GtpcCause::NoResources);
    CHECK(encode_gtpc(rsp).size() == 18);
    CHECK(spgw.session_count() == 2);

    mme.handle_control(rsp);
    CHECK(mme.attach(imsi_n(3))->phase == AttachPhase::Failed);
}

TEST_CASE("uplink tunnel ingress enforces the bearer binding", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config());
    run_attach(mme, spgw, imsi_n(1));
    const Ipv4Addr ue1 = Ipv4Addr::parse("10.8.0.1");

    SECTION("conforming traffic passes") {
        auto up = enb.uplink(ue_packet(ue1));
        REQUIRE(up.ok);
        auto res = spgw.handle_uplink(up.pkt);
        REQUIRE(res.ok);
        CHECK(res.inner == up.pkt.inner);
    }

    SECTION("an unknown tunnel is rejected") {
        GtpUserPacket pkt;
        pkt.teid = 0x7777;
        pkt.inner = ue_packet(ue1);
        auto res = spgw.handle_uplink(pkt);
        CHECK_FALSE(res.ok);
        CHECK(res.diag.find("unknown uplink tunnel") == 0);
    }

    SECTION("a source not bound to the bearer is rejected") {
        GtpUserPacket pkt;
        pkt.teid = 0x1001;
        pkt.inner = ue_packet(Ipv4Addr::parse("10.8.0.99"));
        auto res = spgw.handle_uplink(pkt);
        CHECK_FALSE(res.ok);
        CHECK(res.diag.find("does not match bearer address") != std::string::npos);
    }

    SECTION("a bearer without a downlink endpoint is not active yet") {
        GtpControlMessage csr = mme.start_attach(imsi_n(2), spgw.config().ctrl_ip);
        spgw.handle_control(csr);  // created, bearer update never sent
        GtpUserPacket pkt;
        pkt.teid = 0x1003;
        pkt.inner = ue_packet(Ipv4Addr::parse("10.8.0.2"));
        auto res = spgw.handle_uplink(pkt);
        CHECK_FALSE(res.ok);
        CHECK(res.diag.find("not active") != std::string::npos);
    }
}

TEST_CASE("downlink wraps by destination address", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    SpgwInstance spgw(spgw1_config());
    run_attach(mme, spgw, imsi_n(1));
    const Ipv4Addr ue1 = Ipv4Addr::parse("10.8.0.1");
    const Ipv4Addr srv = Ipv4Addr::parse("10.0.5.7");

    Bytes down_inner = make_udp_ipv4(srv, ue1, 5000, 40000, {1, 2, 3});
    auto down = spgw.make_downlink(down_inner);
    REQUIRE(down.ok);
    CHECK(down.pkt.teid == 0x2000);
    CHECK(down.pkt.outer.src == spgw.config().user_ip);
    CHECK(down.pkt.outer.dst == ENB_S1U);

    auto delivered = enb.downlink(down.pkt);
    REQUIRE(delivered.ok);
    CHECK(delivered.ue_ip == ue1);
    CHECK(delivered.inner == down_inner);

    auto missing = spgw.make_downlink(make_udp_ipv4(srv, Ipv4Addr::parse("10.8.0.50"), 1, 2, {}));
    CHECK_FALSE(missing.ok);
    CHECK(missing.diag.find("no bearer") == 0);
}

TEST_CASE("base station tunnels are symmetric per bearer", "[epc]") {
    auto enb = make_enb();
    auto setup = enb.setup_bearer(imsi_n(5), 0x1009, Ipv4Addr::parse("10.0.2.1"),
                                  Ipv4Addr::parse("10.8.0.9"));
    CHECK(setup.teid == 0x2000);
    CHECK(setup.addr == ENB_S1U);

    // Re-binding the same UE keeps the advertised TEID stable.
    auto again = enb.setup_bearer(imsi_n(5), 0x1111, Ipv4Addr::parse("10.0.2.3"),
                                  Ipv4Addr::parse("10.8.0.9"));
    CHECK(again.teid == setup.teid);
    CHECK(enb.bearer_by_imsi(imsi_n(5))->sgw_teid == 0x1111);
    CHECK(enb.bearer_count() == 1);

    auto up = enb.uplink(ue_packet(Ipv4Addr::parse("10.8.0.9")));
    REQUIRE(up.ok);
    CHECK(up.pkt.teid == 0x1111);
    CHECK(up.pkt.outer.dst == Ipv4Addr::parse("10.0.2.3"));

    auto stranger = enb.uplink(ue_packet(Ipv4Addr::parse("10.8.0.77")));
    CHECK_FALSE(stranger.ok);

    GtpUserPacket bogus;
    bogus.teid = 0x9999;
    bogus.inner = ue_packet(Ipv4Addr::parse("10.8.0.9"));
    CHECK_FALSE(enb.downlink(bogus).ok);
}

TEST_CASE("address pool allocation is ordered and skips anchor bytes", "[epc]") {
    Ipv4Pool pool(Ipv4Addr::parse("10.8.0.0"), 16);
    Ipv4Addr prev;
    int dot_boundary_crossings = 0;
    for (int i = 0; i < 600; ++i) {
        auto a = pool.allocate();
        REQUIRE(a.has_value());
        std::uint8_t last = std::uint8_t(a->v & 0xff);
        CHECK(last != 0);
        CHECK(last != 255);
        CHECK(a->v > prev.v);
        if (prev.v != 0 && a->v - prev.v > 1) ++dot_boundary_crossings;
        prev = *a;
    }
    CHECK(pool.allocated() == 600);
    // 600 allocations span three /24 boundaries (254 usable per /24).
    CHECK(dot_boundary_crossings == 2);
    CHECK(prev == Ipv4Addr::parse("10.8.2.92"));

    Ipv4Pool tiny(Ipv4Addr::parse("10.9.0.0"), 30);
    CHECK(tiny.allocate() == Ipv4Addr::parse("10.9.0.1"));
    CHECK(tiny.allocate() == Ipv4Addr::parse("10.9.0.2"));
    CHECK_FALSE(tiny.allocate().has_value());
    CHECK(tiny.contains(Ipv4Addr::parse("10.9.0.1")));
    CHECK_FALSE(tiny.contains(Ipv4Addr::parse("10.9.0.4")));
}

TEST_CASE("gateway processing costs are fixed per request kind", "[epc]") {
    CHECK(spgw_control_proc_us(GtpcKind::CreateSessionRequest) == 10'000);
    CHECK(spgw_control_proc_us(GtpcKind::ModifyBearerRequest) == 1'000);
}

TEST_CASE("the gateway refuses to handle answers", "[epc]") {
    SpgwInstance spgw(spgw1_config());
    GtpControlMessage rsp;
    rsp.kind = GtpcKind::CreateSessionResponse;
    rsp.cause = GtpcCause::Accepted;
    REQUIRE_THROWS_AS(spgw.handle_control(rsp), CodecError);
}

TEST_CASE("answers for unknown attaches are diagnosed, not fatal", "[epc]") {
    auto enb = make_enb();
    auto mme = make_mme(enb);
    GtpControlMessage rsp;
    rsp.kind = GtpcKind::ModifyBearerResponse;
    rsp.cause = GtpcCause::Accepted;
    rsp.peer_s11_teid = 0xbad;
    CHECK_FALSE(mme.handle_control(rsp).has_value());
    REQUIRE(mme.diags().size() == 1);
    CHECK(mme.diags()[0].find("unknown attach") != std::string::npos);
}
