#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "enb.hpp"
#include "gtpc.hpp"

namespace mecssc {

enum class AttachPhase : std::uint8_t {
    AwaitingSession,  // session create sent, no answer yet
    AwaitingBearer,   // bearer update sent, no answer yet
    Done,
    Failed,
};

inline const char* attach_phase_name(AttachPhase p) {
    switch (p) {
        case AttachPhase::AwaitingSession: return "awaiting-session";
        case AttachPhase::AwaitingBearer: return "awaiting-bearer";
        case AttachPhase::Done: return "done";
        case AttachPhase::Failed: return "failed";
    }
    return "?";
}

struct AttachContext {
    std::string imsi;
    Teid mme_s11_teid = 0;
    Ipv4Addr sgw_ctrl;       // where the session was requested
    Teid sgw_s11_teid = 0;   // learned from the session answer
    Ipv4Addr sgw_s11_addr;
    Teid sgw_s1u_teid = 0;
    Ipv4Addr sgw_s1u_addr;
    Ipv4Addr ue_ip;
    AttachPhase phase = AttachPhase::AwaitingSession;
};

struct MmeConfig {
    std::string name;
    Ipv4Addr ctrl_ip;
    Teid teid_base = 0x0100;
};

/// Mobility manager driving the two-round attach: create the session at the
/// gateway, then bind the base station's tunnel endpoint to it. Coordination
/// with the base station is a direct query (radio-side signalling carries no
/// bearer-protocol bytes and is out of scope), so the only wire traffic an
/// attach produces is the request/response pairs with the gateway.
class MmeInstance {
public:
    using EnbQuery = std::function<BearerSetup(const std::string& imsi, Teid sgw_s1u_teid,
                                               Ipv4Addr sgw_s1u_addr, Ipv4Addr ue_ip)>;

    MmeInstance(MmeConfig cfg, EnbQuery enb_query)
        : cfg_(std::move(cfg)), enb_query_(std::move(enb_query)), next_teid_(cfg_.teid_base) {}

    const MmeConfig& config() const noexcept { return cfg_; }

    GtpControlMessage start_attach(const std::string& imsi, Ipv4Addr sgw_ctrl) {
        AttachContext ctx;
        ctx.imsi = imsi;
        ctx.mme_s11_teid = next_teid_++;
        ctx.sgw_ctrl = sgw_ctrl;
        by_teid_[ctx.mme_s11_teid] = ctx;
        imsi_index_[imsi] = ctx.mme_s11_teid;

        GtpControlMessage csr;
        csr.kind = GtpcKind::CreateSessionRequest;
        csr.seq = next_seq_++;
        csr.imsi = imsi;
        csr.sender_s11_teid = ctx.mme_s11_teid;
        csr.sender_s11_addr = cfg_.ctrl_ip;
        csr.peer_s11_teid = 0;  // gateway TEID unknown until it answers
        csr.src_ip = cfg_.ctrl_ip;
        csr.dst_ip = sgw_ctrl;
        return csr;
    }

    /// Feeds a gateway answer into the attach state machine. Returns the next
    /// message to send, if the exchange continues.
    std::optional<GtpControlMessage> handle_control(const GtpControlMessage& rsp) {
        auto it = by_teid_.find(rsp.peer_s11_teid);
        if (it == by_teid_.end()) {
            diags_.push_back(std::string(gtpc_kind_name(rsp.kind)) + " for unknown attach");
            return std::nullopt;
        }
        AttachContext& ctx = it->second;
        switch (rsp.kind) {
            case GtpcKind::CreateSessionResponse: {
                if (rsp.cause != GtpcCause::Accepted) {
                    ctx.phase = AttachPhase::Failed;
                    return std::nullopt;
                }
                ctx.sgw_s11_teid = rsp.sender_s11_teid;
                ctx.sgw_s11_addr = rsp.sender_s11_addr;
                ctx.sgw_s1u_teid = *rsp.s1u_teid_sgw;
                ctx.sgw_s1u_addr = rsp.s1u_addr_sgw;
                ctx.ue_ip = *rsp.ue_ip;
                BearerSetup bs = enb_query_(ctx.imsi, ctx.sgw_s1u_teid, ctx.sgw_s1u_addr, ctx.ue_ip);
                ctx.phase = AttachPhase::AwaitingBearer;

                GtpControlMessage mbr;
                mbr.kind = GtpcKind::ModifyBearerRequest;
                mbr.seq = next_seq_++;
                mbr.sender_s11_teid = ctx.mme_s11_teid;
                mbr.sender_s11_addr = cfg_.ctrl_ip;
                mbr.peer_s11_teid = ctx.sgw_s11_teid;
                mbr.s1u_teid_enb = bs.teid;
                mbr.s1u_addr_enb = bs.addr;
                mbr.src_ip = cfg_.ctrl_ip;
                mbr.dst_ip = ctx.sgw_ctrl;
                return mbr;
            }
            case GtpcKind::ModifyBearerResponse:
                ctx.phase = rsp.cause == GtpcCause::Accepted ? AttachPhase::Done
                                                             : AttachPhase::Failed;
                return std::nullopt;
            default:
                diags_.push_back("unexpected request handed to mobility manager");
                return std::nullopt;
        }
    }

    const AttachContext* attach(const std::string& imsi) const {
        auto it = imsi_index_.find(imsi);
        return it == imsi_index_.end() ? nullptr : &by_teid_.at(it->second);
    }

    std::size_t attach_count() const noexcept { return by_teid_.size(); }

    std::size_t done_count() const {
        std::size_t n = 0;
        for (const auto& [teid, ctx] : by_teid_)
            if (ctx.phase == AttachPhase::Done) ++n;
        return n;
    }

    const std::vector<std::string>& diags() const noexcept { return diags_; }

private:
    MmeConfig cfg_;
    EnbQuery enb_query_;
    Teid next_teid_;
    std::uint32_t next_seq_ = 1;
    std::map<Teid, AttachContext> by_teid_;
    std::map<std::string, Teid> imsi_index_;
    std::vector<std::string> diags_;
};

}  // namespace mecssc
