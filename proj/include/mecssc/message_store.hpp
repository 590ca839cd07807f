#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"
#include "gtpc.hpp"

namespace mecssc {

/// One intercepted control message, kept verbatim.
struct StoredMessage {
    std::uint64_t arrival = 0;  // global arrival index, 0-based
    TimeUs time = 0;
    Ipv4Addr mme_ip;   // signalling source
    Ipv4Addr spgw_ip;  // signalling destination
    std::string imsi;
    GtpcKind kind = GtpcKind::CreateSessionRequest;
    std::uint32_t seq = 0;
    Bytes payload;
};

/// Arrival-ordered archive of the control messages a mobility manager has
/// sent to its gateways. Only requests are kept: the archive exists to be
/// replayed against a fresh gateway, and a gateway's state is a function of
/// the requests alone.
///
/// Bearer updates do not carry the subscriber identity on the wire, so the
/// store remembers which sender-side tunnel id each session request
/// introduced and resolves later messages through that table.
class MessageStore {
  public:
    /// Returns the archived record, or nullptr when nothing was kept.
    /// Responses, undecodable payloads and requests whose tunnel id is
    /// unknown pass through unarchived; the reason lands in warnings().
    const StoredMessage* store(TimeUs time, Ipv4Addr mme_ip, Ipv4Addr spgw_ip,
                               const Bytes& payload) {
        GtpControlMessage msg;
        try {
            msg = decode_gtpc(payload, mme_ip, spgw_ip);
        } catch (const CodecError& e) {
            warn("undecodable control message from " + mme_ip.str() + " left unarchived: " +
                 e.what());
            return nullptr;
        }
        if (!msg.is_request()) return nullptr;

        std::string imsi;
        if (msg.kind == GtpcKind::CreateSessionRequest) {
            imsi = msg.imsi;
            teid_owner_[{mme_ip.v, msg.sender_s11_teid}] = imsi;
        } else {
            auto it = teid_owner_.find({mme_ip.v, msg.sender_s11_teid});
            if (it == teid_owner_.end()) {
                char teid_hex[16];
                std::snprintf(teid_hex, sizeof teid_hex, "0x%08x", msg.sender_s11_teid);
                warn("bearer update from " + mme_ip.str() + " references unknown tunnel " +
                     teid_hex + ", left unarchived");
                return nullptr;
            }
            imsi = it->second;
        }

        StoredMessage rec;
        rec.arrival = next_arrival_++;
        rec.time = time;
        rec.mme_ip = mme_ip;
        rec.spgw_ip = spgw_ip;
        rec.imsi = imsi;
        rec.kind = msg.kind;
        rec.seq = msg.seq;
        rec.payload = payload;
        total_bytes_ += payload.size();
        records_.push_back(std::move(rec));
        return &records_.back();
    }

    const std::deque<StoredMessage>& records() const { return records_; }

    std::vector<const StoredMessage*> for_session(Ipv4Addr spgw_ip, const std::string& imsi) const {
        std::vector<const StoredMessage*> out;
        for (const auto& r : records_)
            if (r.spgw_ip == spgw_ip && r.imsi == imsi) out.push_back(&r);
        return out;
    }

    std::uint64_t total_bytes() const { return total_bytes_; }
    std::size_t size() const { return records_.size(); }

    /// Distinct subscribers with an archived session request toward the given
    /// gateway.
    std::uint64_t registered_ues(Ipv4Addr spgw_ip) const {
        std::map<std::string, bool> seen;
        for (const auto& r : records_)
            if (r.spgw_ip == spgw_ip && r.kind == GtpcKind::CreateSessionRequest)
                seen[r.imsi] = true;
        return seen.size();
    }

    std::uint64_t evict_mme(Ipv4Addr mme_ip) {
        return evict([&](const StoredMessage& r) { return r.mme_ip == mme_ip; },
                     "mobility manager " + mme_ip.str());
    }

    std::uint64_t evict_spgw(Ipv4Addr spgw_ip) {
        return evict([&](const StoredMessage& r) { return r.spgw_ip == spgw_ip; },
                     "gateway " + spgw_ip.str());
    }

    std::uint64_t evict_imsi(const std::string& imsi) {
        return evict([&](const StoredMessage& r) { return r.imsi == imsi; },
                     "subscriber " + imsi);
    }

    const std::vector<std::string>& warnings() const { return warnings_; }

  private:
    template <typename Pred>
    std::uint64_t evict(Pred matches, const std::string& what) {
        std::uint64_t freed = 0;
        std::deque<StoredMessage> kept;
        for (auto& r : records_) {
            if (matches(r)) {
                freed += r.payload.size();
            } else {
                kept.push_back(std::move(r));
            }
        }
        if (freed == 0) {
            warn("eviction for " + what + " matched nothing");
        }
        records_ = std::move(kept);
        total_bytes_ -= freed;
        return freed;
    }

    void warn(std::string msg) { warnings_.push_back(std::move(msg)); }

    std::deque<StoredMessage> records_;
    std::map<std::pair<std::uint32_t, Teid>, std::string> teid_owner_;
    std::vector<std::string> warnings_;
    std::uint64_t next_arrival_ = 0;
    std::uint64_t total_bytes_ = 0;
};

}  // namespace mecssc
