#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace mecssc {

enum class TraceKind : std::uint8_t {
    Send,         // frame entered a link (after any queueing delay)
    Deliver,      // frame came off a link at the far endpoint
    Drop,         // frame discarded, reason recorded
    PacketIn,     // switch punted a frame to the controller
    PacketOut,    // controller injected a frame at a switch port
    AppSend,      // application payload handed to the radio side
    AppDeliver,   // application payload received at an endpoint
    CtrlSend,     // mobility manager emitted a signalling request
    CtrlDeliver,  // mobility manager received a signalling answer
    Command,      // scripted scenario step executed
};

inline const char* trace_kind_name(TraceKind k) {
    switch (k) {
        case TraceKind::Send: return "SEND";
        case TraceKind::Deliver: return "DELIV";
        case TraceKind::Drop: return "DROP";
        case TraceKind::PacketIn: return "PKTIN";
        case TraceKind::PacketOut: return "PKTOUT";
        case TraceKind::AppSend: return "APP_SEND";
        case TraceKind::AppDeliver: return "APP_DELIV";
        case TraceKind::CtrlSend: return "CTRL_SEND";
        case TraceKind::CtrlDeliver: return "CTRL_DELIV";
        case TraceKind::Command: return "CMD";
    }
    return "?";
}

struct TraceRecord {
    TimeUs time = 0;
    std::uint64_t seq = 0;  // insertion order, ties broken by it
    TraceKind kind = TraceKind::Send;
    std::string node;    // where it happened
    std::string detail;  // link name, drop reason, command text
    Ipv4Addr addr;       // subscriber address for APP records, zero otherwise
    std::uint64_t id = 0;  // probe or signalling correlation key
    Bytes bytes;         // full frame bytes for wire records
};

/// Append-only record of everything that happened on the wire and at the
/// endpoints. Two runs of the same scenario must produce byte-identical
/// exports; every test of determinism rests on that.
class Trace {
  public:
    bool capture = true;

    void add(TimeUs time, TraceKind kind, std::string node, std::string detail,
             Ipv4Addr addr = {}, std::uint64_t id = 0, Bytes bytes = {}) {
        if (!capture) return;
        records_.push_back(TraceRecord{time, next_seq_++, kind, std::move(node),
                                       std::move(detail), addr, id, std::move(bytes)});
    }

    const std::vector<TraceRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    std::string export_lines() const {
        std::string out;
        char head[128];
        for (const auto& r : records_) {
            std::snprintf(head, sizeof head, "t=%lld %s %s", static_cast<long long>(r.time),
                          trace_kind_name(r.kind), r.node.c_str());
            out += head;
            if (!r.detail.empty()) {
                out += ' ';
                out += r.detail;
            }
            if (!r.addr.is_zero()) {
                out += " addr=";
                out += r.addr.str();
            }
            if (r.id != 0) {
                std::snprintf(head, sizeof head, " id=%llu",
                              static_cast<unsigned long long>(r.id));
                out += head;
            }
            if (!r.bytes.empty()) {
                std::snprintf(head, sizeof head, " len=%zu ", r.bytes.size());
                out += head;
                out += to_hex(r.bytes);
            }
            out += '\n';
        }
        return out;
    }

  private:
    std::uint64_t next_seq_ = 0;
    std::vector<TraceRecord> records_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace detail {

/// The node that originated APP_SEND records for this subscriber; APP metrics
/// count deliveries only there, so a correspondent-side observation of the
/// same address never pollutes radio-side statistics.
inline std::string radio_node(const Trace& t, Ipv4Addr ue) {
    for (const auto& r : t.records())
        if (r.kind == TraceKind::AppSend && r.addr == ue) return r.node;
    return {};
}

}  // namespace detail

inline std::size_t app_sent(const Trace& t, Ipv4Addr ue) {
    std::size_t n = 0;
    for (const auto& r : t.records())
        if (r.kind == TraceKind::AppSend && r.addr == ue) ++n;
    return n;
}

inline std::size_t app_delivered(const Trace& t, Ipv4Addr ue) {
    std::string node = detail::radio_node(t, ue);
    std::size_t n = 0;
    for (const auto& r : t.records())
        if (r.kind == TraceKind::AppDeliver && r.addr == ue && r.node == node) ++n;
    return n;
}

/// Round-trip times of this subscriber's probes, in probe order. Unanswered
/// probes are absent; an unknown subscriber yields an empty result.
inline std::vector<TimeUs> measure_rtt(const Trace& t, Ipv4Addr ue) {
    std::string node = detail::radio_node(t, ue);
    std::map<std::uint64_t, TimeUs> sent;
    std::vector<TimeUs> rtts;
    for (const auto& r : t.records()) {
        if (r.addr != ue || r.node != node) continue;
        if (r.kind == TraceKind::AppSend) {
            sent.emplace(r.id, r.time);
        } else if (r.kind == TraceKind::AppDeliver) {
            auto it = sent.find(r.id);
            if (it != sent.end()) rtts.push_back(r.time - it->second);
        }
    }
    return rtts;
}

/// Largest gap between consecutive radio-side deliveries for one subscriber.
/// Sampled across the whole trace, so a path change shows up as a spike.
inline TimeUs measure_gap(const Trace& t, Ipv4Addr ue) {
    std::string node = detail::radio_node(t, ue);
    TimeUs last = -1;
    TimeUs max_gap = 0;
    for (const auto& r : t.records()) {
        if (r.kind != TraceKind::AppDeliver || r.addr != ue || r.node != node) continue;
        if (last >= 0 && r.time - last > max_gap) max_gap = r.time - last;
        last = r.time;
    }
    return max_gap;
}

/// Request round trips seen by the mobility manager, keyed by signalling
/// sequence number: answer arrival minus request emission.
inline std::vector<std::pair<std::uint32_t, TimeUs>> control_rtts(const Trace& t) {
    std::map<std::uint64_t, TimeUs> sent;
    std::vector<std::pair<std::uint32_t, TimeUs>> out;
    for (const auto& r : t.records()) {
        if (r.kind == TraceKind::CtrlSend) {
            sent.emplace(r.id, r.time);
        } else if (r.kind == TraceKind::CtrlDeliver) {
            auto it = sent.find(r.id);
            if (it != sent.end()) out.emplace_back(std::uint32_t(r.id), r.time - it->second);
        }
    }
    return out;
}

}  // namespace mecssc
