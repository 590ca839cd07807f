#pragma once

#include <cstdint>

#include "core.hpp"
#include "trace.hpp"

namespace mecssc {

inline constexpr std::uint32_t PCAP_MAGIC = 0xa1b2c3d4;
inline constexpr std::uint32_t PCAP_LINKTYPE_ETHERNET = 1;

namespace detail {
inline void pcap_u32(Bytes& b, std::uint32_t v) {
    b.push_back(std::uint8_t(v >> 24));
    b.push_back(std::uint8_t(v >> 16));
    b.push_back(std::uint8_t(v >> 8));
    b.push_back(std::uint8_t(v));
}
inline void pcap_u16(Bytes& b, std::uint16_t v) {
    b.push_back(std::uint8_t(v >> 8));
    b.push_back(std::uint8_t(v));
}
}  // namespace detail

/// Capture-file rendering of every wire emission in the trace, big-endian
/// classic format (readers sort out the byte order from the magic number).
/// One record per SEND, timestamped with simulated time.
inline Bytes pcap_export(const Trace& trace) {
    Bytes out;
    detail::pcap_u32(out, PCAP_MAGIC);
    detail::pcap_u16(out, 2);  // major
    detail::pcap_u16(out, 4);  // minor
    detail::pcap_u32(out, 0);  // timezone offset
    detail::pcap_u32(out, 0);  // timestamp accuracy
    detail::pcap_u32(out, 65535);  // snap length
    detail::pcap_u32(out, PCAP_LINKTYPE_ETHERNET);
    for (const auto& r : trace.records()) {
        if (r.kind != TraceKind::Send || r.bytes.empty()) continue;
        detail::pcap_u32(out, std::uint32_t(r.time / 1'000'000));
        detail::pcap_u32(out, std::uint32_t(r.time % 1'000'000));
        detail::pcap_u32(out, std::uint32_t(r.bytes.size()));
        detail::pcap_u32(out, std::uint32_t(r.bytes.size()));
        out.insert(out.end(), r.bytes.begin(), r.bytes.end());
    }
    return out;
}

}  // namespace mecssc
