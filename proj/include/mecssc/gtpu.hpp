#pragma once

#include <optional>

#include "core.hpp"
#include "ipv4.hpp"

namespace mecssc {

inline constexpr std::uint16_t GTPU_PORT = 2152;

inline constexpr std::uint8_t GTPU_VERSION = 1;
inline constexpr std::uint8_t GTPU_MSG_GPDU = 0xff;

/// Outer UDP/IP addressing of a tunnel packet. Not part of the GTP payload
/// bytes; carried alongside so decoded packets keep their transport context.
struct TunnelEndpoints {
    Ipv4Addr src;
    Ipv4Addr dst;
    std::uint16_t src_port = GTPU_PORT;
    std::uint16_t dst_port = GTPU_PORT;

    friend bool operator==(const TunnelEndpoints&, const TunnelEndpoints&) = default;
};

/// One G-PDU: a user IPv4 packet riding a GTP-U tunnel.
struct GtpUserPacket {
    Teid teid = 0;
    Bytes inner;  // encapsulated IPv4 packet bytes, passed through unmodified
    std::optional<std::uint16_t> seq;  // decode-only; generation never emits it
    TunnelEndpoints outer;
    bool nonstandard_port = false;  // set on decode when outer dst port != 2152

    friend bool operator==(const GtpUserPacket&, const GtpUserPacket&) = default;
};

/// Serializes the 8-byte G-PDU header followed by the inner packet.
/// Optional fields are never emitted: the emulated data plane does not use
/// them, and a fixed header keeps re-encapsulation byte-reproducible.
inline Bytes encode_gtpu(const GtpUserPacket& p) {
    if (p.seq)
        throw CodecError("seq", "sequence number emission not supported");
    if (p.inner.size() > 0xffff) throw CodecError("inner", "inner packet too large");
    ByteWriter w;
    w.u8(0x30);  // version 1, protocol type GTP, no optional fields
    w.u8(GTPU_MSG_GPDU);
    w.u16(std::uint16_t(p.inner.size()));
    w.u32(p.teid);
    w.raw(p.inner);
    return w.take();
}

/// Parses a G-PDU. Optional fields (sequence number, N-PDU number, extension
/// header chain) are accepted and skipped to reach the inner packet; the
/// sequence number is surfaced when present.
inline GtpUserPacket decode_gtpu(const Bytes& data, const TunnelEndpoints& outer) {
    ByteReader r(data);
    std::uint8_t flags = r.u8("flags");
    if ((flags >> 5) != GTPU_VERSION) throw CodecError("version", "GTP version is not 1");
    if (!(flags & 0x10)) throw CodecError("protocol_type", "GTP' not supported");
    std::uint8_t msg_type = r.u8("msg_type");
    if (msg_type != GTPU_MSG_GPDU)
        throw CodecError("msg_type", "only G-PDU (255) supported, got " + std::to_string(msg_type));
    std::uint16_t declared = r.u16("length");
    if (declared != data.size() - 8)
        throw CodecError("length", "declared " + std::to_string(declared) + " bytes, buffer carries " +
                                       std::to_string(data.size() - 8));

    GtpUserPacket p;
    p.teid = r.u32("teid");
    bool has_ext = flags & 0x04;
    bool has_seq = flags & 0x02;
    bool has_npdu = flags & 0x01;
    if (has_ext || has_seq || has_npdu) {
        std::uint16_t seq = r.u16("seq");
        if (has_seq) p.seq = seq;
        r.skip(1, "npdu");
        std::uint8_t next_ext = r.u8("next_ext_type");
        while (next_ext != 0) {
            std::uint8_t ext_len = r.u8("ext_length");
            if (ext_len == 0) throw CodecError("ext_length", "zero-length extension header");
            r.skip(std::size_t(ext_len) * 4 - 2, "ext_content");
            next_ext = r.u8("next_ext_type");
        }
    }
    p.inner = r.bytes(r.remaining(), "inner");
    p.outer = outer;
    p.nonstandard_port = outer.dst_port != GTPU_PORT;
    return p;
}

/// Wraps a G-PDU into a full UDP/IPv4 packet ready for framing.
inline Bytes gtpu_to_ipv4(const GtpUserPacket& p) {
    return make_udp_ipv4(p.outer.src, p.outer.dst, p.outer.src_port, p.outer.dst_port, encode_gtpu(p));
}

}  // namespace mecssc
