#pragma once

#include <cstdint>
#include <optional>

#include "core.hpp"

namespace mecssc {

inline constexpr std::uint8_t IPPROTO_UDP_V = 17;

/// Ones' complement sum over a byte range, used for the IPv4 header checksum.
inline std::uint16_t ipv4_checksum(const std::uint8_t* data, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += (std::uint32_t(data[i]) << 8) | data[i + 1];
    if (len & 1) sum += std::uint32_t(data[len - 1]) << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return std::uint16_t(~sum & 0xffff);
}

/// Minimal IPv4 packet: fixed 20-byte header (no options), deterministic
/// defaults (ttl 64, ident 0, no fragmentation) so identical inputs always
/// serialize to identical bytes.
struct Ipv4Packet {
    Ipv4Addr src;
    Ipv4Addr dst;
    std::uint8_t proto = 0;
    std::uint8_t ttl = 64;
    std::uint8_t tos = 0;
    std::uint16_t ident = 0;
    Bytes payload;

    friend bool operator==(const Ipv4Packet&, const Ipv4Packet&) = default;

    Bytes encode() const {
        if (payload.size() > 0xffff - 20) throw CodecError("payload", "IPv4 payload too large");
        ByteWriter w;
        w.u8(0x45);  // version 4, ihl 5
        w.u8(tos);
        w.u16(std::uint16_t(20 + payload.size()));
        w.u16(ident);
        w.u16(0);  // flags/fragment offset
        w.u8(ttl);
        w.u8(proto);
        w.u16(0);  // checksum placeholder
        w.ipv4(src);
        w.ipv4(dst);
        Bytes out = w.take();
        std::uint16_t csum = ipv4_checksum(out.data(), 20);
        out[10] = std::uint8_t(csum >> 8);
        out[11] = std::uint8_t(csum);
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }

    static Ipv4Packet decode(const Bytes& data) {
        ByteReader r(data);
        std::uint8_t vihl = r.u8("version_ihl");
        if ((vihl >> 4) != 4) throw CodecError("version", "not IPv4");
        std::size_t hlen = std::size_t(vihl & 0xf) * 4;
        if (hlen < 20) throw CodecError("ihl", "header length below minimum");
        Ipv4Packet p;
        p.tos = r.u8("tos");
        std::uint16_t total = r.u16("total_length");
        if (total < hlen || total > data.size()) throw CodecError("total_length", "inconsistent with buffer");
        p.ident = r.u16("ident");
        r.skip(2, "flags_frag");
        p.ttl = r.u8("ttl");
        p.proto = r.u8("proto");
        r.skip(2, "checksum");
        p.src = r.ipv4("src");
        p.dst = r.ipv4("dst");
        if (hlen > 20) r.skip(hlen - 20, "options");
        p.payload = Bytes(data.begin() + hlen, data.begin() + total);
        if (ipv4_checksum(data.data(), hlen) != 0) throw CodecError("checksum", "IPv4 header checksum mismatch");
        return p;
    }
};

/// UDP datagram with checksum 0 (checksum is optional over IPv4; omitting it
/// keeps serialization independent of the enclosing addresses).
struct UdpDatagram {
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Bytes payload;

    friend bool operator==(const UdpDatagram&, const UdpDatagram&) = default;

    Bytes encode() const {
        ByteWriter w;
        w.u16(src_port);
        w.u16(dst_port);
        w.u16(std::uint16_t(8 + payload.size()));
        w.u16(0);
        w.raw(payload);
        return w.take();
    }

    static UdpDatagram decode(const Bytes& data) {
        ByteReader r(data);
        UdpDatagram d;
        d.src_port = r.u16("udp_src");
        d.dst_port = r.u16("udp_dst");
        std::uint16_t len = r.u16("udp_length");
        if (len < 8 || len > data.size()) throw CodecError("udp_length", "inconsistent with buffer");
        r.skip(2, "udp_checksum");
        d.payload = Bytes(data.begin() + 8, data.begin() + len);
        return d;
    }
};

inline Bytes make_udp_ipv4(Ipv4Addr src, Ipv4Addr dst, std::uint16_t sport, std::uint16_t dport,
                           Bytes payload) {
    UdpDatagram u{sport, dport, std::move(payload)};
    Ipv4Packet p;
    p.src = src;
    p.dst = dst;
    p.proto = IPPROTO_UDP_V;
    p.payload = u.encode();
    return p.encode();
}

/// Cheap non-throwing header extraction for flow matching. Fields past the
/// first malformed layer are simply absent.
struct Ipv4View {
    bool valid = false;
    Ipv4Addr src;
    Ipv4Addr dst;
    std::uint8_t proto = 0;
    bool has_udp = false;
    std::uint16_t udp_src = 0;
    std::uint16_t udp_dst = 0;
    std::size_t header_len = 0;
};

inline Ipv4View parse_ipv4_view(const Bytes& data) {
    Ipv4View v;
    if (data.size() < 20 || (data[0] >> 4) != 4) return v;
    std::size_t hlen = std::size_t(data[0] & 0xf) * 4;
    if (hlen < 20 || data.size() < hlen) return v;
    v.valid = true;
    v.header_len = hlen;
    v.proto = data[9];
    v.src = Ipv4Addr((std::uint32_t(data[12]) << 24) | (std::uint32_t(data[13]) << 16) |
                     (std::uint32_t(data[14]) << 8) | data[15]);
    v.dst = Ipv4Addr((std::uint32_t(data[16]) << 24) | (std::uint32_t(data[17]) << 16) |
                     (std::uint32_t(data[18]) << 8) | data[19]);
    if (v.proto == IPPROTO_UDP_V && data.size() >= hlen + 8) {
        v.has_udp = true;
        v.udp_src = std::uint16_t((data[hlen] << 8) | data[hlen + 1]);
        v.udp_dst = std::uint16_t((data[hlen + 2] << 8) | data[hlen + 3]);
    }
    return v;
}

inline void ipv4_refresh_checksum(Bytes& packet) {
    std::size_t hlen = std::size_t(packet[0] & 0xf) * 4;
    packet[10] = packet[11] = 0;
    std::uint16_t csum = ipv4_checksum(packet.data(), hlen);
    packet[10] = std::uint8_t(csum >> 8);
    packet[11] = std::uint8_t(csum);
}

/// In-place source/destination rewrite with header checksum refresh: the flow
/// pipeline's SET_IP_SRC / SET_IP_DST actions.
inline void ipv4_set_src(Bytes& packet, Ipv4Addr a) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4) throw CodecError("packet", "not IPv4");
    packet[12] = std::uint8_t(a.v >> 24);
    packet[13] = std::uint8_t(a.v >> 16);
    packet[14] = std::uint8_t(a.v >> 8);
    packet[15] = std::uint8_t(a.v);
    ipv4_refresh_checksum(packet);
}

inline void ipv4_set_dst(Bytes& packet, Ipv4Addr a) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4) throw CodecError("packet", "not IPv4");
    packet[16] = std::uint8_t(a.v >> 24);
    packet[17] = std::uint8_t(a.v >> 16);
    packet[18] = std::uint8_t(a.v >> 8);
    packet[19] = std::uint8_t(a.v);
    ipv4_refresh_checksum(packet);
}

}  // namespace mecssc
