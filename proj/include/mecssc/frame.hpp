#pragma once

#include "core.hpp"
#include "ipv4.hpp"

namespace mecssc {

inline constexpr std::uint16_t ETHTYPE_IPV4 = 0x0800;

struct EthernetFrame {
    MacAddr dst;
    MacAddr src;
    std::uint16_t eth_type = ETHTYPE_IPV4;
    Bytes payload;

    friend bool operator==(const EthernetFrame&, const EthernetFrame&) = default;

    std::size_t wire_size() const noexcept { return 14 + payload.size(); }

    Bytes encode() const {
        Bytes out;
        out.reserve(wire_size());
        out.insert(out.end(), dst.b.begin(), dst.b.end());
        out.insert(out.end(), src.b.begin(), src.b.end());
        out.push_back(std::uint8_t(eth_type >> 8));
        out.push_back(std::uint8_t(eth_type));
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }

    static EthernetFrame decode(const Bytes& data) {
        if (data.size() < 14) throw CodecError("frame", "truncated Ethernet header");
        EthernetFrame f;
        std::copy(data.begin(), data.begin() + 6, f.dst.b.begin());
        std::copy(data.begin() + 6, data.begin() + 12, f.src.b.begin());
        f.eth_type = std::uint16_t((data[12] << 8) | data[13]);
        f.payload = Bytes(data.begin() + 14, data.end());
        return f;
    }
};

inline EthernetFrame make_frame(MacAddr src, MacAddr dst, Bytes ipv4_packet) {
    EthernetFrame f;
    f.src = src;
    f.dst = dst;
    f.eth_type = ETHTYPE_IPV4;
    f.payload = std::move(ipv4_packet);
    return f;
}

}  // namespace mecssc
