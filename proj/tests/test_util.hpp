#pragma once

#include <cstdint>
#include <random>

#include "mecssc/core.hpp"

namespace testutil {

inline std::mt19937 make_rng(std::uint32_t seed) { return std::mt19937(seed); }

inline mecssc::Bytes rand_bytes(std::mt19937& rng, std::size_t min_len, std::size_t max_len) {
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    std::uniform_int_distribution<int> byte_dist(0, 255);
    mecssc::Bytes out(len_dist(rng));
    for (auto& b : out) b = std::uint8_t(byte_dist(rng));
    return out;
}

inline std::uint32_t rand_u32(std::mt19937& rng) {
    return std::uniform_int_distribution<std::uint32_t>()(rng);
}

inline mecssc::Ipv4Addr rand_ip(std::mt19937& rng) { return mecssc::Ipv4Addr(rand_u32(rng)); }

inline std::string rand_imsi(std::mt19937& rng) {
    std::string s = "00101";
    std::uniform_int_distribution<int> digit(0, 9);
    while (s.size() < 15) s.push_back(char('0' + digit(rng)));
    return s;
}

}  // namespace testutil
