#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mecssc {

using Bytes = std::vector<std::uint8_t>;
using TimeUs = std::int64_t;
using Teid = std::uint32_t;

/// Thrown by wire-format encode/decode on malformed or out-of-contract input.
/// `field()` names the offending field so tests and logs can pinpoint it.
class CodecError : public std::runtime_error {
public:
    CodecError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Thrown on flow-rule installation contract violations.
class FlowError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown by scenario/config parsers; carries a 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

struct Ipv4Addr {
    std::uint32_t v = 0;  // host byte order

    constexpr Ipv4Addr() = default;
    constexpr explicit Ipv4Addr(std::uint32_t host_order) : v(host_order) {}
    constexpr Ipv4Addr(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : v((std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) | (std::uint32_t(c) << 8) | d) {}

    friend constexpr bool operator==(Ipv4Addr, Ipv4Addr) = default;
    friend constexpr auto operator<=>(Ipv4Addr, Ipv4Addr) = default;

    bool is_zero() const noexcept { return v == 0; }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (v >> 24) & 0xff, (v >> 16) & 0xff,
                      (v >> 8) & 0xff, v & 0xff);
        return buf;
    }

    static Ipv4Addr parse(std::string_view s) {
        std::uint32_t out = 0;
        int part = 0;
        const char* p = s.data();
        const char* end = s.data() + s.size();
        while (part < 4) {
            unsigned octet = 0;
            auto [next, ec] = std::from_chars(p, end, octet);
            if (ec != std::errc{} || octet > 255) throw ParseError(0, "bad IPv4 address '" + std::string(s) + "'");
            out = (out << 8) | octet;
            p = next;
            ++part;
            if (part < 4) {
                if (p == end || *p != '.') throw ParseError(0, "bad IPv4 address '" + std::string(s) + "'");
                ++p;
            }
        }
        if (p != end) throw ParseError(0, "bad IPv4 address '" + std::string(s) + "'");
        return Ipv4Addr(out);
    }
};

struct MacAddr {
    std::array<std::uint8_t, 6> b{};

    friend constexpr bool operator==(const MacAddr&, const MacAddr&) = default;
    friend constexpr auto operator<=>(const MacAddr&, const MacAddr&) = default;

    bool is_zero() const noexcept {
        for (auto x : b)
            if (x) return false;
        return true;
    }
    bool is_broadcast() const noexcept {
        for (auto x : b)
            if (x != 0xff) return false;
        return true;
    }

    std::string str() const {
        char buf[18];
        std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", b[0], b[1], b[2], b[3], b[4], b[5]);
        return buf;
    }

    static MacAddr broadcast() {
        MacAddr m;
        m.b.fill(0xff);
        return m;
    }
};

inline std::string to_hex(const Bytes& data) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto byte : data) {
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0xf]);
    }
    return out;
}

/// Bounds-checked big-endian reader over a byte span.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const Bytes& data) : ByteReader(data.data(), data.size()) {}

    std::size_t remaining() const noexcept { return size_ - pos_; }
    std::size_t pos() const noexcept { return pos_; }

    std::uint8_t u8(const char* field) {
        need(1, field);
        return data_[pos_++];
    }
    std::uint16_t u16(const char* field) {
        need(2, field);
        std::uint16_t v = (std::uint16_t(data_[pos_]) << 8) | data_[pos_ + 1];
        pos_ += 2;
        return v;
    }
    std::uint32_t u24(const char* field) {
        need(3, field);
        std::uint32_t v = (std::uint32_t(data_[pos_]) << 16) | (std::uint32_t(data_[pos_ + 1]) << 8) |
                          data_[pos_ + 2];
        pos_ += 3;
        return v;
    }
    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = (std::uint32_t(data_[pos_]) << 24) | (std::uint32_t(data_[pos_ + 1]) << 16) |
                          (std::uint32_t(data_[pos_ + 2]) << 8) | data_[pos_ + 3];
        pos_ += 4;
        return v;
    }
    Ipv4Addr ipv4(const char* field) { return Ipv4Addr(u32(field)); }
    Bytes bytes(std::size_t n, const char* field) {
        need(n, field);
        Bytes out(data_ + pos_, data_ + pos_ + n);
        pos_ += n;
        return out;
    }
    void skip(std::size_t n, const char* field) {
        need(n, field);
        pos_ += n;
    }

private:
    void need(std::size_t n, const char* field) const {
        if (size_ - pos_ < n) throw CodecError(field, "truncated input");
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

/// Big-endian writer appending to an owned buffer.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(std::uint8_t(v >> 8));
        out_.push_back(std::uint8_t(v));
    }
    void u24(std::uint32_t v) {
        out_.push_back(std::uint8_t(v >> 16));
        out_.push_back(std::uint8_t(v >> 8));
        out_.push_back(std::uint8_t(v));
    }
    void u32(std::uint32_t v) {
        out_.push_back(std::uint8_t(v >> 24));
        out_.push_back(std::uint8_t(v >> 16));
        out_.push_back(std::uint8_t(v >> 8));
        out_.push_back(std::uint8_t(v));
    }
    void ipv4(Ipv4Addr a) { u32(a.v); }
    void raw(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }

    std::size_t size() const noexcept { return out_.size(); }
    Bytes take() { return std::move(out_); }
    const Bytes& view() const noexcept { return out_; }

private:
    Bytes out_;
};

}  // namespace mecssc
