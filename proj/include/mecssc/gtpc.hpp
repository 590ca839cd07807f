#pragma once

#include <optional>
#include <string>

#include "core.hpp"

namespace mecssc {

inline constexpr std::uint16_t GTPC_PORT = 2123;
inline constexpr std::uint8_t GTPC_VERSION = 2;

enum class GtpcKind : std::uint8_t {
    CreateSessionRequest = 32,
    CreateSessionResponse = 33,
    ModifyBearerRequest = 34,
    ModifyBearerResponse = 35,
};

inline const char* gtpc_kind_name(GtpcKind k) {
    switch (k) {
        case GtpcKind::CreateSessionRequest: return "CreateSessionRequest";
        case GtpcKind::CreateSessionResponse: return "CreateSessionResponse";
        case GtpcKind::ModifyBearerRequest: return "ModifyBearerRequest";
        case GtpcKind::ModifyBearerResponse: return "ModifyBearerResponse";
    }
    return "?";
}

enum class GtpcCause : std::uint8_t {
    Accepted = 16,
    ContextNotFound = 64,
    NoResources = 73,
};

// Information element types (subset) and F-TEID interface identifiers.
namespace ie {
inline constexpr std::uint8_t IMSI = 1;
inline constexpr std::uint8_t CAUSE = 2;
inline constexpr std::uint8_t FTEID = 87;
inline constexpr std::uint8_t PAA = 79;
inline constexpr std::uint8_t PADDING = 255;

inline constexpr std::uint8_t IF_S1U_ENB = 0;
inline constexpr std::uint8_t IF_S1U_SGW = 1;
inline constexpr std::uint8_t IF_S11_MME = 10;
inline constexpr std::uint8_t IF_S11_SGW = 11;
}  // namespace ie

/// Control-plane message with a fixed-width IE layout per kind, so every
/// Create Session Request encodes to exactly 146 bytes and every Modify
/// Bearer Request to exactly 43 (189 per attached UE). Padding IEs stand in
/// for the mandatory IEs a full implementation would carry.
struct GtpControlMessage {
    GtpcKind kind = GtpcKind::CreateSessionRequest;
    std::uint32_t seq = 0;  // 24-bit wire field

    std::string imsi;           // Create Session Request only; 15 digits
    Teid sender_s11_teid = 0;   // sender's S11 F-TEID (absent in responses without one)
    Ipv4Addr sender_s11_addr;   // address inside that F-TEID
    Teid peer_s11_teid = 0;     // header TEID: receiver's S11 TEID (0 when unknown)

    std::optional<Teid> s1u_teid_enb;  // Modify Bearer Request: eNodeB S1-U F-TEID
    Ipv4Addr s1u_addr_enb;
    std::optional<Teid> s1u_teid_sgw;  // Create Session Response: S/P-GW S1-U F-TEID
    Ipv4Addr s1u_addr_sgw;
    std::optional<Ipv4Addr> ue_ip;     // Create Session Response: assigned PDN address
    std::optional<GtpcCause> cause;    // responses only

    Ipv4Addr src_ip;  // outer addressing context, not encoded in the payload
    Ipv4Addr dst_ip;

    friend bool operator==(const GtpControlMessage&, const GtpControlMessage&) = default;

    bool is_request() const {
        return kind == GtpcKind::CreateSessionRequest || kind == GtpcKind::ModifyBearerRequest;
    }
};

inline constexpr std::size_t CSR_WIRE_SIZE = 146;
inline constexpr std::size_t MBR_WIRE_SIZE = 43;
inline constexpr std::size_t ATTACH_WIRE_BYTES = CSR_WIRE_SIZE + MBR_WIRE_SIZE;  // 189 per UE

namespace detail {

inline void write_ie_header(ByteWriter& w, std::uint8_t type, std::uint16_t len) {
    w.u8(type);
    w.u16(len);
    w.u8(0);  // spare / instance
}

inline void write_imsi(ByteWriter& w, const std::string& imsi) {
    if (imsi.size() != 15) throw CodecError("imsi", "expected 15 digits, got " + std::to_string(imsi.size()));
    write_ie_header(w, ie::IMSI, 8);
    for (std::size_t i = 0; i < 8; ++i) {
        auto digit = [&](std::size_t idx) -> std::uint8_t {
            if (idx >= 15) return 0xf;
            char c = imsi[idx];
            if (c < '0' || c > '9') throw CodecError("imsi", "non-digit character");
            return std::uint8_t(c - '0');
        };
        w.u8(std::uint8_t(digit(2 * i) | (digit(2 * i + 1) << 4)));
    }
}

inline void write_fteid(ByteWriter& w, std::uint8_t iface, Teid teid, Ipv4Addr addr) {
    write_ie_header(w, ie::FTEID, 9);
    w.u8(std::uint8_t(0x80 | iface));  // IPv4 present
    w.u32(teid);
    w.ipv4(addr);
}

inline void write_cause(ByteWriter& w, GtpcCause cause) {
    write_ie_header(w, ie::CAUSE, 2);
    w.u8(std::uint8_t(cause));
    w.u8(0);
}

inline void write_paa(ByteWriter& w, Ipv4Addr addr) {
    write_ie_header(w, ie::PAA, 5);
    w.u8(1);  // PDN type IPv4
    w.ipv4(addr);
}

inline void write_padding(ByteWriter& w, std::uint16_t len) {
    write_ie_header(w, ie::PADDING, len);
    w.zeros(len);
}

}  // namespace detail

inline Bytes encode_gtpc(const GtpControlMessage& m) {
    if (m.seq > 0xffffff) throw CodecError("seq", "sequence exceeds 24 bits");
    ByteWriter w;
    w.u8(std::uint8_t(GTPC_VERSION << 5) | 0x08);  // version 2, TEID present
    w.u8(std::uint8_t(m.kind));
    w.u16(0);  // length back-patched below
    w.u32(m.peer_s11_teid);
    w.u24(m.seq);
    w.u8(0);  // spare

    switch (m.kind) {
        case GtpcKind::CreateSessionRequest:
            detail::write_imsi(w, m.imsi);
            detail::write_fteid(w, ie::IF_S11_MME, m.sender_s11_teid, m.sender_s11_addr);
            detail::write_padding(w, 105);
            break;
        case GtpcKind::CreateSessionResponse:
            if (!m.cause) throw CodecError("cause", "required for responses");
            detail::write_cause(w, *m.cause);
            // A rejection carries nothing but its cause.
            if (*m.cause == GtpcCause::Accepted) {
                detail::write_fteid(w, ie::IF_S11_SGW, m.sender_s11_teid, m.sender_s11_addr);
                if (!m.s1u_teid_sgw)
                    throw CodecError("s1u_teid_sgw", "required for accepted Create Session Response");
                detail::write_fteid(w, ie::IF_S1U_SGW, *m.s1u_teid_sgw, m.s1u_addr_sgw);
                if (!m.ue_ip) throw CodecError("ue_ip", "required for accepted Create Session Response");
                detail::write_paa(w, *m.ue_ip);
            }
            break;
        case GtpcKind::ModifyBearerRequest:
            detail::write_fteid(w, ie::IF_S11_MME, m.sender_s11_teid, m.sender_s11_addr);
            if (!m.s1u_teid_enb) throw CodecError("s1u_teid_enb", "required for Modify Bearer Request");
            detail::write_fteid(w, ie::IF_S1U_ENB, *m.s1u_teid_enb, m.s1u_addr_enb);
            detail::write_padding(w, 1);
            break;
        case GtpcKind::ModifyBearerResponse:
            if (!m.cause) throw CodecError("cause", "required for responses");
            detail::write_cause(w, *m.cause);
            break;
        default:
            throw CodecError("msg_kind", "unknown message kind");
    }

    Bytes out = w.take();
    std::size_t len = out.size() - 4;
    out[2] = std::uint8_t(len >> 8);
    out[3] = std::uint8_t(len);
    return out;
}

inline GtpControlMessage decode_gtpc(const Bytes& data, Ipv4Addr src_ip, Ipv4Addr dst_ip) {
    ByteReader r(data);
    std::uint8_t flags = r.u8("flags");
    if ((flags >> 5) != GTPC_VERSION)
        throw CodecError("version", "GTP-C version is not 2, got " + std::to_string(flags >> 5));
    if (!(flags & 0x08)) throw CodecError("teid_flag", "header TEID required");
    std::uint8_t type = r.u8("msg_kind");
    if (type < 32 || type > 35) throw CodecError("msg_kind", "unsupported message type " + std::to_string(type));
    std::uint16_t declared = r.u16("length");
    if (std::size_t(declared) + 4 != data.size())
        throw CodecError("length", "declared " + std::to_string(declared) + " + 4 != buffer " +
                                       std::to_string(data.size()));

    GtpControlMessage m;
    m.kind = GtpcKind(type);
    m.peer_s11_teid = r.u32("teid");
    m.seq = r.u24("seq");
    r.skip(1, "spare");
    m.src_ip = src_ip;
    m.dst_ip = dst_ip;

    bool have_imsi = false, have_sender = false;
    while (r.remaining() > 0) {
        std::uint8_t ie_type = r.u8("ie_type");
        std::uint16_t ie_len = r.u16("ie_length");
        r.skip(1, "ie_spare");
        switch (ie_type) {
            case ie::IMSI: {
                if (ie_len != 8) throw CodecError("imsi", "bad IMSI IE length");
                Bytes tbcd = r.bytes(8, "imsi");
                std::string digits;
                for (std::size_t i = 0; i < 8; ++i) {
                    std::uint8_t lo = tbcd[i] & 0xf, hi = tbcd[i] >> 4;
                    if (lo > 9) throw CodecError("imsi", "bad TBCD digit");
                    digits.push_back(char('0' + lo));
                    if (hi == 0xf) break;
                    if (hi > 9) throw CodecError("imsi", "bad TBCD digit");
                    digits.push_back(char('0' + hi));
                }
                if (digits.size() != 15) throw CodecError("imsi", "expected 15 digits");
                m.imsi = digits;
                have_imsi = true;
                break;
            }
            case ie::CAUSE: {
                if (ie_len != 2) throw CodecError("cause", "bad cause IE length");
                m.cause = GtpcCause(r.u8("cause"));
                r.skip(1, "cause_spare");
                break;
            }
            case ie::FTEID: {
                if (ie_len != 9) throw CodecError("fteid", "bad F-TEID IE length");
                std::uint8_t iface_flags = r.u8("fteid_flags");
                if (!(iface_flags & 0x80)) throw CodecError("fteid", "IPv4 flag required");
                Teid teid = r.u32("fteid_teid");
                Ipv4Addr addr = r.ipv4("fteid_addr");
                switch (iface_flags & 0x3f) {
                    case ie::IF_S11_MME:
                    case ie::IF_S11_SGW:
                        m.sender_s11_teid = teid;
                        m.sender_s11_addr = addr;
                        have_sender = true;
                        break;
                    case ie::IF_S1U_ENB:
                        m.s1u_teid_enb = teid;
                        m.s1u_addr_enb = addr;
                        break;
                    case ie::IF_S1U_SGW:
                        m.s1u_teid_sgw = teid;
                        m.s1u_addr_sgw = addr;
                        break;
                    default:
                        throw CodecError("fteid", "unknown interface type");
                }
                break;
            }
            case ie::PAA: {
                if (ie_len != 5) throw CodecError("paa", "bad PAA IE length");
                if (r.u8("pdn_type") != 1) throw CodecError("paa", "only IPv4 PDN type supported");
                m.ue_ip = r.ipv4("paa_addr");
                break;
            }
            case ie::PADDING:
                r.skip(ie_len, "padding");
                break;
            default:
                throw CodecError("ie_type", "unknown IE type " + std::to_string(ie_type));
        }
    }

    switch (m.kind) {
        case GtpcKind::CreateSessionRequest:
            if (!have_imsi) throw CodecError("imsi", "missing in Create Session Request");
            if (!have_sender) throw CodecError("fteid", "missing sender F-TEID");
            break;
        case GtpcKind::CreateSessionResponse:
            if (!m.cause) throw CodecError("cause", "missing in Create Session Response");
            if (*m.cause == GtpcCause::Accepted) {
                if (!have_sender) throw CodecError("fteid", "missing sender F-TEID");
                if (!m.s1u_teid_sgw) throw CodecError("s1u_teid_sgw", "missing in Create Session Response");
                if (!m.ue_ip) throw CodecError("ue_ip", "missing in Create Session Response");
            }
            break;
        case GtpcKind::ModifyBearerRequest:
            if (!have_sender) throw CodecError("fteid", "missing sender F-TEID");
            if (!m.s1u_teid_enb) throw CodecError("s1u_teid_enb", "missing in Modify Bearer Request");
            break;
        case GtpcKind::ModifyBearerResponse:
            if (!m.cause) throw CodecError("cause", "missing in Modify Bearer Response");
            break;
    }
    return m;
}

/// Retargets a stored Modify Bearer Request at a replica's S11 TEID. Only the
/// 4 header TEID bytes change; everything else re-encodes identically.
inline GtpControlMessage rewrite_s11_teid(const GtpControlMessage& m, Teid new_teid) {
    if (m.kind != GtpcKind::ModifyBearerRequest)
        throw CodecError("msg_kind", std::string("S11 TEID rewrite only defined for Modify Bearer Request, got ") +
                                         gtpc_kind_name(m.kind));
    GtpControlMessage out = m;
    out.peer_s11_teid = new_teid;
    return out;
}

}  // namespace mecssc
