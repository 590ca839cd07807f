#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "core.hpp"

namespace mecssc {

enum class ReplicationStrategy : std::uint8_t { Naive, Selective, RamModel };

inline const char* strategy_name(ReplicationStrategy s) {
    switch (s) {
        case ReplicationStrategy::Naive: return "naive";
        case ReplicationStrategy::Selective: return "selective";
        case ReplicationStrategy::RamModel: return "ram_model";
    }
    return "?";
}

inline ReplicationStrategy parse_strategy(const std::string& s) {
    if (s == "naive") return ReplicationStrategy::Naive;
    if (s == "selective") return ReplicationStrategy::Selective;
    if (s == "ram_model") return ReplicationStrategy::RamModel;
    throw std::invalid_argument("unknown strategy '" + s + "'");
}

/// Gateway-state transfer bookkeeping for one migration.
struct DivertRecord {
    std::string imsi;
    Ipv4Addr enb_ip;
    Ipv4Addr old_spgw_ip;  // user-plane endpoints
    Ipv4Addr new_spgw_ip;
    bool selective = false;
    // Captured from the replica's session answer (selective mode only). Four
    // 4-byte values, hence the 16-byte per-user storage increment.
    Teid new_sgw_s1u_teid = 0;
    Teid new_sgw_s11_teid = 0;
    Ipv4Addr old_ue_ip;
    Ipv4Addr new_ue_ip;

    static constexpr std::size_t SELECTIVE_EXTRA_BYTES = 16;
};

struct ReplicationReport {
    ReplicationStrategy strategy = ReplicationStrategy::Naive;
    std::uint64_t registered_ues = 0;
    std::uint64_t moved_ues = 0;
    std::uint64_t stored_bytes = 0;
    std::uint64_t transmitted_bytes = 0;
    double elapsed_ms = 0.0;
    double downtime_ms = 0.0;

    std::string csv_row() const {
        char buf[192];
        std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%llu,%llu,%.3f,%.3f",
                      strategy_name(strategy), (unsigned long long)registered_ues,
                      (unsigned long long)moved_ues, (unsigned long long)stored_bytes,
                      (unsigned long long)transmitted_bytes, elapsed_ms, downtime_ms);
        return buf;
    }

    static const char* csv_header() {
        return "strategy,registered,moved,stored_bytes,tx_bytes,elapsed_ms,downtime_ms";
    }
};

/// Whole-VM state transfer as the baseline to compare message replication
/// against. Image size grows quadratically with registered users between two
/// anchor points (160 MB idle, 2 GB at a thousand users); the instance is
/// suspended for the dump, the copy, and the restore, so downtime equals the
/// whole procedure.
struct VmImageModel {
    double dump_s = 16.5;
    double restore_s = 8.5;
    double bandwidth_Bps = 1.25e8;  // 1 Gb/s

    static constexpr double ANCHOR_SMALL_UES = 1.0;
    static constexpr double ANCHOR_SMALL_BYTES = 160e6;
    static constexpr double ANCHOR_LARGE_UES = 1000.0;
    static constexpr double ANCHOR_LARGE_BYTES = 2e9;

    double image_bytes(std::uint64_t registered) const {
        double n1 = ANCHOR_SMALL_UES * ANCHOR_SMALL_UES;
        double n2 = ANCHOR_LARGE_UES * ANCHOR_LARGE_UES;
        double b = (ANCHOR_LARGE_BYTES - ANCHOR_SMALL_BYTES) / (n2 - n1);
        double a = ANCHOR_SMALL_BYTES - b * n1;
        double n = double(registered);
        return a + b * n * n;
    }

    double elapsed_s(std::uint64_t registered) const {
        return dump_s + image_bytes(registered) / bandwidth_Bps + restore_s;
    }

    ReplicationReport report(std::uint64_t registered) const {
        ReplicationReport r;
        r.strategy = ReplicationStrategy::RamModel;
        r.registered_ues = registered;
        r.moved_ues = registered;  // the whole instance moves
        r.stored_bytes = 0;        // nothing retained ahead of time
        r.transmitted_bytes = std::uint64_t(std::llround(image_bytes(registered)));
        r.elapsed_ms = elapsed_s(registered) * 1000.0;
        r.downtime_ms = r.elapsed_ms;
        return r;
    }
};

/// Closed-form storage footprint per strategy, for cross-checking the live
/// counters.
inline std::uint64_t expected_stored_bytes(ReplicationStrategy s, std::uint64_t registered,
                                           std::uint64_t moved) {
    constexpr std::uint64_t PER_REGISTERED = 189;  // one session request + one bearer update
    switch (s) {
        case ReplicationStrategy::Naive: return PER_REGISTERED * registered;
        case ReplicationStrategy::Selective:
            return PER_REGISTERED * registered + DivertRecord::SELECTIVE_EXTRA_BYTES * moved;
        case ReplicationStrategy::RamModel: return 0;
    }
    return 0;
}

inline std::uint64_t expected_tx_bytes(ReplicationStrategy s, std::uint64_t registered,
                                       std::uint64_t moved) {
    constexpr std::uint64_t PER_UE = 189;
    switch (s) {
        case ReplicationStrategy::Naive: return PER_UE * registered;
        case ReplicationStrategy::Selective: return PER_UE * moved;
        case ReplicationStrategy::RamModel: return 0;  // use VmImageModel::image_bytes
    }
    return 0;
}

}  // namespace mecssc
