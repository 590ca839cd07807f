#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "network.hpp"
#include "scenario.hpp"

namespace mecssc {

/// A benchmark grid: every strategy crossed with every population size and
/// every moved-share, each cell run as a scripted scenario. The whole-image
/// baseline has no moved axis (the instance moves as one), so it collapses
/// to one row per population size.
struct SweepConfig {
    std::vector<ReplicationStrategy> strategies = {ReplicationStrategy::Naive,
                                                   ReplicationStrategy::Selective};
    std::vector<int> registered = {1, 10, 100, 1000};
    std::vector<std::string> moved = {"all"};  // numbers, "half" or "all"
    int repetitions = 1;
    std::uint32_t seed = 1;
    InterceptMode intercept = InterceptMode::Mirror;
    SimConstants constants;
    std::string output = "sweep.csv";
};

inline SweepConfig parse_sweep_config(const std::string& text) {
    SweepConfig cfg;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string raw = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        auto toks = detail::split_ws(raw);
        if (toks.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        const std::string& head = toks[0];
        try {
            if (head == "strategies") {
                if (toks.size() < 2) throw ScenarioError(line_no, "strategies needs at least one name");
                cfg.strategies.clear();
                for (std::size_t i = 1; i < toks.size(); ++i)
                    cfg.strategies.push_back(parse_strategy(toks[i]));
            } else if (head == "registered") {
                if (toks.size() < 2) throw ScenarioError(line_no, "registered needs at least one count");
                cfg.registered.clear();
                for (std::size_t i = 1; i < toks.size(); ++i) {
                    int n = std::stoi(toks[i]);
                    if (n < 1) throw ScenarioError(line_no, "population must be positive");
                    cfg.registered.push_back(n);
                }
            } else if (head == "moved") {
                if (toks.size() < 2) throw ScenarioError(line_no, "moved needs at least one value");
                cfg.moved.assign(toks.begin() + 1, toks.end());
            } else if (head == "repetitions") {
                if (toks.size() != 2) throw ScenarioError(line_no, "repetitions takes one integer");
                cfg.repetitions = std::stoi(toks[1]);
                if (cfg.repetitions < 1) throw ScenarioError(line_no, "repetitions must be positive");
            } else if (head == "seed") {
                if (toks.size() != 2) throw ScenarioError(line_no, "seed takes one integer");
                cfg.seed = std::uint32_t(std::stoul(toks[1]));
            } else if (head == "intercept") {
                if (toks.size() != 2) throw ScenarioError(line_no, "intercept takes one name");
                if (toks[1] == "mirror") cfg.intercept = InterceptMode::Mirror;
                else if (toks[1] == "store_and_forward")
                    cfg.intercept = InterceptMode::StoreAndForward;
                else throw ScenarioError(line_no, "intercept is mirror or store_and_forward");
            } else if (head == "const") {
                if (toks.size() != 3) throw ScenarioError(line_no, "const takes a key and a value");
                if (!cfg.constants.set(toks[1], std::stod(toks[2])))
                    throw ScenarioError(line_no, "unknown constant '" + toks[1] + "'");
            } else if (head == "output") {
                if (toks.size() != 2) throw ScenarioError(line_no, "output takes one file name");
                cfg.output = toks[1];
            } else {
                throw ScenarioError(line_no, "unknown directive '" + head + "'");
            }
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::exception& e) {
            throw ScenarioError(line_no, e.what());
        }
        if (pos > text.size()) break;
    }
    return cfg;
}

/// "half" and "all" scale with the population; a number is taken as is and
/// is infeasible when it exceeds the population.
inline std::optional<int> resolve_moved(const std::string& token, int registered) {
    if (token == "half") return registered / 2;
    if (token == "all") return registered;
    int n = std::stoi(token);
    if (n < 0 || n > registered) return std::nullopt;
    return n;
}

struct SweepResult {
    std::vector<std::string> rows;       // one per cell and repetition
    std::vector<std::string> mean_rows;  // one per cell, numeric columns averaged
};

namespace detail {

struct CellStats {
    std::string strategy;
    std::uint64_t registered = 0, moved = 0;
    double stored = 0, tx = 0, elapsed = 0, downtime = 0;
    int n = 0;
};

inline std::string mean_row(const CellStats& c) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.1f,%.1f,%.3f,%.3f", c.strategy.c_str(),
                  (unsigned long long)c.registered, (unsigned long long)c.moved, c.stored / c.n,
                  c.tx / c.n, c.elapsed / c.n, c.downtime / c.n);
    return buf;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepConfig& cfg) {
    SweepResult out;
    std::vector<detail::CellStats> cells;
    std::map<std::string, std::size_t> cell_at;

    auto record = [&](const ReplicationReport& r) {
        out.rows.push_back(r.csv_row());
        std::string key = std::string(strategy_name(r.strategy)) + "/" +
                          std::to_string(r.registered_ues) + "/" + std::to_string(r.moved_ues);
        auto [it, fresh] = cell_at.try_emplace(key, cells.size());
        if (fresh) {
            cells.push_back({strategy_name(r.strategy), r.registered_ues, r.moved_ues,
                             0, 0, 0, 0, 0});
        }
        detail::CellStats& c = cells[it->second];
        c.stored += double(r.stored_bytes);
        c.tx += double(r.transmitted_bytes);
        c.elapsed += r.elapsed_ms;
        c.downtime += r.downtime_ms;
        ++c.n;
    };

    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        for (ReplicationStrategy strategy : cfg.strategies) {
            for (int reg : cfg.registered) {
                if (strategy == ReplicationStrategy::RamModel) {
                    record(VmImageModel{}.report(std::uint64_t(reg)));
                    continue;
                }
                for (const std::string& token : cfg.moved) {
                    std::optional<int> moved = resolve_moved(token, reg);
                    if (!moved) {
                        out.rows.push_back(std::string(strategy_name(strategy)) + "," +
                                           std::to_string(reg) + "," + token + ",-,-,-,-");
                        continue;
                    }
                    Scenario sc = benchmark_scenario(strategy, reg, *moved, cfg.intercept,
                                                     cfg.constants);
                    sc.capture = false;
                    sc.seed = cfg.seed + std::uint32_t(rep);
                    ScenarioResult res = run_scenario(sc);
                    if (!res.failures.empty())
                        throw std::runtime_error(sc.name + ": " + res.failures.front());
                    if (res.reports.size() != 1)
                        throw std::runtime_error(sc.name + ": expected exactly one report");
                    record(res.reports.front());
                }
            }
        }
    }
    for (const auto& c : cells) out.mean_rows.push_back(detail::mean_row(c));
    return out;
}

}  // namespace mecssc
