#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mecssc/network.hpp"
#include "mecssc/pcap.hpp"
#include "mecssc/sweep.hpp"

namespace fs = std::filesystem;
using namespace mecssc;

namespace {

void print_usage() {
    std::cerr << "usage:\n"
                 "  mecssc run <scenario.scn> [--seed N] [--out DIR] [--set key=value]...\n"
                 "  mecssc sweep --config <file.swp> [--out DIR] [--set key=value]...\n"
                 "\n"
                 "The output directory defaults to $MECSSC_OUT_DIR, then to the\n"
                 "current directory.\n";
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(data.data(), std::streamsize(data.size()));
}

void write_file(const fs::path& path, const Bytes& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
}

/// "key=value" pairs from --set, split and checked after CLI parsing.
bool parse_overrides(const std::vector<std::string>& sets,
                     std::vector<std::pair<std::string, double>>& overrides) {
    for (const std::string& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "--set needs key=value, got '" << kv << "'\n";
            return false;
        }
        try {
            overrides.emplace_back(kv.substr(0, eq), std::stod(kv.substr(eq + 1)));
        } catch (const std::exception&) {
            std::cerr << "--set value must be numeric in '" << kv << "'\n";
            return false;
        }
    }
    return true;
}

bool apply_overrides(SimConstants& constants,
                     const std::vector<std::pair<std::string, double>>& overrides) {
    for (const auto& [key, value] : overrides) {
        if (!constants.set(key, value)) {
            std::cerr << "unknown constant '" << key << "'\n";
            return false;
        }
    }
    return true;
}

struct RunArgs {
    std::string scenario;
    fs::path out_dir = ".";
    std::uint32_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> sets;
};

int cmd_run(const RunArgs& args) {
    std::vector<std::pair<std::string, double>> overrides;
    if (!parse_overrides(args.sets, overrides)) return 2;

    Scenario sc;
    try {
        sc = parse_scenario(read_file(args.scenario));
    } catch (const ScenarioError& e) {
        std::cerr << args.scenario << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (args.seed_given) sc.seed = args.seed;
    if (!apply_overrides(sc.constants, overrides)) return 2;

    ScenarioResult res;
    try {
        res = run_scenario(sc);
    } catch (const ScenarioError& e) {
        std::cerr << args.scenario << ": " << e.what() << "\n";
        return 2;
    }

    fs::create_directories(args.out_dir);
    const std::string trace_text = res.trace.export_lines();
    write_file(args.out_dir / (res.name + ".trace.txt"), trace_text);
    write_file(args.out_dir / (res.name + ".pcap"), pcap_export(res.trace));
    std::string reports = std::string(ReplicationReport::csv_header()) + "\n";
    for (const auto& r : res.reports) reports += r.csv_row() + "\n";
    write_file(args.out_dir / (res.name + ".reports.csv"), reports);
    if (!res.rule_dumps.empty()) {
        std::string dumps;
        for (const auto& d : res.rule_dumps) dumps += d;
        write_file(args.out_dir / (res.name + ".rules.txt"), dumps);
    }

    std::printf("scenario %s: %llu events, %lld us simulated, %zu trace records\n",
                res.name.c_str(), (unsigned long long)res.events, (long long)res.end_time,
                res.trace.size());
    std::printf("hash %016llx\n", (unsigned long long)fnv1a64(trace_text));
    for (const auto& r : res.reports) std::printf("report %s\n", r.csv_row().c_str());
    for (const auto& f : res.failures) std::printf("FAIL %s\n", f.c_str());
    return res.failures.empty() ? 0 : 1;
}

struct SweepArgs {
    std::string config;
    fs::path out_dir = ".";
    std::uint32_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> sets;
};

int cmd_sweep(const SweepArgs& args) {
    std::vector<std::pair<std::string, double>> overrides;
    if (!parse_overrides(args.sets, overrides)) return 2;

    SweepConfig cfg;
    try {
        cfg = parse_sweep_config(read_file(args.config));
    } catch (const ScenarioError& e) {
        std::cerr << args.config << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (args.seed_given) cfg.seed = args.seed;
    if (!apply_overrides(cfg.constants, overrides)) return 2;

    SweepResult res;
    try {
        res = run_sweep(cfg);
    } catch (const std::exception& e) {
        std::cerr << "sweep failed: " << e.what() << "\n";
        return 1;
    }

    fs::create_directories(args.out_dir);
    const fs::path grid_path = args.out_dir / cfg.output;
    std::string grid = std::string(ReplicationReport::csv_header()) + "\n";
    for (const auto& row : res.rows) grid += row + "\n";
    write_file(grid_path, grid);

    fs::path means_path = grid_path;
    means_path.replace_filename(grid_path.stem().string() + "_means" +
                                grid_path.extension().string());
    std::string means = std::string(ReplicationReport::csv_header()) + "\n";
    for (const auto& row : res.mean_rows) means += row + "\n";
    write_file(means_path, means);

    std::printf("wrote %s (%zu rows)\n", grid_path.string().c_str(), res.rows.size());
    std::printf("wrote %s (%zu rows)\n", means_path.string().c_str(), res.mean_rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"session-continuity simulator for tunnel-switched mobile cores", "mecssc"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "execute one scenario and write its artifacts");
    run->add_option("scenario", run_args.scenario, "scenario script (.scn)")->required();
    CLI::Option* run_seed =
        run->add_option("--seed", run_args.seed, "override the scenario's random seed");
    run->add_option("--out", run_args.out_dir, "output directory")->envname("MECSSC_OUT_DIR");
    run->add_option("--set", run_args.sets, "override a timing constant, key=value");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "run a strategy/population grid to CSV");
    sweep->add_option("--config", sweep_args.config, "sweep description (.swp)")->required();
    CLI::Option* sweep_seed =
        sweep->add_option("--seed", sweep_args.seed, "override the base repetition seed");
    sweep->add_option("--out", sweep_args.out_dir, "output directory")->envname("MECSSC_OUT_DIR");
    sweep->add_option("--set", sweep_args.sets, "override a timing constant, key=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (*e.what()) std::cerr << e.what() << "\n";
        print_usage();
        return 2;
    }

    try {
        if (run->parsed()) {
            run_args.seed_given = run_seed->count() > 0;
            return cmd_run(run_args);
        }
        sweep_args.seed_given = sweep_seed->count() > 0;
        return cmd_sweep(sweep_args);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}
