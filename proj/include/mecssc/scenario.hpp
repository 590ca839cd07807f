#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "replication.hpp"
#include "controller.hpp"

namespace mecssc {

/// Timing knobs of the simulated fabric. Everything a scenario's `const`
/// line or the command line's --set flag can override lives here.
struct SimConstants {
    TimeUs ctrl_one_way_us = 5000;  // switch-to-controller latency, one way
    TimeUs csr_proc_us = 10000;     // gateway work for a session create
    TimeUs mbr_proc_us = 1000;      // gateway work for a bearer update
    TimeUs gtp_proc_us = 100;       // tunnel encap/decap cost per pass
    TimeUs jitter_us = 0;           // per-hop random extra, 0 disables

    bool set(const std::string& key, double value) {
        if (key == "ctrl_one_way_us") ctrl_one_way_us = TimeUs(value);
        else if (key == "csr_proc_us") csr_proc_us = TimeUs(value);
        else if (key == "mbr_proc_us") mbr_proc_us = TimeUs(value);
        else if (key == "gtp_proc_us") gtp_proc_us = TimeUs(value);
        else if (key == "jitter_us") jitter_us = TimeUs(value);
        else return false;
        return true;
    }
};

struct ScenarioError : std::runtime_error {
    int line;
    ScenarioError(int line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct NodeDecl {
    std::string name;
    std::string kind;  // switch | mme | spgw | enb | server
    std::map<std::string, std::string> attrs;
    int line = 0;
};

struct LinkDecl {
    std::string a_node, a_iface;
    std::string b_node, b_iface;
    TimeUs latency_us = 250;
    double bandwidth_bps = 1e9;
    int line = 0;
};

struct ScenarioCommand {
    enum class Kind {
        Attach,
        Detach,
        Deploy,
        Divert,
        UndoDivert,
        Probe,
        Report,
        Dump,
        Expect,
    };

    TimeUs at = 0;
    Kind kind = Kind::Report;
    std::string ue;              // subscriber name, ue<N>
    TimeUs period_us = 0;        // probe
    int count = 0;               // probe
    std::string dump_switch;     // dump
    std::vector<int> dump_tables;
    std::string metric;          // expect: gap rtt lost delivered downtime elapsed
    std::string op;              // expect: == != <= >= < >
    double value = 0;            // expect threshold, microseconds for durations
    std::string text;            // source text, echoed into the trace
    int line = 0;
};

struct Scenario {
    std::string name = "scenario";
    TimeUs horizon_us = 60'000'000;
    std::uint32_t seed = 1;
    ReplicationStrategy strategy = ReplicationStrategy::Naive;
    InterceptMode intercept = InterceptMode::Mirror;
    SimConstants constants;
    bool capture = true;
    std::vector<NodeDecl> nodes;
    std::vector<LinkDecl> links;
    std::vector<ScenarioCommand> commands;
};

inline TimeUs parse_duration_us(const std::string& s, int line) {
    std::size_t unit_at = s.size();
    while (unit_at > 0 && !std::isdigit(static_cast<unsigned char>(s[unit_at - 1]))
           && s[unit_at - 1] != '.')
        --unit_at;
    std::string num = s.substr(0, unit_at);
    std::string unit = s.substr(unit_at);
    double mult;
    if (unit.empty() || unit == "us") mult = 1;
    else if (unit == "ms") mult = 1e3;
    else if (unit == "s") mult = 1e6;
    else throw ScenarioError(line, "unknown time unit '" + unit + "' in '" + s + "'");
    try {
        std::size_t used = 0;
        double v = std::stod(num, &used);
        if (used != num.size() || v < 0) throw std::invalid_argument(num);
        return TimeUs(v * mult + 0.5);
    } catch (const std::exception&) {
        throw ScenarioError(line, "bad duration '" + s + "'");
    }
}

inline double parse_bandwidth_bps(const std::string& s, int line) {
    double mult = 1;
    std::string num = s;
    if (!s.empty()) {
        char last = s.back();
        if (last == 'k' || last == 'K') mult = 1e3;
        else if (last == 'm' || last == 'M') mult = 1e6;
        else if (last == 'g' || last == 'G') mult = 1e9;
        if (mult != 1) num = s.substr(0, s.size() - 1);
    }
    try {
        std::size_t used = 0;
        double v = std::stod(num, &used);
        if (used != num.size() || v <= 0) throw std::invalid_argument(num);
        return v * mult;
    } catch (const std::exception&) {
        throw ScenarioError(line, "bad bandwidth '" + s + "'");
    }
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// key=value tokens into a map; bare tokens map to "1" (flags).
inline std::map<std::string, std::string> parse_attrs(const std::vector<std::string>& toks,
                                                      std::size_t from) {
    std::map<std::string, std::string> attrs;
    for (std::size_t i = from; i < toks.size(); ++i) {
        auto eq = toks[i].find('=');
        if (eq == std::string::npos) attrs[toks[i]] = "1";
        else attrs[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
    }
    return attrs;
}

inline int parse_ue_index(const std::string& ue, int line) {
    if (ue.size() < 3 || ue.compare(0, 2, "ue") != 0)
        throw ScenarioError(line, "subscriber names look like ue1, ue2, ... got '" + ue + "'");
    for (std::size_t i = 2; i < ue.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(ue[i])))
            throw ScenarioError(line, "subscriber names look like ue1, ue2, ... got '" + ue + "'");
    return std::stoi(ue.substr(2));
}

inline ScenarioCommand parse_command(TimeUs at, const std::vector<std::string>& toks,
                                     std::size_t from, const std::string& raw, int line) {
    ScenarioCommand cmd;
    cmd.at = at;
    cmd.text = raw;
    cmd.line = line;
    const std::string& verb = toks[from];
    auto need = [&](std::size_t n, const char* what) {
        if (toks.size() - from - 1 < n)
            throw ScenarioError(line, std::string(verb) + " needs " + what);
    };
    using K = ScenarioCommand::Kind;
    if (verb == "attach" || verb == "detach" || verb == "divert" || verb == "undo_divert") {
        need(1, "a subscriber name");
        cmd.kind = verb == "attach"   ? K::Attach
                   : verb == "detach" ? K::Detach
                   : verb == "divert" ? K::Divert
                                      : K::UndoDivert;
        cmd.ue = toks[from + 1];
        parse_ue_index(cmd.ue, line);
    } else if (verb == "deploy") {
        cmd.kind = K::Deploy;
    } else if (verb == "probe") {
        need(1, "a subscriber name");
        cmd.kind = K::Probe;
        cmd.ue = toks[from + 1];
        parse_ue_index(cmd.ue, line);
        auto attrs = parse_attrs(toks, from + 2);
        auto p = attrs.find("period");
        auto c = attrs.find("count");
        if (p == attrs.end() || c == attrs.end())
            throw ScenarioError(line, "probe needs period=<duration> and count=<n>");
        cmd.period_us = parse_duration_us(p->second, line);
        cmd.count = std::stoi(c->second);
        if (cmd.period_us <= 0 || cmd.count <= 0)
            throw ScenarioError(line, "probe period and count must be positive");
    } else if (verb == "report") {
        cmd.kind = K::Report;
    } else if (verb == "dump") {
        need(2, "a switch name and at least one table id");
        cmd.kind = K::Dump;
        cmd.dump_switch = toks[from + 1];
        for (std::size_t i = from + 2; i < toks.size(); ++i)
            cmd.dump_tables.push_back(std::stoi(toks[i]));
    } else if (verb == "expect") {
        need(2, "a metric, an operator and a value");
        cmd.kind = K::Expect;
        cmd.metric = toks[from + 1];
        std::size_t i = from + 2;
        bool per_ue = cmd.metric == "gap" || cmd.metric == "rtt" || cmd.metric == "lost" ||
                      cmd.metric == "delivered";
        bool scalar = cmd.metric == "downtime" || cmd.metric == "elapsed" ||
                      cmd.metric == "stored" || cmd.metric == "tx";
        if (!per_ue && !scalar) throw ScenarioError(line, "unknown metric '" + cmd.metric + "'");
        if (per_ue) {
            if (i >= toks.size()) throw ScenarioError(line, "expect " + cmd.metric + " needs a subscriber");
            cmd.ue = toks[i++];
            parse_ue_index(cmd.ue, line);
        }
        if (i + 1 >= toks.size()) throw ScenarioError(line, "expect needs an operator and a value");
        cmd.op = toks[i];
        if (cmd.op != "==" && cmd.op != "!=" && cmd.op != "<=" && cmd.op != ">=" &&
            cmd.op != "<" && cmd.op != ">")
            throw ScenarioError(line, "unknown operator '" + cmd.op + "'");
        const std::string& val = toks[i + 1];
        bool duration_metric = cmd.metric == "gap" || cmd.metric == "rtt" ||
                               cmd.metric == "downtime" || cmd.metric == "elapsed";
        cmd.value = duration_metric ? double(parse_duration_us(val, line)) : std::stod(val);
    } else {
        throw ScenarioError(line, "unknown command '" + verb + "'");
    }
    return cmd;
}

}  // namespace detail

/// Parses the declarative scenario text: directives, a node list, a link
/// list, and timed commands. Any reference to an undeclared node fails here,
/// before the simulation is even built.
inline Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    int line_no = 0;
    std::size_t pos = 0;
    std::map<std::string, const NodeDecl*> by_name;

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
        if (head == "name") {
            if (toks.size() != 2) throw ScenarioError(line_no, "name takes one word");
            sc.name = toks[1];
        } else if (head == "horizon") {
            if (toks.size() != 2) throw ScenarioError(line_no, "horizon takes one duration");
            sc.horizon_us = parse_duration_us(toks[1], line_no);
        } else if (head == "seed") {
            if (toks.size() != 2) throw ScenarioError(line_no, "seed takes one integer");
            sc.seed = std::uint32_t(std::stoul(toks[1]));
        } else if (head == "strategy") {
            if (toks.size() != 2) throw ScenarioError(line_no, "strategy takes one name");
            try {
                sc.strategy = parse_strategy(toks[1]);
            } catch (const std::invalid_argument& e) {
                throw ScenarioError(line_no, e.what());
            }
        } else if (head == "intercept") {
            if (toks.size() != 2) throw ScenarioError(line_no, "intercept takes one name");
            if (toks[1] == "mirror") sc.intercept = InterceptMode::Mirror;
            else if (toks[1] == "store_and_forward") sc.intercept = InterceptMode::StoreAndForward;
            else throw ScenarioError(line_no, "intercept is mirror or store_and_forward");
        } else if (head == "const") {
            if (toks.size() != 3) throw ScenarioError(line_no, "const takes a key and a value");
            double v;
            try {
                v = std::stod(toks[2]);
            } catch (const std::exception&) {
                throw ScenarioError(line_no, "bad constant value '" + toks[2] + "'");
            }
            if (!sc.constants.set(toks[1], v))
                throw ScenarioError(line_no, "unknown constant '" + toks[1] + "'");
        } else if (head == "node") {
            if (toks.size() < 3) throw ScenarioError(line_no, "node takes a name and a kind");
            NodeDecl n;
            n.name = toks[1];
            n.kind = toks[2];
            n.attrs = detail::parse_attrs(toks, 3);
            n.line = line_no;
            if (n.kind != "switch" && n.kind != "mme" && n.kind != "spgw" && n.kind != "enb" &&
                n.kind != "server")
                throw ScenarioError(line_no, "unknown node kind '" + n.kind + "'");
            if (by_name.count(n.name)) throw ScenarioError(line_no, "duplicate node '" + n.name + "'");
            sc.nodes.push_back(std::move(n));
            by_name[sc.nodes.back().name] = &sc.nodes.back();
        } else if (head == "link") {
            if (toks.size() < 3) throw ScenarioError(line_no, "link takes two node:iface endpoints");
            LinkDecl l;
            l.line = line_no;
            auto split_ep = [&](const std::string& ep, std::string& node, std::string& iface) {
                auto colon = ep.find(':');
                if (colon == std::string::npos || colon == 0 || colon + 1 >= ep.size())
                    throw ScenarioError(line_no, "link endpoint must be node:iface, got '" + ep + "'");
                node = ep.substr(0, colon);
                iface = ep.substr(colon + 1);
            };
            split_ep(toks[1], l.a_node, l.a_iface);
            split_ep(toks[2], l.b_node, l.b_iface);
            auto attrs = detail::parse_attrs(toks, 3);
            if (auto it = attrs.find("latency"); it != attrs.end())
                l.latency_us = parse_duration_us(it->second, line_no);
            if (auto it = attrs.find("bw"); it != attrs.end())
                l.bandwidth_bps = parse_bandwidth_bps(it->second, line_no);
            sc.links.push_back(std::move(l));
        } else if (head == "at") {
            if (toks.size() < 3) throw ScenarioError(line_no, "at takes a time and a command");
            TimeUs at = parse_duration_us(toks[1], line_no);
            sc.commands.push_back(detail::parse_command(at, toks, 2, raw, line_no));
        } else {
            throw ScenarioError(line_no, "unknown directive '" + head + "'");
        }
        if (pos > text.size()) break;
    }

    for (const auto& l : sc.links) {
        if (!by_name.count(l.a_node))
            throw ScenarioError(l.line, "link references unknown node '" + l.a_node + "'");
        if (!by_name.count(l.b_node))
            throw ScenarioError(l.line, "link references unknown node '" + l.b_node + "'");
    }
    for (const auto& c : sc.commands) {
        if (c.kind == ScenarioCommand::Kind::Dump && !by_name.count(c.dump_switch))
            throw ScenarioError(c.line, "dump references unknown node '" + c.dump_switch + "'");
    }
    return sc;
}

/// The reference deployment every shipped scenario uses: one GTP-aware
/// switch between the base station and both gateways, a packet-network
/// switch behind their SGi interfaces, the manager with its two-port
/// signalling switch, and one correspondent host. Node order fixes the
/// derived MAC addresses, so it is part of the contract.
inline Scenario canonical_topology(ReplicationStrategy strategy,
                                   InterceptMode intercept = InterceptMode::Mirror) {
    Scenario sc;
    sc.strategy = strategy;
    sc.intercept = intercept;
    auto node = [&](const char* name, const char* kind,
                    std::initializer_list<std::pair<const char*, const char*>> attrs) {
        NodeDecl n;
        n.name = name;
        n.kind = kind;
        for (auto& [k, v] : attrs) n.attrs[k] = v;
        sc.nodes.push_back(std::move(n));
    };
    node("sw", "switch", {{"ports", "3"}, {"gtp", "1"}, {"ip", "10.0.2.2"}});
    node("pdnsw", "switch", {{"ports", "3"}});
    node("mme", "mme", {{"ip", "10.0.9.1"}});
    node("spgw1", "spgw",
         {{"ctrl", "10.0.9.11"}, {"user", "10.0.2.1"}, {"sgi", "10.0.5.1"}, {"pool", "10.8.0.0/16"}});
    node("spgw2", "spgw",
         {{"ctrl", "10.0.9.12"}, {"user", "10.0.2.3"}, {"sgi", "10.0.5.2"}, {"pool", "10.8.0.0/16"}});
    node("enb", "enb", {{"ip", "10.0.2.10"}});
    node("srv", "server", {{"ip", "10.0.5.7"}, {"route", "10.8.0.0/16:spgw1"}});
    auto link = [&](const char* a_node, const char* a_iface, const char* b_node,
                    const char* b_iface) {
        LinkDecl l;
        l.a_node = a_node;
        l.a_iface = a_iface;
        l.b_node = b_node;
        l.b_iface = b_iface;
        sc.links.push_back(std::move(l));
    };
    link("enb", "s1u", "sw", "1");
    link("spgw1", "user", "sw", "2");
    link("spgw2", "user", "sw", "3");
    link("spgw1", "ctrl", "mme", "1");
    link("spgw2", "ctrl", "mme", "2");
    link("spgw1", "sgi", "pdnsw", "1");
    link("spgw2", "sgi", "pdnsw", "2");
    link("srv", "eth", "pdnsw", "3");
    return sc;
}

/// Scripted benchmark run on the canonical deployment: attach a population,
/// bring up the replica, move part of the population, report. Times are
/// derived from the constants so each phase finishes before the next starts.
inline Scenario benchmark_scenario(ReplicationStrategy strategy, int registered, int moved,
                                   InterceptMode intercept = InterceptMode::Mirror,
                                   SimConstants constants = {}) {
    Scenario sc = canonical_topology(strategy, intercept);
    sc.constants = constants;
    sc.name = std::string(strategy_name(strategy)) + "_" + std::to_string(registered) + "_" +
              std::to_string(moved);

    const TimeUs per_attach = constants.csr_proc_us + constants.mbr_proc_us;
    const TimeUs per_replay = per_attach + 4 * constants.ctrl_one_way_us + 2000;
    auto cmd = [&](TimeUs at, ScenarioCommand::Kind kind, const std::string& ue = {}) {
        ScenarioCommand c;
        c.at = at;
        c.kind = kind;
        c.ue = ue;
        c.text = ue.empty() ? "scripted" : "scripted " + ue;
        sc.commands.push_back(std::move(c));
    };

    TimeUs t = 100'000;
    for (int i = 1; i <= registered; ++i) cmd(t, ScenarioCommand::Kind::Attach, "ue" + std::to_string(i));
    t += registered * per_attach * 13 / 10 + 200'000;
    cmd(t, ScenarioCommand::Kind::Deploy);
    if (strategy == ReplicationStrategy::Naive) t += registered * per_replay * 12 / 10;
    t += 100'000;
    for (int i = 1; i <= moved; ++i) cmd(t, ScenarioCommand::Kind::Divert, "ue" + std::to_string(i));
    if (strategy == ReplicationStrategy::Selective) t += moved * per_replay * 12 / 10;
    t += 200'000;
    cmd(t, ScenarioCommand::Kind::Report);
    sc.horizon_us = t + 100'000;
    return sc;
}

}  // namespace mecssc
