// harness/config.hpp
// Flat `key = value` experiment configuration with per-task defaults.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhodarts/densmat.hpp"
#include "rhodarts/export.hpp"

namespace rhodarts::harness {

/// Invalid or inconsistent configuration (exit status 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TaskKind { StateInit, MaxCut, Classify };
enum class Algorithm { RhoMacro, RhoMicro, QDarts };

inline std::string to_string(TaskKind t) {
    switch (t) {
        case TaskKind::StateInit: return "state_init";
        case TaskKind::MaxCut: return "maxcut";
        case TaskKind::Classify: return "classify";
    }
    return "?";
}

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::RhoMacro: return "rho_macro";
        case Algorithm::RhoMicro: return "rho_micro";
        case Algorithm::QDarts: return "qdarts";
    }
    return "?";
}

struct ExperimentConfig {
    TaskKind task = TaskKind::StateInit;
    Algorithm algorithm = Algorithm::RhoMacro;

    // state_init
    std::string target = "ghz";
    // all tasks
    int n = 3;
    std::size_t layers = 6;
    std::size_t n_s = 2;   // micro subcircuit width
    // maxcut
    double p_edge = 0.5;
    std::uint64_t graph_seed = 0;
    std::string graph_file;
    std::string structure = "edges";  // micro: "edges" or "linear"
    // classify
    std::string dataset = "mnist";  // mnist | synthetic
    std::string data_dir = "data/mnist01";
    std::string encoding = "angle";
    std::size_t batch = 128;
    std::size_t synthetic_train = 1000;
    std::size_t synthetic_test = 200;
    std::uint64_t data_seed = 0;

    bool hidden_units = false;
    double s0 = 0.0, s1 = 0.1, s_theta = 0.01;
    double lr = 0.1;
    std::size_t t_max = 100;
    bool restart = true;
    std::size_t epochs = 1000;
    bool schedule_per_epoch = false;
    std::size_t checkpoint_every = 0;

    // baseline
    double tau = 0.05;
    std::size_t inner_iter = 10;
    std::size_t trajectories = 1;

    std::string noise_kind = "none";
    double noise_p = 0.0;
    std::vector<double> p_grid;  // empty: single noise level noise_p

    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t jobs = 1;
    std::string out = "results";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' is out of range: '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

}  // namespace detail

using KeyValues = std::map<std::string, std::string>;

/// Parse `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        kv[key] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

/// `key=value` override from the command line.
inline void apply_override(KeyValues& kv, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    kv[detail::trim(assignment.substr(0, eq))] = detail::trim(assignment.substr(eq + 1));
}

/// Resolve key/values into a config: task defaults first, then explicit keys.
inline ExperimentConfig resolve(const KeyValues& kv_in) {
    KeyValues kv = kv_in;
    ExperimentConfig c;
    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    const std::string task = take("task").value_or("state_init");
    if (task == "state_init") c.task = TaskKind::StateInit;
    else if (task == "maxcut") c.task = TaskKind::MaxCut;
    else if (task == "classify") c.task = TaskKind::Classify;
    else throw ConfigError("unknown task '" + task + "' (expected state_init, maxcut or classify)");

    const std::string alg = take("algorithm").value_or("rho_macro");
    if (alg == "rho_macro") c.algorithm = Algorithm::RhoMacro;
    else if (alg == "rho_micro") c.algorithm = Algorithm::RhoMicro;
    else if (alg == "qdarts") c.algorithm = Algorithm::QDarts;
    else throw ConfigError("unknown algorithm '" + alg + "' (expected rho_macro, rho_micro or qdarts)");

    // Task defaults.
    switch (c.task) {
        case TaskKind::StateInit: c.n = 3; break;
        case TaskKind::MaxCut:
            c.n = 10;
            c.layers = c.algorithm == Algorithm::RhoMicro ? 3 : 15;
            break;
        case TaskKind::Classify:
            c.n = 8;
            c.layers = 15;
            c.epochs = 10;
            c.s0 = -0.1;
            c.lr = 0.01 * std::sqrt(128.0);
            c.t_max = 10;
            c.schedule_per_epoch = true;
            break;
    }
    if (auto v = take("n")) c.n = static_cast<int>(detail::to_uint("n", *v));
    if (c.task == TaskKind::StateInit) c.layers = static_cast<std::size_t>(2 * c.n);

    auto set_size = [&](const char* key, std::size_t& dst) {
        if (auto v = take(key)) dst = static_cast<std::size_t>(detail::to_uint(key, *v));
    };
    auto set_u64 = [&](const char* key, std::uint64_t& dst) {
        if (auto v = take(key)) dst = detail::to_uint(key, *v);
    };
    auto set_double = [&](const char* key, double& dst) {
        if (auto v = take(key)) dst = detail::to_double(key, *v);
    };
    auto set_bool = [&](const char* key, bool& dst) {
        if (auto v = take(key)) dst = detail::to_bool(key, *v);
    };
    auto set_string = [&](const char* key, std::string& dst) {
        if (auto v = take(key)) dst = *v;
    };

    set_string("target", c.target);
    set_size("layers", c.layers);
    set_size("n_s", c.n_s);
    set_double("p_edge", c.p_edge);
    set_u64("graph_seed", c.graph_seed);
    set_string("graph_file", c.graph_file);
    set_string("structure", c.structure);
    set_string("dataset", c.dataset);
    set_string("data_dir", c.data_dir);
    set_string("encoding", c.encoding);
    set_size("batch", c.batch);
    set_size("synthetic_train", c.synthetic_train);
    set_size("synthetic_test", c.synthetic_test);
    set_u64("data_seed", c.data_seed);
    set_bool("hidden_units", c.hidden_units);
    set_double("s0", c.s0);
    set_double("s1", c.s1);
    set_double("s_theta", c.s_theta);
    set_double("lr", c.lr);
    set_size("t_max", c.t_max);
    set_bool("restart", c.restart);
    set_size("epochs", c.epochs);
    set_bool("schedule_per_epoch", c.schedule_per_epoch);
    set_size("checkpoint_every", c.checkpoint_every);
    set_double("tau", c.tau);
    set_size("inner_iter", c.inner_iter);
    set_size("trajectories", c.trajectories);
    set_string("noise.kind", c.noise_kind);
    set_double("noise.p", c.noise_p);
    if (auto v = take("noise.p_grid")) {
        c.p_grid.clear();
        for (const auto& s : detail::split_list(*v)) c.p_grid.push_back(detail::to_double("noise.p_grid", s));
    }
    if (auto v = take("seeds")) {
        c.seeds.clear();
        for (const auto& s : detail::split_list(*v)) c.seeds.push_back(detail::to_uint("seeds", s));
    }
    set_size("jobs", c.jobs);
    set_string("out", c.out);

    if (!kv.empty()) throw ConfigError("unknown configuration key '" + kv.begin()->first + "'");

    // Consistency checks.
    if (c.n < 2) throw ConfigError("n must be at least 2");
    if (c.n > 12) throw ConfigError("n above 12 exceeds the density-matrix memory budget");
    if (c.layers == 0) throw ConfigError("layers must be positive");
    if (c.epochs == 0) throw ConfigError("epochs must be positive");
    if (c.t_max == 0) throw ConfigError("t_max must be positive");
    if (!(c.lr > 0)) throw ConfigError("lr must be positive");
    if (!(c.s1 > 0)) throw ConfigError("s1 must be positive");
    if (c.seeds.empty()) throw ConfigError("at least one seed is required");
    if (c.jobs == 0) throw ConfigError("jobs must be positive");
    if (c.target != "ghz" && c.target != "w") throw ConfigError("target must be ghz or w");
    if (c.encoding != "angle" && c.encoding != "dense") throw ConfigError("encoding must be angle or dense");
    if (c.dataset != "mnist" && c.dataset != "synthetic") throw ConfigError("dataset must be mnist or synthetic");
    if (c.structure != "edges" && c.structure != "linear") throw ConfigError("structure must be edges or linear");
    if (!(c.p_edge > 0.0 && c.p_edge <= 1.0)) throw ConfigError("p_edge must lie in (0, 1]");
    if (!(c.tau > 0)) throw ConfigError("tau must be positive");
    if (c.inner_iter == 0 || c.trajectories == 0) throw ConfigError("inner_iter and trajectories must be positive");
    if (c.batch == 0) throw ConfigError("batch must be positive");
    NoiseKind kind;
    try {
        kind = parse_noise_kind(c.noise_kind);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    std::vector<double> ps = c.p_grid.empty() ? std::vector<double>{c.noise_p} : c.p_grid;
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("noise probabilities must lie in [0, 1]");
    }
    if (!c.p_grid.empty() && kind == NoiseKind::None) throw ConfigError("noise.p_grid needs a noise.kind");
    if (c.algorithm == Algorithm::QDarts && kind == NoiseKind::Depolarizing) {
        throw ConfigError("qdarts simulates state vectors and cannot model depolarizing noise");
    }
    if (c.algorithm == Algorithm::RhoMicro) {
        if (c.task == TaskKind::MaxCut && c.structure == "edges") c.n_s = 2;
        if (c.n_s < 2 || static_cast<int>(c.n_s) > c.n) throw ConfigError("n_s must lie in [2, n]");
    }
    if (c.task == TaskKind::Classify && c.algorithm == Algorithm::RhoMicro && c.structure == "edges") {
        throw ConfigError("edge structures apply to maxcut only; use structure = linear");
    }
    if (c.task == TaskKind::StateInit && c.algorithm == Algorithm::RhoMicro && c.structure == "edges") {
        throw ConfigError("edge structures apply to maxcut only; use structure = linear");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    KeyValues kv = parse_key_values(in);
    for (const auto& o : overrides) apply_override(kv, o);
    return resolve(kv);
}

/// Every key with its resolved value, one `key = value` per line; resolve() reads it back.
inline std::string render(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> kv;
    auto num = [](double v) { return format_double(v); };
    kv.emplace_back("task", to_string(c.task));
    kv.emplace_back("algorithm", to_string(c.algorithm));
    kv.emplace_back("n", std::to_string(c.n));
    kv.emplace_back("layers", std::to_string(c.layers));
    kv.emplace_back("n_s", std::to_string(c.n_s));
    kv.emplace_back("target", c.target);
    kv.emplace_back("p_edge", num(c.p_edge));
    kv.emplace_back("graph_seed", std::to_string(c.graph_seed));
    kv.emplace_back("graph_file", c.graph_file);
    kv.emplace_back("structure", c.structure);
    kv.emplace_back("dataset", c.dataset);
    kv.emplace_back("data_dir", c.data_dir);
    kv.emplace_back("encoding", c.encoding);
    kv.emplace_back("batch", std::to_string(c.batch));
    kv.emplace_back("synthetic_train", std::to_string(c.synthetic_train));
    kv.emplace_back("synthetic_test", std::to_string(c.synthetic_test));
    kv.emplace_back("data_seed", std::to_string(c.data_seed));
    kv.emplace_back("hidden_units", c.hidden_units ? "true" : "false");
    kv.emplace_back("s0", num(c.s0));
    kv.emplace_back("s1", num(c.s1));
    kv.emplace_back("s_theta", num(c.s_theta));
    kv.emplace_back("lr", num(c.lr));
    kv.emplace_back("t_max", std::to_string(c.t_max));
    kv.emplace_back("restart", c.restart ? "true" : "false");
    kv.emplace_back("epochs", std::to_string(c.epochs));
    kv.emplace_back("schedule_per_epoch", c.schedule_per_epoch ? "true" : "false");
    kv.emplace_back("checkpoint_every", std::to_string(c.checkpoint_every));
    kv.emplace_back("tau", num(c.tau));
    kv.emplace_back("inner_iter", std::to_string(c.inner_iter));
    kv.emplace_back("trajectories", std::to_string(c.trajectories));
    kv.emplace_back("noise.kind", c.noise_kind);
    kv.emplace_back("noise.p", num(c.noise_p));
    std::vector<std::string> grid, seeds;
    for (double p : c.p_grid) grid.push_back(num(p));
    for (auto s : c.seeds) seeds.push_back(std::to_string(s));
    if (!grid.empty()) kv.emplace_back("noise.p_grid", detail::join(grid));
    kv.emplace_back("seeds", detail::join(seeds));
    kv.emplace_back("jobs", std::to_string(c.jobs));
    kv.emplace_back("out", c.out);
    std::string s;
    for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
    return s;
}

}  // namespace rhodarts::harness
