// harness/runner.hpp
// Seeded repetitions of one experiment, aggregation, and artifact emission.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rhodarts/export.hpp"
#include "rhodarts/harness/config.hpp"
#include "rhodarts/qdarts.hpp"
#include "rhodarts/search.hpp"

namespace rhodarts::harness {

struct RunRecord {
    std::string run;  // e.g. "s0" or "p0.05_s1"
    std::uint64_t seed = 0;
    double noise_p = 0;
    std::vector<EpochLog> history;
    std::vector<std::pair<std::string, double>> final_metrics;
    double wall_time_s = 0;
    ArchitectureRecord architecture;
};

/// Task data shared by every repetition of an experiment.
struct PreparedTask {
    std::optional<StateInitTask> state;
    std::optional<MaxCutTask> maxcut;
    std::optional<ClassifyTask> classify;
    std::optional<SuperCircuitStructure> structure;
};

inline SuperCircuitStructure linear_structure(int n, std::size_t n_s) {
    SuperCircuitStructure s{n, {}};
    for (int start = 0; start + static_cast<int>(n_s) <= n; ++start) {
        std::vector<int> row;
        for (std::size_t k = 0; k < n_s; ++k) row.push_back(start + static_cast<int>(k));
        s.rows.push_back(row);
    }
    return s;
}

inline PreparedTask prepare_task(const ExperimentConfig& c) {
    PreparedTask t;
    switch (c.task) {
        case TaskKind::StateInit: t.state.emplace(parse_target_kind(c.target), c.n); break;
        case TaskKind::MaxCut:
            if (!c.graph_file.empty()) {
                Graph g = read_graph(c.graph_file);
                if (g.n != c.n) throw ConfigError("graph file has " + std::to_string(g.n) + " vertices but n = " +
                                                  std::to_string(c.n));
                t.maxcut.emplace(std::move(g));
            } else {
                t.maxcut.emplace(erdos_renyi(c.n, c.p_edge, c.graph_seed));
            }
            break;
        case TaskKind::Classify: {
            Dataset train, test;
            if (c.dataset == "mnist") {
                train = load_mnist_binary(c.data_dir, "train");
                test = load_mnist_binary(c.data_dir, "t10k");
            } else {
                train = synthetic_two_gaussian(c.synthetic_train, c.data_seed, 784, "train");
                test = synthetic_two_gaussian(c.synthetic_test, c.data_seed, 784, "test");
            }
            t.classify.emplace(make_classify_task(train, test, c.n, parse_encoding(c.encoding)));
            break;
        }
    }
    if (c.algorithm == Algorithm::RhoMicro) {
        t.structure = c.structure == "edges" ? edges_to_supercircuit(t.maxcut->graph) : linear_structure(c.n, c.n_s);
    }
    return t;
}

inline SearchConfig search_config(const ExperimentConfig& c, double noise_p, const PreparedTask& t) {
    SearchConfig s;
    s.layers = c.layers;
    s.epochs = c.epochs;
    s.hidden_units = c.hidden_units;
    s.entropy = {c.s0, c.s1};
    s.s_theta = c.s_theta;
    s.adam.lr = c.lr;
    s.adam.t_max = c.t_max;
    s.adam.restart = c.restart;
    const NoiseKind kind = parse_noise_kind(c.noise_kind);
    if (kind != NoiseKind::None) s.noise = NoiseSpec(kind, noise_p);
    s.tape.checkpoint_every = c.checkpoint_every;
    s.schedule_per_epoch = c.schedule_per_epoch;
    s.structure = t.structure;
    return s;
}

/// One seeded repetition at one noise level.
inline RunRecord run_single(const ExperimentConfig& c, const PreparedTask& t, std::uint64_t seed, double noise_p) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.seed = seed;
    rec.noise_p = noise_p;
    rec.run = (c.p_grid.empty() ? std::string{} : "p" + format_double(noise_p) + "_") + "s" + std::to_string(seed);
    const SearchConfig sc = search_config(c, noise_p, t);

    SearchResult res;
    if (c.algorithm == Algorithm::QDarts) {
        GumbelCfg g{c.tau, c.inner_iter, c.trajectories};
        std::unique_ptr<PureObjective> obj;
        if (t.state) obj = std::make_unique<StateInitPure>(*t.state);
        else if (t.maxcut) obj = std::make_unique<MaxCutPure>(*t.maxcut);
        else obj = std::make_unique<ClassifyPure>(*t.classify, c.batch, seed);
        res = qdarts_search(*obj, sc, g, seed);
    } else {
        std::unique_ptr<Objective> obj;
        if (t.state) obj = std::make_unique<LinearObjective>(LinearObjective::state_init(*t.state, sc.tape));
        else if (t.maxcut) obj = std::make_unique<LinearObjective>(LinearObjective::maxcut(*t.maxcut, sc.tape));
        else obj = std::make_unique<ClassifyObjective>(*t.classify, c.batch, seed);
        res = rho_search(*obj, sc, seed);
    }
    rec.history = res.history;

    const auto& th = res.theta.values;
    if (t.state) {
        rec.final_metrics.emplace_back("fidelity", discrete_fidelity(res.program, res.arch, th, t.state->target));
    } else if (t.maxcut) {
        const auto m = discrete_maxcut_metrics(res.program, res.arch, th, *t.maxcut);
        rec.final_metrics.emplace_back("E_m", m.e_m);
        rec.final_metrics.emplace_back("P_m", m.p_m);
    } else {
        const auto& ct = *t.classify;
        rec.final_metrics.emplace_back("test_accuracy",
                                       discrete_accuracy(res.program, res.arch, th, ct.test_states, ct.test_labels));
        rec.final_metrics.emplace_back(
            "train_accuracy", discrete_accuracy(res.program, res.arch, th, ct.train_states, ct.train_labels));
        rec.final_metrics.emplace_back("pca_explained_variance", ct.explained_variance_ratio);
    }
    rec.final_metrics.emplace_back("arch_probability", arch_probability(res.arch, gate_probs(res.logits)));
    rec.architecture = make_record(res.program, res.arch, th, t.structure);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

/// Every (noise level, seed) repetition, in deterministic order regardless of `jobs`.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& c) {
    const PreparedTask t = prepare_task(c);
    std::vector<std::pair<double, std::uint64_t>> work;
    const std::vector<double> ps = c.p_grid.empty() ? std::vector<double>{c.noise_p} : c.p_grid;
    for (double p : ps) {
        for (auto s : c.seeds) work.emplace_back(p, s);
    }
    std::vector<RunRecord> out(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < work.size();) {
            try {
                out[i] = run_single(c, t, work[i].second, work[i].first);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(c.jobs, work.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string metrics_csv(const std::vector<RunRecord>& records) {
    std::string s = "run,epoch,key,value\n";
    for (const auto& r : records) {
        for (std::size_t e = 0; e < r.history.size(); ++e) {
            const auto& h = r.history[e];
            const std::string prefix = r.run + "," + std::to_string(e) + ",";
            s += prefix + "loss," + csv_double(h.loss) + "\n";
            s += prefix + "task_loss," + csv_double(h.task_loss) + "\n";
            s += prefix + "entropy," + csv_double(h.entropy) + "\n";
            s += prefix + "lr," + csv_double(h.lr) + "\n";
        }
        for (const auto& [k, v] : r.final_metrics) s += r.run + ",final," + k + "," + csv_double(v) + "\n";
    }
    return s;
}

struct SummaryRow {
    std::string group;  // "all" or "p=<value>"
    std::string key;
    double mean = 0, std = 0;
    std::size_t n = 0;
};

/// Mean and unbiased (n - 1) standard deviation of each final metric and the wall time.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records, bool by_noise) {
    std::map<std::string, std::vector<const RunRecord*>> groups;
    std::vector<std::string> order;
    for (const auto& r : records) {
        const std::string g = by_noise ? "p=" + format_double(r.noise_p) : "all";
        if (!groups.count(g)) order.push_back(g);
        groups[g].push_back(&r);
    }
    std::vector<SummaryRow> rows;
    for (const auto& g : order) {
        const auto& rs = groups[g];
        std::vector<std::string> keys;
        for (const auto& [k, v] : rs.front()->final_metrics) keys.push_back(k);
        keys.push_back("wall_time_s");
        for (const auto& key : keys) {
            std::vector<double> vals;
            for (const auto* r : rs) {
                if (key == "wall_time_s") {
                    vals.push_back(r->wall_time_s);
                    continue;
                }
                for (const auto& [k, v] : r->final_metrics) {
                    if (k == key) vals.push_back(v);
                }
            }
            SummaryRow row{g, key, 0, 0, vals.size()};
            for (double v : vals) row.mean += v;
            row.mean /= static_cast<double>(vals.size());
            if (vals.size() > 1) {
                double ss = 0;
                for (double v : vals) ss += (v - row.mean) * (v - row.mean);
                row.std = std::sqrt(ss / static_cast<double>(vals.size() - 1));
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string s = "group,key,mean,std,n\n";
    for (const auto& r : rows) {
        s += r.group + "," + r.key + "," + csv_double(r.mean) + "," + csv_double(r.std) + "," + std::to_string(r.n) +
             "\n";
    }
    return s;
}

/// Write all artifacts into `dir`. Files are staged in a sibling directory
/// and moved into place only after every file has been written.
inline void emit_outputs(const std::vector<RunRecord>& records, const ExperimentConfig& c,
                         const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (records.empty()) throw std::runtime_error("no run records to emit");
    const fs::path target = fs::absolute(dir);
    fs::path staging = target;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::create_directories(staging, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + staging.string() + ": " + ec.message());

    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(staging / name, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + (staging / name).string());
    };
    try {
        write("metrics.csv", metrics_csv(records));
        write("summary.csv", summary_csv(summarize(records, !c.p_grid.empty())));
        write("config.resolved", render(c));
        for (const auto& r : records) {
            write("architecture_" + r.run + ".json", to_json(r.architecture).dump(2) + "\n");
            write("circuit_" + r.run + ".qasm", to_qasm(r.architecture));
        }
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    fs::remove_all(target, ec);
    fs::rename(staging, target, ec);
    if (ec) throw std::runtime_error("cannot move outputs into " + target.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Readers
// ---------------------------------------------------------------------------

struct MetricRow {
    std::string run, epoch, key;
    double value = 0;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

inline std::vector<MetricRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "run,epoch,key,value") throw std::runtime_error("bad metrics.csv header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw std::runtime_error("bad metrics.csv row: " + line);
        rows.push_back({f[0], f[1], f[2], std::stod(f[3])});
    }
    return rows;
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "group,key,mean,std,n") throw std::runtime_error("bad summary.csv header");
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw std::runtime_error("bad summary.csv row: " + line);
        rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stoul(f[4])});
    }
    return rows;
}

}  // namespace rhodarts::harness
