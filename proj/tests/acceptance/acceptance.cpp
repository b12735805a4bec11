// Acceptance suite: one PASS/FAIL line per criterion on stdout, per-run
// details on stderr. Exit status 0 only when every requested criterion passes.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracle.hpp"
#include "rhodarts/harness/config.hpp"
#include "rhodarts/harness/runner.hpp"
#include "rhodarts/rhodarts.hpp"

using namespace rhodarts;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

harness::ExperimentConfig config(const std::string& text) {
    std::istringstream in(text);
    return harness::resolve(harness::parse_key_values(in));
}

double metric(const harness::RunRecord& r, const std::string& key) {
    for (const auto& [k, v] : r.final_metrics) {
        if (k == key) return v;
    }
    throw std::runtime_error("missing metric " + key);
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> metric_values(const std::vector<harness::RunRecord>& recs, const std::string& key) {
    std::vector<double> out;
    for (const auto& r : recs) out.push_back(metric(r, key));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4f", x);
    return s;
}

NoiseSpec random_noise(Stream& rng, double p_max = 0.3) {
    const auto kind = static_cast<NoiseKind>(rng.below(5));
    return kind == NoiseKind::None ? NoiseSpec{} : NoiseSpec(kind, rng.uniform(0.0, p_max));
}

DensityMatrix random_mixed(int n, Stream& rng) {
    DensityMatrix rho = DensityMatrix::zero(n);
    const int terms = 1 + static_cast<int>(rng.below(3));
    for (int t = 0; t < terms; ++t) {
        PureState psi(n);
        for (std::size_t k = 0; k < psi.dim(); ++k) psi[k] = cplx(rng.normal(), rng.normal());
        psi.normalize();
        rho.axpy(1.0 / terms, pure_to_density(psi));
    }
    return rho;
}

PureState random_pure(int n, Stream& rng) {
    PureState psi(n);
    for (std::size_t k = 0; k < psi.dim(); ++k) psi[k] = cplx(rng.normal(), rng.normal());
    psi.normalize();
    return psi;
}

SuperCircuitStructure random_structure(int n, std::size_t width, std::size_t rows, Stream& rng) {
    SuperCircuitStructure s{n, {}};
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<int> q(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = i;
        for (std::size_t i = 0; i < width; ++i) std::swap(q[i], q[i + rng.below(q.size() - i)]);
        q.resize(width);
        s.rows.push_back(q);
    }
    return s;
}

// 1. Forward pass against explicit enumeration of every architecture.
Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    Stream rng(101, "acceptance/enumeration");
    double worst = 0;
    int micro_count = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Program prog;
        const std::size_t m = 1 + rng.below(2);
        if (trial % 2 == 1) {
            ++micro_count;
            // Keep the assignment count near 5^6.
            const std::size_t width = m == 1 ? 2 : 1 + rng.below(2);
            const std::size_t rows = width == 2 ? (m == 1 ? 2 + rng.below(2) : 1) : 1 + rng.below(3);
            const auto s = random_structure(3, width, rows, rng);
            prog = micro_program(s, m, GateSet::standard(static_cast<int>(width)), random_noise(rng));
        } else {
            const int n = 1 + static_cast<int>(rng.below(2));
            prog = macro_program(n, m, GateSet::standard(n), random_noise(rng));
        }
        const bool hidden = rng.below(2) == 1;
        ArchLogits logits = init_logits(prog.layers, prog.width, prog.gates.size(), hidden, rng);
        for (std::size_t i = 0; i < logits.parameter_count(); ++i) logits.parameter(i) = 1.5 * rng.normal();
        std::vector<double> theta(prog.theta_count());
        for (auto& v : theta) v = rng.uniform(-kPi, kPi);
        const DensityMatrix rho0 = random_mixed(prog.n_qubits, rng);
        const ProbTable probs = gate_probs(logits);
        const DensityMatrix out = forward(prog, probs, theta, rho0);
        worst = std::max(worst, oracle::max_diff(oracle::enumerate(prog, probs, theta, oracle::from_dm(rho0)), out));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-10 && secs < 10.0, "50 programs (" + std::to_string(micro_count) + " micro), max deviation " +
                                               fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

// 2. Tape gradients of the full search loss against central differences.
Outcome criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    Stream rng(202, "acceptance/gradients");
    const double h = 1e-4;
    double worst_ratio = 0;
    std::size_t entries = 0, failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Program prog;
        const std::size_t m = 1 + rng.below(5);
        if (trial % 3 == 2) {
            const auto s = random_structure(3, 2, 1 + rng.below(3), rng);
            prog = micro_program(s, m, GateSet::standard(2), random_noise(rng));
        } else {
            const int n = 1 + static_cast<int>(rng.below(3));
            prog = macro_program(n, m, GateSet::standard(n), random_noise(rng));
        }
        const bool hidden = trial % 2 == 1;
        ArchLogits logits = init_logits(prog.layers, prog.width, prog.gates.size(), hidden, rng);
        for (std::size_t i = 0; i < logits.parameter_count(); ++i) logits.parameter(i) = rng.normal();
        std::vector<double> theta(prog.theta_count());
        // Some angles outside [-pi, pi] so the penalty is active.
        for (auto& v : theta) v = rng.uniform(-1.3 * kPi, 1.3 * kPi);
        const DensityMatrix rho0 = random_mixed(prog.n_qubits, rng);
        const PureState target = random_pure(prog.n_qubits, rng);
        const double t = rng.uniform(0.0, 1.0);
        const EntropyScheduleCfg sched{-0.1, 0.1};
        const double s_theta = 0.01;

        auto loss = [&](const ArchLogits& lg, const std::vector<double>& th) {
            const ProbTable p = gate_probs(lg);
            return state_init_loss(forward(prog, p, th, rho0), target) + entropy_term(p, t, sched) +
                   angle_penalty(th, s_theta);
        };
        auto [out, tape] = record_forward(prog, logits, theta, rho0);
        GradientBundle g = backward(tape, state_init_seed(target));
        const auto ent = arch_param_grad(logits, entropy_term_grad_alpha(gate_probs(logits), t, sched));
        const auto ang = angle_penalty_grad(theta, s_theta);
        for (std::size_t i = 0; i < ent.size(); ++i) g.d_arch[i] += ent[i];
        for (std::size_t i = 0; i < ang.size(); ++i) g.d_theta[i] += ang[i];

        auto check = [&](double analytic, double numeric) {
            ++entries;
            const double tol = std::max(1e-5 * std::abs(numeric), 1e-8);
            const double ratio = std::abs(analytic - numeric) / tol;
            worst_ratio = std::max(worst_ratio, ratio);
            failures += ratio > 1.0 ? 1 : 0;
        };
        for (std::size_t i = 0; i < theta.size(); ++i) {
            auto tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            check(g.d_theta[i], (loss(logits, tp) - loss(logits, tm)) / (2 * h));
        }
        for (std::size_t i = 0; i < logits.parameter_count(); ++i) {
            ArchLogits lp = logits, lm = logits;
            lp.parameter(i) += h;
            lm.parameter(i) -= h;
            check(g.d_arch[i], (loss(lp, theta) - loss(lm, theta)) / (2 * h));
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 120.0, std::to_string(entries) + " entries over 100 programs, " +
                                               std::to_string(failures) + " outside tolerance, worst error/tolerance " +
                                               fmt("%.3f", worst_ratio) + ", " + fmt("%.1f", secs) + " s"};
}

// 3. Validity of long random channel sequences.
Outcome criterion3() {
    double tr_err = 0, herm = 0, min_ev = 1;
    for (int seq = 0; seq < 8; ++seq) {
        Stream rng(303 + static_cast<std::uint64_t>(seq), "acceptance/cptp");
        const int n = 1 + seq % 4;
        const GateSet gs = GateSet::standard(n);
        const Program one_layer = macro_program(n, 1, gs);
        DensityMatrix rho = random_mixed(n, rng);
        for (int i = 0; i < 500; ++i) {
            switch (rng.below(4)) {
                case 0:
                    rho.apply(rotation(static_cast<GateKind>(1 + rng.below(3)), rng.uniform(-kPi, kPi)),
                              static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
                    break;
                case 1:
                    if (n > 1) {
                        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
                        rho.apply_cnot(c, (c + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)))) % n);
                    }
                    break;
                case 2:
                    // Weak noise keeps the state close to rank deficient.
                    rho.apply_noise(random_noise(rng, 0.01));
                    break;
                default: {
                    std::vector<double> a(gs.size());
                    for (auto& v : a) v = 2 * rng.normal();
                    const ProbTable p = softmax_rows(a, 1, 1, gs.size());
                    const auto& st = std::get<MixtureStep>(one_layer.steps[rng.below(static_cast<std::uint64_t>(n))]);
                    rho = apply_mixture_position(rho, gs, st, p.row(0), rng.uniform(-kPi, kPi));
                    break;
                }
            }
            const oracle::Mat d = oracle::from_dm(rho);
            tr_err = std::max(tr_err, std::abs(d.trace() - oracle::C(1.0)));
            herm = std::max(herm, (d - d.adjoint()).cwiseAbs().maxCoeff());
            if (i % 25 == 24) {
                const Eigen::SelfAdjointEigenSolver<oracle::Mat> es(d);
                min_ev = std::min(min_ev, es.eigenvalues().minCoeff());
            }
        }
    }
    double dep_err = 0;
    for (int n = 1; n <= 4; ++n) {
        Stream rng(404, "acceptance/depolarizing");
        DensityMatrix rho = random_mixed(n, rng);
        rho.apply_noise(NoiseSpec(NoiseKind::Depolarizing, 1.0));
        dep_err = std::max(dep_err, oracle::max_diff(oracle::identity(n) / static_cast<double>(1 << n), rho));
    }
    const bool ok = tr_err < 1e-9 && herm < 1e-9 && min_ev >= -1e-8 && dep_err <= 1e-12;
    return {ok, "8 sequences x 500 channels: trace error " + fmt("%.1e", tr_err) + ", hermiticity " +
                    fmt("%.1e", herm) + ", min eigenvalue " + fmt("%.1e", min_ev) + "; depolarizing(1) error " +
                    fmt("%.1e", dep_err)};
}

std::vector<double> state_init_fidelities(const std::string& target, int n, const std::string& algorithm,
                                          std::size_t epochs = 1000) {
    auto c = config("task = state_init\ntarget = " + target + "\nn = " + std::to_string(n) +
                    "\nalgorithm = " + algorithm + "\nepochs = " + std::to_string(epochs) + "\nseeds = 0, 1, 2\n");
    const auto t0 = std::chrono::steady_clock::now();
    const auto v = metric_values(harness::run_experiment(c), "fidelity");
    std::cerr << "  " << algorithm << " " << target << " n=" << n << " m=" << c.layers << ": " << join(v) << " ("
              << fmt("%.0f", seconds_since(t0)) << " s)\n";
    return v;
}

std::size_t count_at_least(const std::vector<double>& v, double x) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double f) { return f >= x; }));
}

// 4. State preparation, macro search with m = 2n.
Outcome criterion4() {
    bool ok = true;
    std::string detail;
    for (int n : {2, 3, 4}) {
        const auto f = state_init_fidelities("ghz", n, "rho_macro");
        const auto hits = count_at_least(f, 0.99);
        ok = ok && hits >= 2;
        detail += "GHZ" + std::to_string(n) + " " + std::to_string(hits) + "/3>=0.99; ";
    }
    const auto w2 = state_init_fidelities("w", 2, "rho_macro");
    ok = ok && count_at_least(w2, 0.99) == 3;
    detail += "W2 min " + fmt("%.4f", *std::min_element(w2.begin(), w2.end())) + "; ";
    const auto w3 = state_init_fidelities("w", 3, "rho_macro");
    ok = ok && count_at_least(w3, 0.80) >= 1;
    detail += "W3 best " + fmt("%.4f", *std::max_element(w3.begin(), w3.end())) + "; ";
    for (int n : {5, 6}) {
        const auto f = state_init_fidelities("ghz", n, "rho_macro", 50);
        const bool finite = std::all_of(f.begin(), f.end(), [](double x) { return std::isfinite(x); });
        ok = ok && finite;
        detail += "GHZ" + std::to_string(n) + " 50-epoch smoke " + (finite ? "ok" : "bad") + (n == 5 ? "; " : "");
    }
    return {ok, detail};
}

// 5. The Gumbel baseline trails density-matrix search on GHZ(3).
Outcome criterion5() {
    const auto rho = state_init_fidelities("ghz", 3, "rho_macro");
    const auto q = state_init_fidelities("ghz", 3, "qdarts");
    return {mean(q) < mean(rho), "GHZ3 mean fidelity qdarts " + fmt("%.4f", mean(q)) + " vs rho " +
                                     fmt("%.4f", mean(rho))};
}

// 6. Max-cut on ten random 6-vertex graphs.
Outcome criterion6() {
    std::vector<double> em, pm;
    bool oracle_ok = true;
    for (int g = 0; g < 10; ++g) {
        auto c = config("task = maxcut\nn = 6\np_edge = 0.5\nlayers = 9\nepochs = 1000\nseeds = 0\ngraph_seed = " +
                        std::to_string(g) + "\n");
        const auto task = erdos_renyi(6, 0.5, static_cast<std::uint64_t>(g));
        int best = 0;
        for (unsigned k = 0; k < 64; ++k) best = std::max(best, oracle::cut_size(task.graph, k));
        oracle_ok = oracle_ok && best == task.true_max;
        const auto t0 = std::chrono::steady_clock::now();
        const auto recs = harness::run_experiment(c);
        em.push_back(metric(recs[0], "E_m"));
        pm.push_back(metric(recs[0], "P_m"));
        std::cerr << "  graph " << g << " edges=" << task.graph.edges.size() << " max=" << best
                  << " E_m=" << fmt("%.4f", em.back()) << " P_m=" << fmt("%.4f", pm.back()) << " ("
                  << fmt("%.0f", seconds_since(t0)) << " s)\n";
    }
    return {oracle_ok && mean(em) >= 0.90 && mean(pm) >= 0.5,
            "mean E_m " + fmt("%.4f", mean(em)) + ", mean P_m " + fmt("%.4f", mean(pm)) + ", brute-force max " +
                (oracle_ok ? "agrees" : "DISAGREES")};
}

// 7. Depolarizing strength against max-cut quality on one graph.
Outcome criterion7() {
    auto c = config(
        "task = maxcut\nn = 6\np_edge = 0.5\nlayers = 9\nepochs = 1000\ngraph_seed = 0\nseeds = 0, 1, 2\n"
        "noise.kind = depolarizing\nnoise.p_grid = 0, 0.02, 0.05\n");
    const auto recs = harness::run_experiment(c);
    std::vector<double> means;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> em;
        for (std::size_t s = 0; s < 3; ++s) em.push_back(metric(recs[k * 3 + s], "E_m"));
        means.push_back(mean(em));
        std::cerr << "  p=" << c.p_grid[k] << " E_m " << join(em) << '\n';
    }
    const bool ok = means[0] >= means[1] && means[1] >= means[2];
    return {ok, "mean E_m at p = 0, 0.02, 0.05: " + join(means)};
}

// 8. Binary classification, MNIST 0/1 and the synthetic set.
Outcome criterion8() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string common = "task = classify\nn = 8\nlayers = 15\nepochs = 10\nbatch = 128\nseeds = 0, 1, 2\n";
    bool ok = true;
    std::string detail;
    if (fs::exists(fs::path(RHODARTS_DATA_DIR) / "train-images-idx3-ubyte")) {
        const auto acc = metric_values(
            harness::run_experiment(config(common + "dataset = mnist\ndata_dir = " RHODARTS_DATA_DIR "\n")),
            "test_accuracy");
        std::cerr << "  mnist test accuracy " << join(acc) << '\n';
        ok = mean(acc) >= 0.70;
        detail += "MNIST mean accuracy " + fmt("%.4f", mean(acc)) + "; ";
    } else {
        ok = false;
        detail += "MNIST files missing; ";
    }
    const auto syn = metric_values(harness::run_experiment(config(common + "dataset = synthetic\n")), "test_accuracy");
    std::cerr << "  synthetic test accuracy " << join(syn) << '\n';
    ok = ok && mean(syn) >= 0.90;
    const double secs = seconds_since(t0);
    ok = ok && secs < 1800;
    return {ok, detail + "synthetic mean accuracy " + fmt("%.4f", mean(syn)) + ", " + fmt("%.0f", secs) + " s"};
}

// 9. Regularizer values at known points.
Outcome criterion9() {
    const EntropyScheduleCfg cfg{-0.1, 0.1};
    double worst = 0;
    for (std::size_t g : {2, 5, 6, 11}) {
        const ProbTable uniform = softmax_rows(std::vector<double>(3 * g, 0.7), 1, 3, g);
        for (double t : {0.5, 0.6, 0.8, 1.0}) worst = std::max(worst, std::abs(entropy_term(uniform, t, cfg) - cfg.s1));
    }
    const double ang = std::abs(angle_penalty(std::vector<double>{2 * kPi}, 0.01) - 0.01 * kPi * kPi);
    const double ang_neg = std::abs(angle_penalty(std::vector<double>{-2 * kPi}, 0.01) - 0.01 * kPi * kPi);
    const double inside = angle_penalty(std::vector<double>{kPi, -kPi, 0.3}, 0.01);
    const double sched = std::max({std::abs(schedule(0.0, cfg) - cfg.s0), std::abs(schedule(0.5, cfg) - cfg.s1),
                                   std::abs(schedule(1.0, cfg) - cfg.s1),
                                   std::abs(schedule(0.25, cfg) - (cfg.s0 + (cfg.s1 - cfg.s0) * std::sqrt(0.5)))});
    const bool ok = worst <= 1e-12 && ang <= 1e-12 && ang_neg <= 1e-12 && inside == 0.0 && sched <= 1e-15;
    return {ok, "uniform entropy error " + fmt("%.1e", worst) + ", angle penalty error " +
                    fmt("%.1e", std::max(ang, ang_neg)) + ", schedule error " + fmt("%.1e", sched)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// 10. Byte-identical metrics across repeats and worker counts.
Outcome criterion10() {
    const std::string text =
        "task = maxcut\nalgorithm = rho_micro\nn = 5\nlayers = 2\nepochs = 40\nseeds = 0, 1, 2, 3\n"
        "noise.kind = bitflip\nnoise.p_grid = 0, 0.05\n";
    std::vector<std::string> files;
    for (std::size_t jobs : {1, 1, 2, 4}) {
        auto c = config(text + "jobs = " + std::to_string(jobs) + "\n");
        const fs::path dir = fs::temp_directory_path() / ("rhodarts_acceptance_" + std::to_string(files.size()));
        fs::remove_all(dir);
        harness::emit_outputs(harness::run_experiment(c), c, dir);
        files.push_back(slurp(dir / "metrics.csv"));
        fs::remove_all(dir);
    }
    bool same = !files[0].empty();
    for (const auto& f : files) same = same && f == files[0];
    return {same, "4 runs (jobs 1, 1, 2, 4), metrics.csv " + std::to_string(files[0].size()) + " bytes, " +
                      (same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> which;
    app.add_option("--criterion", which, "criterion numbers to run (default: all)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);
    if (which.empty()) {
        for (int i = 1; i <= 10; ++i) which.push_back(i);
    }
    const std::vector<std::function<Outcome()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9, criterion10};
    bool ok = true;
    for (int i : which) {
        Outcome r;
        try {
            r = all[static_cast<std::size_t>(i - 1)]();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << i << ": " << r.detail << std::endl;
        ok = ok && r.pass;
    }
    return ok ? 0 : 1;
}
