#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "rhodarts/qdarts.hpp"

using namespace rhodarts;

namespace {

// Dense state-vector run of `choice`, with candidate `extra` at position `at` added with weight eps.
Eigen::VectorXcd dense_run(const Program& prog, const std::vector<std::size_t>& choice,
                           const std::vector<double>& theta, std::size_t at, std::size_t extra, double eps) {
    const auto pos = oracle::positions(prog);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << prog.n_qubits);
    psi(0) = 1;
    for (std::size_t s = 0; s < pos.size(); ++s) {
        oracle::Mat u = oracle::gate(prog, *pos[s], choice[pos[s]->slot], theta[pos[s]->theta]);
        if (s == at) u += eps * oracle::gate(prog, *pos[s], extra, theta[pos[s]->theta]);
        psi = u * psi;
    }
    return psi;
}

double ghz_infidelity(const Eigen::VectorXcd& psi, int n) {
    return 1.0 - std::norm(oracle::from_pure(ghz_state(n)).dot(psi));
}

}  // namespace

TEST(Gumbel, DeterministicFromNoise) {
    const std::vector<double> logits{0.3, -1.0, 2.0, 0.0};
    const std::vector<double> g{0.1, 3.0, -0.5, 0.2};
    const auto a = gumbel_from_noise(logits, g, 0.5), b = gumbel_from_noise(logits, g, 0.5);
    EXPECT_EQ(a.hard, 1u);  // argmax of logits + g
    EXPECT_EQ(a.soft, b.soft);
    double sum = 0;
    for (double v : a.soft) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-14);
    Stream r1(4, "qdarts/gumbel"), r2(4, "qdarts/gumbel");
    EXPECT_EQ(gumbel_sample_position(logits, r1, 0.05).noise, gumbel_sample_position(logits, r2, 0.05).noise);
    EXPECT_THROW(gumbel_from_noise(logits, g, 0.0), std::invalid_argument);
    EXPECT_THROW(gumbel_from_noise(logits, std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST(Gumbel, LowTemperatureIsHard) {
    Stream rng(5, "tau");
    const std::vector<double> logits{0.1, 0.4, -0.2, 0.0, 0.3};
    for (int i = 0; i < 100; ++i) {
        const auto s = gumbel_sample_position(logits, rng, 1e-4);
        EXPECT_GT(s.soft[s.hard], 1.0 - 1e-6);
    }
}

TEST(Gumbel, HardFrequenciesFollowSoftmax) {
    Stream rng(6, "freq");
    const std::vector<double> logits{1.0, 0.0, -0.5, 0.5, 0.2};
    const auto p = softmax_rows(logits, 1, 1, 5);
    std::vector<double> count(5, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) count[gumbel_sample_position(logits, rng, 0.05).hard] += 1;
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(count[k] / draws, p.p[k], 0.005) << k;
}

TEST(PureReverse, MatchesFiniteDifferences) {
    const StateInitTask task(TargetKind::Ghz, 3);
    const StateInitPure obj(task);
    const auto prog = macro_program(3, 3, GateSet::standard(3));
    Stream rng(7, "pr");
    std::vector<std::size_t> choice(prog.slots());
    for (auto& c : choice) c = rng.below(prog.gates.size());
    choice[0] = 2;  // make sure some rotations are present
    choice[4] = 1;
    std::vector<double> theta(prog.theta_count());
    for (auto& v : theta) v = rng.uniform(-kPi, kPi);

    const auto ops = detail::realize(prog, choice, theta, nullptr);
    const auto pg = detail::pure_reverse(prog, ops, theta, obj, 0, true);
    EXPECT_NEAR(pg.loss, ghz_infidelity(dense_run(prog, choice, theta, 0, 0, 0.0), 3), 1e-12);

    auto f_theta = [&](const std::vector<double>& th) { return ghz_infidelity(dense_run(prog, choice, th, 0, 0, 0), 3); };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        EXPECT_NEAR(pg.d_theta[i], oracle::central_difference(f_theta, theta, i), 1e-8) << "theta " << i;
    }
    const std::size_t g = prog.gates.size();
    for (std::size_t s = 0; s < prog.slots(); ++s) {
        for (std::size_t k = 0; k < g; ++k) {
            auto f = [&](const std::vector<double>& e) {
                return ghz_infidelity(dense_run(prog, choice, theta, s, k, e[0]), 3);
            };
            EXPECT_NEAR(pg.d_hard[s * g + k], oracle::central_difference(f, {0.0}, 0, 1e-5), 1e-8)
                << "slot " << s << " gate " << k;
        }
    }
}

TEST(PureReverse, MaxCutThetaGradient) {
    const auto task = erdos_renyi(4, 0.6, 3);
    const MaxCutPure obj(task);
    const auto prog = micro_program(edges_to_supercircuit(task.graph), 2, GateSet::standard(2));
    Stream rng(8, "mc");
    std::vector<std::size_t> choice{2, 4, 1, 3};
    std::vector<double> theta(prog.theta_count());
    for (auto& v : theta) v = rng.uniform(-kPi, kPi);
    const auto pg = detail::pure_reverse(prog, detail::realize(prog, choice, theta, nullptr), theta, obj, 0, false);
    auto f = [&](const std::vector<double>& th) {
        return detail::pure_reverse(prog, detail::realize(prog, choice, th, nullptr), th, obj, 0, false).loss;
    };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        EXPECT_NEAR(pg.d_theta[i], oracle::central_difference(f, theta, i), 1e-8) << i;
    }
}

TEST(Trajectories, MeanMatchesDensityChannel) {
    const auto prog = macro_program(2, 2, GateSet::standard(2), NoiseSpec(NoiseKind::BitPhaseFlip, 0.1));
    const std::vector<std::size_t> choice{2, 1, 4, 3};
    const std::vector<double> theta{1.2, -0.7, 0.5, 2.2};
    const ArchitectureMatrix arch{2, 2, {2, 1, 4, 3}};
    const PureState bell = ghz_state(2);
    const double exact = fidelity(simulate_discrete(prog, arch, theta, DensityMatrix(2)), bell);
    Stream rng(9, "qdarts/trajectory");
    double mean = 0;
    const int shots = 1000;
    for (int i = 0; i < shots; ++i) {
        Stream noise(rng.next_u64(), "trajectory");
        PureState psi(2);
        for (const auto& op : detail::realize(prog, choice, theta, &noise)) detail::apply_sampled(psi, op);
        mean += fidelity(psi, bell) / shots;
    }
    EXPECT_NEAR(mean, exact, 0.02 * exact);
}

TEST(Trajectories, DepolarizingRejected) {
    const auto prog = macro_program(2, 1, GateSet::standard(2), NoiseSpec(NoiseKind::Depolarizing, 0.1));
    Stream rng(1, "x");
    EXPECT_THROW(detail::realize(prog, {0, 0}, std::vector<double>(2), &rng), std::invalid_argument);
    const StateInitTask task(TargetKind::Ghz, 2);
    StateInitPure obj(task);
    SearchConfig cfg;
    cfg.layers = 2;
    cfg.epochs = 1;
    cfg.noise = NoiseSpec(NoiseKind::Depolarizing, 0.1);
    EXPECT_THROW(qdarts_search(obj, cfg, {}, 0), std::invalid_argument);
}

TEST(PureReverse, IdentityOnlyGateSetIsConstant) {
    const StateInitTask task(TargetKind::Ghz, 2);
    const StateInitPure obj(task);
    const auto prog = macro_program(2, 3, GateSet({{GateKind::I, 0}}));
    const std::vector<std::size_t> choice(prog.slots(), 0);
    for (double t : {0.0, 1.0, -2.5}) {
        const std::vector<double> theta(prog.theta_count(), t);
        const auto pg = detail::pure_reverse(prog, detail::realize(prog, choice, theta, nullptr), theta, obj, 0, true);
        EXPECT_NEAR(pg.loss, 0.5, 1e-15);
        for (double v : pg.d_theta) EXPECT_EQ(v, 0.0);
    }
}

TEST(QdartsSearch, DeterministicAndFinite) {
    const StateInitTask task(TargetKind::Ghz, 2);
    SearchConfig cfg;
    cfg.layers = 4;
    cfg.epochs = 40;
    GumbelCfg g;
    g.inner_iter = 3;
    StateInitPure o1(task), o2(task);
    const auto a = qdarts_search(o1, cfg, g, 5);
    const auto b = qdarts_search(o2, cfg, g, 5);
    ASSERT_EQ(a.history.size(), 40u);
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        EXPECT_EQ(a.history[e].loss, b.history[e].loss);
        EXPECT_TRUE(std::isfinite(a.history[e].loss));
    }
    EXPECT_EQ(a.arch, b.arch);
    EXPECT_EQ(a.theta.values, b.theta.values);
    const double f = discrete_fidelity(a.program, a.arch, a.theta.values, task.target);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0 + 1e-12);
}

TEST(QdartsSearch, NoisyTrajectoriesRun) {
    const auto task = erdos_renyi(3, 1.0, 0);
    MaxCutPure obj(task);
    SearchConfig cfg;
    cfg.layers = 2;
    cfg.epochs = 5;
    cfg.noise = NoiseSpec(NoiseKind::BitFlip, 0.05);
    cfg.structure = edges_to_supercircuit(task.graph);
    GumbelCfg g;
    g.inner_iter = 2;
    g.trajectories = 4;
    const auto r = qdarts_search(obj, cfg, g, 1);
    EXPECT_EQ(r.history.size(), 5u);
    for (const auto& h : r.history) EXPECT_TRUE(std::isfinite(h.loss));
}
