#include <gtest/gtest.h>

#include <cmath>

#include "rhodarts/search.hpp"

using namespace rhodarts;

namespace {

ClassifyTask small_task() {
    const auto train = synthetic_two_gaussian(48, 2, 64);
    const auto test = synthetic_two_gaussian(16, 2, 64, "test");
    return make_classify_task(train, test, 3, Encoding::Angle);
}

}  // namespace

TEST(BatchOrder, PartitionsAndShuffles) {
    BatchOrder order(10, 4, 3);
    EXPECT_EQ(order.batches(), 3u);
    EXPECT_EQ(order.indices(2).size(), 2u);
    order.shuffle();
    std::vector<std::size_t> all;
    for (std::size_t b = 0; b < 3; ++b) {
        const auto idx = order.indices(b);
        all.insert(all.end(), idx.begin(), idx.end());
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
    BatchOrder again(10, 4, 3);
    again.shuffle();
    EXPECT_EQ(again.indices(0), order.indices(0));
    EXPECT_THROW(BatchOrder(10, 0, 1), std::invalid_argument);
}

TEST(ClassifyObjective, BatchedEqualsPerExample) {
    const auto task = small_task();
    SearchConfig cfg;
    cfg.layers = 3;
    cfg.noise = NoiseSpec(NoiseKind::BitFlip, 0.02);
    const auto prog = build_program(cfg, 3);
    Stream ar(1, "init/alpha"), tr(1, "init/theta");
    auto logits = init_logits(prog.layers, prog.width, prog.gates.size(), false, ar);
    for (auto& v : logits.raw_alpha()) v = ar.normal();
    const auto theta = init_theta(1, prog.layers, prog.width, tr);

    ClassifyObjective obj(task, 16, 7);
    obj.begin_epoch(0);
    for (std::size_t b = 0; b < obj.batches_per_epoch(); ++b) {
        GradientBundle fast, ref;
        const double lf = obj.evaluate(prog, logits, theta, b, fast);
        const double lr = classify_batch_per_example(prog, logits, theta, task, obj.batch_indices(b), ref);
        EXPECT_NEAR(lf, lr, 1e-12);
        for (std::size_t i = 0; i < ref.d_theta.size(); ++i) EXPECT_NEAR(fast.d_theta[i], ref.d_theta[i], 1e-11);
        for (std::size_t i = 0; i < ref.d_arch.size(); ++i) EXPECT_NEAR(fast.d_arch[i], ref.d_arch[i], 1e-11);
    }
}

TEST(LinearObjective, LossMatchesTask) {
    const StateInitTask task(TargetKind::W, 3);
    auto obj = LinearObjective::state_init(task);
    SearchConfig cfg;
    cfg.layers = 2;
    const auto prog = build_program(cfg, 3);
    Stream ar(2, "a"), tr(2, "t");
    const auto logits = init_logits(2, 3, prog.gates.size(), false, ar);
    const auto theta = init_theta(1, 2, 3, tr);
    GradientBundle g;
    const double loss = obj.evaluate(prog, logits, theta, 0, g);
    EXPECT_NEAR(loss, state_init_loss(forward(prog, gate_probs(logits), theta.values, DensityMatrix(3)), task.target),
                1e-13);
}

TEST(RhoSearch, GhzTwoQubitsConverges) {
    const StateInitTask task(TargetKind::Ghz, 2);
    auto obj = LinearObjective::state_init(task);
    SearchConfig cfg;
    cfg.layers = task.default_layers();
    cfg.epochs = 300;
    const auto res = rho_search(obj, cfg, 0);
    ASSERT_EQ(res.history.size(), 300u);
    EXPECT_LT(res.history.back().task_loss, res.history.front().task_loss);
    EXPECT_GT(discrete_fidelity(res.program, res.arch, res.theta.values, task.target), 0.99);
}

TEST(RhoSearch, Deterministic) {
    const auto mc = erdos_renyi(3, 1.0, 0);
    SearchConfig cfg;
    cfg.layers = 2;
    cfg.epochs = 20;
    cfg.structure = edges_to_supercircuit(mc.graph);
    cfg.hidden_units = true;
    auto o1 = LinearObjective::maxcut(mc), o2 = LinearObjective::maxcut(mc);
    const auto a = rho_search(o1, cfg, 4), b = rho_search(o2, cfg, 4);
    for (std::size_t e = 0; e < 20; ++e) EXPECT_EQ(a.history[e].loss, b.history[e].loss);
    EXPECT_EQ(a.theta.values, b.theta.values);
    EXPECT_EQ(a.program.copies, 3u);
}

TEST(RhoSearch, PerEpochScheduleLogsLearningRate) {
    const auto task = small_task();
    ClassifyObjective obj(task, 16, 1);
    SearchConfig cfg;
    cfg.layers = 2;
    cfg.epochs = 3;
    cfg.adam.lr = 0.2;
    cfg.adam.t_max = 10;
    cfg.schedule_per_epoch = true;
    std::vector<double> seen;
    rho_search(obj, cfg, 0, [&](std::size_t, const EpochLog& log) { seen.push_back(log.lr); });
    ASSERT_EQ(seen.size(), 3u);
    EXPECT_DOUBLE_EQ(seen[0], 0.2);
    EXPECT_NEAR(seen[1], 0.1 * (1 + std::cos(kPi / 10)), 1e-15);
    EXPECT_NEAR(seen[2], 0.1 * (1 + std::cos(kPi / 5)), 1e-15);
}

TEST(DiscreteEval, NoisyAndNoiselessPathsAgreeAtZeroNoise) {
    const auto task = small_task();
    const auto clean = macro_program(3, 2, GateSet::standard(3));
    const auto noisy = macro_program(3, 2, GateSet::standard(3), NoiseSpec(NoiseKind::BitFlip, 1e-300));
    const ArchitectureMatrix arch{2, 3, {1, 2, 4, 3, 0, 5}};
    const std::vector<double> theta{0.3, 1.0, -0.2, 0.8, 0.0, 2.0};
    EXPECT_TRUE(program_has_noise(noisy));
    EXPECT_FALSE(program_has_noise(clean));
    EXPECT_DOUBLE_EQ(discrete_accuracy(clean, arch, theta, task.test_states, task.test_labels),
                     discrete_accuracy(noisy, arch, theta, task.test_states, task.test_labels));
}
