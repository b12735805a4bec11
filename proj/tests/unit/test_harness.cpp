#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rhodarts/harness/config.hpp"
#include "rhodarts/harness/runner.hpp"

using namespace rhodarts;
using namespace rhodarts::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig from_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::istringstream in(text);
    KeyValues kv = parse_key_values(in);
    for (const auto& o : overrides) apply_override(kv, o);
    return resolve(kv);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rhodarts_harness_" + name);
    fs::remove_all(d);
    fs::path partial = d;
    partial += ".partial";
    fs::remove_all(partial);
    return d;
}

RunRecord fake_record(const std::string& run, double fid, double wall) {
    RunRecord r;
    r.run = run;
    r.history = {{0.5, 0.4, 0.9, 0.1}};
    r.final_metrics = {{"fidelity", fid}};
    r.wall_time_s = wall;
    const auto prog = macro_program(2, 1, GateSet::standard(2));
    r.architecture = make_record(prog, ArchitectureMatrix{1, 2, {2, 0}}, std::vector<double>{0.5, 0.0}, std::nullopt);
    return r;
}

}  // namespace

TEST(Config, ParseCommentsAndOverrides) {
    const auto c = from_text("# header\ntask = maxcut\nn = 6 # trailing\nepochs=50\n\nseeds = 3, 4\n", {"epochs=7"});
    EXPECT_EQ(c.task, TaskKind::MaxCut);
    EXPECT_EQ(c.n, 6);
    EXPECT_EQ(c.epochs, 7u);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(c.layers, 15u);
}

TEST(Config, TaskDefaults) {
    const auto s = from_text("task = state_init\nn = 4\n");
    EXPECT_EQ(s.layers, 8u);
    EXPECT_EQ(s.epochs, 1000u);
    EXPECT_DOUBLE_EQ(s.lr, 0.1);
    EXPECT_EQ(s.t_max, 100u);
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2}));

    const auto k = from_text("task = classify\n");
    EXPECT_EQ(k.n, 8);
    EXPECT_EQ(k.layers, 15u);
    EXPECT_EQ(k.epochs, 10u);
    EXPECT_EQ(k.batch, 128u);
    EXPECT_DOUBLE_EQ(k.s0, -0.1);
    EXPECT_DOUBLE_EQ(k.lr, 0.01 * std::sqrt(128.0));
    EXPECT_EQ(k.t_max, 10u);
    EXPECT_TRUE(k.schedule_per_epoch);

    const auto m = from_text("task = maxcut\nalgorithm = rho_micro\n");
    EXPECT_EQ(m.layers, 3u);
    EXPECT_EQ(m.n_s, 2u);

    const auto q = from_text("algorithm = qdarts\n");
    EXPECT_DOUBLE_EQ(q.tau, 0.05);
    EXPECT_EQ(q.inner_iter, 10u);
}

TEST(Config, Errors) {
    EXPECT_THROW(from_text("bogus = 1\n"), ConfigError);
    EXPECT_THROW(from_text("task = sorting\n"), ConfigError);
    EXPECT_THROW(from_text("algorithm = greedy\n"), ConfigError);
    EXPECT_THROW(from_text("n = two\n"), ConfigError);
    EXPECT_THROW(from_text("n = 1\n"), ConfigError);
    EXPECT_THROW(from_text("n = 20\n"), ConfigError);
    EXPECT_THROW(from_text("epochs = 0\n"), ConfigError);
    EXPECT_THROW(from_text("noise.kind = amplitude\n"), ConfigError);
    EXPECT_THROW(from_text("noise.kind = bitflip\nnoise.p = 1.5\n"), ConfigError);
    EXPECT_THROW(from_text("noise.p_grid = 0, 0.1\n"), ConfigError);
    EXPECT_THROW(from_text("algorithm = qdarts\nnoise.kind = depolarizing\nnoise.p = 0.1\n"), ConfigError);
    EXPECT_THROW(from_text("seeds = \n"), ConfigError);
    EXPECT_THROW(from_text("just words\n"), ConfigError);
    EXPECT_THROW(from_text("task = classify\nalgorithm = rho_micro\n"), ConfigError);
    EXPECT_THROW(from_text("", {"novalue"}), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.cfg"), ConfigError);
}

TEST(Config, RenderRoundTrip) {
    const auto c = from_text(
        "task = maxcut\nalgorithm = rho_micro\nn = 5\nnoise.kind = bitflip\nnoise.p_grid = 0, 0.01, 0.05\n"
        "seeds = 7\nlr = 0.3\n");
    const std::string text = render(c);
    const auto back = from_text(text);
    EXPECT_EQ(render(back), text);
    EXPECT_EQ(back.p_grid, (std::vector<double>{0, 0.01, 0.05}));
    EXPECT_DOUBLE_EQ(back.lr, 0.3);
}

TEST(Runner, LinearStructure) {
    const auto s = linear_structure(4, 2);
    EXPECT_EQ(s.rows, (std::vector<std::vector<int>>{{0, 1}, {1, 2}, {2, 3}}));
}

TEST(Runner, SmallExperimentIsDeterministicAcrossJobCounts) {
    auto c = from_text("task = state_init\nn = 2\nepochs = 30\nseeds = 0, 1, 2\n");
    const auto a = run_experiment(c);
    c.jobs = 3;
    const auto b = run_experiment(c);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(metrics_csv(a), metrics_csv(b));
    EXPECT_EQ(a[1].run, "s1");
    EXPECT_EQ(a[0].final_metrics.front().first, "fidelity");
}

TEST(Runner, NoiseGridNamesRuns) {
    const auto c = from_text(
        "task = maxcut\nalgorithm = rho_micro\nn = 3\np_edge = 1\nepochs = 3\nnoise.kind = bitflip\n"
        "noise.p_grid = 0, 0.1\nseeds = 0\n");
    const auto recs = run_experiment(c);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0].run, "p0_s0");
    EXPECT_EQ(recs[1].run, "p0.1_s0");
    const auto rows = summarize(recs, true);
    EXPECT_EQ(rows.front().group, "p=0");
}

TEST(Summarize, MeanAndSampleStd) {
    const std::vector<RunRecord> recs{fake_record("s0", 0.5, 1), fake_record("s1", 0.7, 2),
                                      fake_record("s2", 0.9, 3)};
    const auto rows = summarize(recs, false);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].key, "fidelity");
    EXPECT_NEAR(rows[0].mean, 0.7, 1e-15);
    EXPECT_NEAR(rows[0].std, 0.2, 1e-15);
    EXPECT_EQ(rows[0].n, 3u);
    EXPECT_EQ(rows[1].key, "wall_time_s");
    EXPECT_NEAR(rows[1].mean, 2.0, 1e-15);
}

TEST(EmitOutputs, WritesEveryArtifact) {
    const auto dir = scratch_dir("emit");
    const std::vector<RunRecord> recs{fake_record("s0", 0.5, 1), fake_record("s1", 0.7, 2),
                                      fake_record("s2", 0.9, 3)};
    ExperimentConfig c;
    emit_outputs(recs, c, dir);
    for (const char* f : {"metrics.csv", "summary.csv", "config.resolved"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    std::size_t arch_files = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        arch_files += e.path().filename().string().rfind("architecture_", 0) == 0 ? 1 : 0;
    }
    EXPECT_EQ(arch_files, 3u);
    EXPECT_TRUE(fs::exists(dir / "circuit_s2.qasm"));
    fs::path partial = dir;
    partial += ".partial";
    EXPECT_FALSE(fs::exists(partial));

    std::ifstream m(dir / "metrics.csv");
    const auto rows = read_metrics_csv(m);
    EXPECT_EQ(rows.size(), 3u * 5u);
    EXPECT_EQ(rows[4].epoch, "final");
    EXPECT_DOUBLE_EQ(rows[4].value, 0.5);
    std::ifstream s(dir / "summary.csv");
    EXPECT_NEAR(read_summary_csv(s)[0].mean, 0.7, 1e-15);
    EXPECT_NO_THROW(read_record((dir / "architecture_s0.json").string()));
    fs::remove_all(dir);
}

TEST(EmitOutputs, EmptyRecordSetLeavesNothing) {
    const auto dir = scratch_dir("empty");
    EXPECT_THROW(emit_outputs({}, ExperimentConfig{}, dir), std::runtime_error);
    EXPECT_FALSE(fs::exists(dir));
    fs::path partial = dir;
    partial += ".partial";
    EXPECT_FALSE(fs::exists(partial));
}

TEST(EmitOutputs, RepeatedRunsByteIdentical) {
    auto c = from_text("task = maxcut\nn = 4\nlayers = 2\nepochs = 5\nseeds = 0, 1\n");
    const auto d1 = scratch_dir("rep1"), d2 = scratch_dir("rep2");
    emit_outputs(run_experiment(c), c, d1);
    emit_outputs(run_experiment(c), c, d2);
    EXPECT_EQ(slurp(d1 / "metrics.csv"), slurp(d2 / "metrics.csv"));
    EXPECT_EQ(slurp(d1 / "architecture_s1.json"), slurp(d2 / "architecture_s1.json"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Readers, RejectBadHeaders) {
    std::istringstream m("a,b\n"), s("x\n");
    EXPECT_THROW(read_metrics_csv(m), std::runtime_error);
    EXPECT_THROW(read_summary_csv(s), std::runtime_error);
}
