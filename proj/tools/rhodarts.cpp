// Command-line front end: run experiments, export circuits, self-verify.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rhodarts/export.hpp"
#include "rhodarts/harness/config.hpp"
#include "rhodarts/harness/runner.hpp"
#include "rhodarts/verify.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Density-matrix quantum architecture search"};
    app.require_subcommand(1);

    std::string config_path, seeds, out_dir;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "run an experiment described by a config file");
    run->add_option("config", config_path, "configuration file (key = value lines)")->required();
    run->add_option("--set", overrides, "override a configuration key (key=value)");
    run->add_option("--seeds", seeds, "comma-separated seed list");
    run->add_option("--out", out_dir, "output directory");

    std::string arch_path, format = "qasm";
    auto* exp = app.add_subcommand("export-circuit", "render an architecture record");
    exp->add_option("architecture", arch_path, "architecture JSON file")->required();
    exp->add_option("--format", format, "qasm or json")->check(CLI::IsMember({"qasm", "json"}));

    std::uint64_t verify_seed = 0;
    auto* ver = app.add_subcommand("verify", "run the oracle self-check suite");
    ver->add_option("--seed", verify_seed, "seed for the randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    if (run->parsed()) {
        rhodarts::harness::ExperimentConfig cfg;
        try {
            if (!seeds.empty()) overrides.push_back("seeds=" + seeds);
            if (!out_dir.empty()) overrides.push_back("out=" + out_dir);
            cfg = rhodarts::harness::load_config(config_path, overrides);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        }
        try {
            const auto records = rhodarts::harness::run_experiment(cfg);
            rhodarts::harness::emit_outputs(records, cfg, cfg.out);
            for (const auto& row : rhodarts::harness::summarize(records, !cfg.p_grid.empty())) {
                std::printf("%-10s %-24s %.6f +- %.6f (n=%zu)\n", row.group.c_str(), row.key.c_str(), row.mean,
                            row.std, row.n);
            }
            std::cout << "outputs written to " << cfg.out << '\n';
        } catch (const rhodarts::harness::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitRuntime;
        }
        return 0;
    }

    if (exp->parsed()) {
        try {
            const auto rec = rhodarts::read_record(arch_path);
            if (format == "qasm") std::cout << rhodarts::to_qasm(rec);
            else std::cout << rhodarts::to_json(rec).dump(2) << '\n';
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitRuntime;
        }
        return 0;
    }

    const bool ok = rhodarts::verify::run_suite(std::cout, verify_seed);
    return ok ? 0 : kExitRuntime;
}
