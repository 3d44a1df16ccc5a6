// Command-line front end for the fingerprinting lab.
//
// Subcommands: gen-data, pipeline, attack, verify, report.
// Global flags: --config <file>, --seed <n>, --out <dir>.
// Exit codes: 0 success, 1 failed verification verdict, 2 usage error.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ctcc/config.hpp"
#include "ctcc/harness.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    bool seed_set = false;
    uint64_t seed = 0;
};

ctcc::ExperimentConfig resolve_config(const GlobalArgs& g) {
    ctcc::ExperimentConfig cfg =
        g.config_path.empty() ? ctcc::ExperimentConfig::defaults() : ctcc::ExperimentConfig::from_file(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CTCC fingerprinting lab: dataset generation, injection, verification and attacks"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs g;
    app.add_option("--config", g.config_path, "Experiment config file");
    app.add_option("--out", g.out_dir, "Output directory (overrides [run] out)");
    auto* seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides [run] seed)");

    auto* gen = app.add_subcommand("gen-data", "Generate the trigger/suppression/normal dataset bundle");
    auto* pipe = app.add_subcommand("pipeline", "Pretrain base, inject the fingerprint, verify");
    auto* attack = app.add_subcommand("attack", "Run a robustness attack sweep against fp.ckpt");
    std::string attack_name;
    attack->add_option("name", attack_name, "Attack family: rp|quant|merge|prune|finetune|sweep")->required();
    auto* verify = app.add_subcommand("verify", "Verify an arbitrary checkpoint against the bundle");
    std::string ckpt_path;
    verify->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
    auto* report = app.add_subcommand("report", "Aggregate report.csv into report.md and summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints help or the error
        return 2;
    }

    try {
        g.seed_set = seed_opt->count() > 0;
        const ctcc::ExperimentConfig cfg = resolve_config(g);
        const std::filesystem::path out = cfg.out_dir;
        std::filesystem::create_directories(out);
        if (gen->parsed()) return ctcc::cmd_gen_data(cfg, out);
        if (pipe->parsed()) return ctcc::cmd_pipeline(cfg, out);
        if (attack->parsed()) return ctcc::cmd_attack(cfg, out, attack_name);
        if (verify->parsed()) return ctcc::cmd_verify(cfg, out, ckpt_path);
        if (report->parsed()) return ctcc::cmd_report(cfg, out);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
