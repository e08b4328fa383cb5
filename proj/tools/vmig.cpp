// Command-line front end: train, ablate, sweep, evaluate, replay.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vmig/harness/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string out;
    std::string sweep_axis;
    std::string sweep_values;
    std::string checkpoint;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "configuration file (key = value lines)");
    cmd->add_option("--seed", f.seed, "run a single seed instead of experiment.seeds");
    cmd->add_option("--mode", f.mode, "cgdm, no-con, no-dc, gdm or random");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_flag("--verbose", f.verbose, "per-epoch progress on stderr");
}

vmig::harness::ExperimentConfig resolve(const Flags& f) {
    using namespace vmig::harness;
    std::vector<ConfigEntry> entries;
    if (!f.config.empty()) entries = parse_config_file(f.config);
    // Command-line flags override the file.
    auto set = [&](const std::string& key, const std::string& value) {
        std::erase_if(entries, [&](const ConfigEntry& e) { return e.key == key; });
        entries.push_back({key, value, 0});
    };
    if (f.seed) set("experiment.seeds", std::to_string(*f.seed));
    if (!f.mode.empty()) set("experiment.mode", f.mode);
    if (!f.out.empty()) set("experiment.output_dir", f.out);
    if (!f.sweep_axis.empty()) set("experiment.sweep_axis", f.sweep_axis);
    if (!f.sweep_values.empty()) set("experiment.sweep_values", f.sweep_values);
    if (!f.checkpoint.empty()) set("experiment.checkpoint", f.checkpoint);
    auto cfg = apply_entries(ExperimentConfig{}, entries);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trust-aware vehicular agent migration with confidence-regulated diffusion policies"};
    app.require_subcommand(1);
    Flags f;

    auto* train = app.add_subcommand("train", "train one mode over the configured seeds");
    add_common(train, f);
    auto* ablate = app.add_subcommand("ablate", "train cgdm, no-con, no-dc and gdm over the configured seeds");
    add_common(ablate, f);
    auto* sweep = app.add_subcommand("sweep", "train one mode for every value of a sweep axis");
    add_common(sweep, f);
    sweep->add_option("--sweep-axis", f.sweep_axis, "data_size, bandwidth, compute, attack_frequency or steps");
    sweep->add_option("--sweep-values", f.sweep_values, "comma-separated values");
    auto* evaluate = app.add_subcommand("evaluate", "per-slot traces of a checkpointed policy");
    add_common(evaluate, f);
    evaluate->add_option("--checkpoint", f.checkpoint, "checkpoint written by train");
    auto* replay = app.add_subcommand("replay", "re-run a recorded manifest and compare metric files");
    replay->add_option("--config", f.config, "manifest.cfg of a finished run")->required();
    replay->add_option("--out", f.out, "directory for the replayed run");

    CLI11_PARSE(app, argc, argv);

    try {
        vmig::harness::RunOptions opt;
        opt.verbose = f.verbose;
        if (replay->parsed()) {
            const std::string out = f.out.empty() ? "replay" : f.out;
            const auto r = vmig::harness::run_replay(f.config, out);
            std::cout << (r.identical ? "identical: " : "DIFFERENT: ") << r.original << " vs " << r.replayed << "\n";
            return r.identical ? 0 : 1;
        }
        const auto cfg = resolve(f);
        std::vector<vmig::harness::RunResult> runs;
        if (train->parsed()) runs = vmig::harness::run_train(cfg, opt);
        else if (ablate->parsed()) runs = vmig::harness::run_ablate(cfg, opt);
        else if (sweep->parsed()) runs = vmig::harness::run_sweep(cfg, opt);
        else if (evaluate->parsed()) {
            for (auto seed : cfg.seeds) vmig::harness::run_evaluate(cfg, seed, opt);
            return 0;
        }
        for (const auto& r : runs)
            if (r.failed) return 1;
        return 0;
    } catch (const vmig::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const vmig::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
