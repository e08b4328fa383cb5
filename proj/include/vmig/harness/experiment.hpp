#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vmig/error.hpp"
#include "vmig/harness/experiment_config.hpp"
#include "vmig/harness/metrics.hpp"
#include "vmig/learner/trainer.hpp"
#include "vmig/nn/checkpoint.hpp"
#include "vmig/sim/environment.hpp"

namespace vmig::harness {

namespace fs = std::filesystem;

struct RunResult {
    std::string run_id;
    learner::Mode mode = learner::Mode::cgdm;
    std::uint64_t seed = 0;
    std::optional<double> sweep_value;
    std::vector<MetricRow> rows;     // deterministic metrics
    std::vector<MetricRow> timing;   // wall-clock rows, kept apart
    std::string directory;           // empty when nothing was written
    std::string manifest_hash;
    bool failed = false;
    std::string error;
};

struct RunOptions {
    bool write_files = true;
    bool verbose = false;  // per-epoch progress on stderr
};

inline std::string run_id_for(learner::Mode mode, std::uint64_t seed, SweepAxis axis = SweepAxis::none,
                              std::optional<double> value = std::nullopt) {
    std::string id = learner::to_string(mode) + "-s" + std::to_string(seed);
    if (axis != SweepAxis::none && value) id += "-" + to_string(axis) + "=" + format_double(*value);
    return id;
}

inline std::vector<MetricRow> epoch_rows(const std::string& run_id, learner::Mode mode, std::uint64_t seed,
                                         const learner::EpochMetrics& m) {
    const std::string name = learner::to_string(mode);
    std::vector<MetricRow> rows;
    auto add = [&](const char* metric, double v) { rows.push_back({run_id, name, seed, m.epoch, metric, v}); };
    add("test_reward", m.test_reward);
    add("test_latency", m.test_latency);
    add("test_violations", static_cast<double>(m.test_violations));
    if (mode != learner::Mode::random) {
        add("train_reward", m.train_reward);
        add("train_violations", static_cast<double>(m.train_violations));
        add("actor_objective", m.actor_objective);
        add("critic_loss", m.critic_loss);
        add("mean_confidence", m.mean_confidence);
        add("bc_loss", m.bc_loss);
        add("consistency_grad_norm", m.consistency_grad_norm);
    }
    add("gradient_steps", static_cast<double>(m.gradient_steps));
    return rows;
}

// Resolved configuration of a single run: one mode, one seed, sweep applied.
inline ExperimentConfig cell_config(const ExperimentConfig& base, learner::Mode mode, std::uint64_t seed,
                                    std::optional<double> sweep_value) {
    ExperimentConfig c = sweep_value ? base.with_sweep_value(*sweep_value) : base;
    c.mode = mode;
    c.seeds = {seed};
    c.sweep_axis = SweepAxis::none;
    c.sweep_values.clear();
    return c;
}

inline std::string manifest_text(const ExperimentConfig& c) {
    return "# resolved configuration; hash = git blob SHA-1 of the lines below\n" + serialize_config(c);
}

// Trains (or, in random mode, only evaluates) one (mode, seed, sweep value) cell.
inline RunResult run_cell(const ExperimentConfig& base, learner::Mode mode, std::uint64_t seed,
                          std::optional<double> sweep_value = std::nullopt, const RunOptions& opt = {}) {
    const ExperimentConfig cfg = cell_config(base, mode, seed, sweep_value);
    cfg.validate();
    RunResult out;
    out.run_id = run_id_for(mode, seed, base.sweep_axis, sweep_value);
    out.mode = mode;
    out.seed = seed;
    out.sweep_value = sweep_value;
    out.manifest_hash = config_hash(cfg);

    if (opt.write_files) {
        out.directory = (fs::path(base.output_dir) / out.run_id).string();
        fs::create_directories(out.directory);
        write_text_file((fs::path(out.directory) / "manifest.cfg").string(), manifest_text(cfg));
        write_text_file((fs::path(out.directory) / "manifest.sha1").string(), out.manifest_hash + "\n");
    }

    sim::Environment probe(cfg.world, cfg.trust);
    learner::Trainer trainer(probe.observation_dim(), probe.action_dim(), cfg.trainer, mode, seed);
    learner::TrainHooks hooks;
    if (opt.write_files) hooks.diagnostic_checkpoint = (fs::path(out.directory) / "diverged.ckpt").string();
    hooks.on_epoch = [&](const learner::EpochMetrics& m, const learner::Trainer& t) {
        for (auto& r : epoch_rows(out.run_id, mode, seed, m)) out.rows.push_back(std::move(r));
        out.timing.push_back({out.run_id, learner::to_string(mode), seed, m.epoch, "wall_seconds", m.wall_seconds});
        if (opt.verbose && (m.epoch % 10 == 0 || m.epoch + 1 == cfg.trainer.epochs))
            std::cerr << out.run_id << " epoch " << m.epoch << " test_reward " << m.test_reward << " confidence "
                      << m.mean_confidence << "\n";
        if (opt.write_files && mode != learner::Mode::random && cfg.trainer.checkpoint_every > 0 &&
            (m.epoch + 1) % cfg.trainer.checkpoint_every == 0)
            nn::save_checkpoint((fs::path(out.directory) / ("epoch-" + std::to_string(m.epoch + 1) + ".ckpt")).string(),
                                t.checkpoint());
    };

    try {
        learner::train(cfg.world, cfg.trust, trainer, cfg.trainer.epochs, seed, hooks);
    } catch (const DivergenceError& e) {
        out.failed = true;
        out.error = e.what();
    }

    if (opt.write_files) {
        write_metrics((fs::path(out.directory) / "metrics.csv").string(), out.rows);
        write_metrics((fs::path(out.directory) / "timing.csv").string(), out.timing);
        if (out.failed) write_text_file((fs::path(out.directory) / "FAILED").string(), out.error + "\n");
        else if (mode != learner::Mode::random)
            nn::save_checkpoint((fs::path(out.directory) / "final.ckpt").string(), trainer.checkpoint());
    }
    return out;
}

inline std::string group_label(const RunResult& r, SweepAxis axis) {
    std::string g = learner::to_string(r.mode);
    if (r.sweep_value) g += "@" + to_string(axis) + "=" + format_double(*r.sweep_value);
    return g;
}

// Mean and std over seeds of every metric's trailing-window average, per group.
inline nlohmann::json summarize(const std::vector<RunResult>& runs, const ExperimentConfig& base) {
    std::vector<MetricRow> rows, timing;
    std::map<std::string, std::string> label;  // run_id -> group
    for (const auto& r : runs) {
        if (r.failed) continue;
        label[r.run_id] = group_label(r, base.sweep_axis);
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        timing.insert(timing.end(), r.timing.begin(), r.timing.end());
    }
    auto group_of = [&](const MetricRow& row) { return label.at(row.run_id); };
    nlohmann::json j;
    j["summary_window"] = base.summary_window;
    j["metrics"] = to_json(aggregate_final(rows, base.summary_window, group_of));
    // Wall time is averaged over every epoch rather than the trailing window.
    j["wall_seconds_per_epoch"] = to_json(aggregate_final(timing, std::numeric_limits<int>::max(), group_of));
    j["failures"] = nlohmann::json::array();
    for (const auto& r : runs)
        if (r.failed) j["failures"].push_back({{"run_id", r.run_id}, {"error", r.error}});

    if (base.sweep_axis != SweepAxis::none) {
        // Reward per sweep value rescaled to [0,1] between the worst and best value.
        auto metrics = j["metrics"];
        std::map<std::string, double> reward;
        for (const auto& [group, m] : metrics.items())
            if (m.contains("test_reward")) reward[group] = m["test_reward"]["mean"].get<double>();
        if (!reward.empty()) {
            double lo = reward.begin()->second, hi = lo;
            for (const auto& [g, v] : reward) lo = std::min(lo, v), hi = std::max(hi, v);
            for (const auto& [g, v] : reward) j["normalized_reward"][g] = hi > lo ? (v - lo) / (hi - lo) : 1.0;
        }
    }
    return j;
}

inline void write_summary(const std::vector<RunResult>& runs, const ExperimentConfig& base) {
    fs::create_directories(base.output_dir);
    auto j = summarize(runs, base);
    write_text_file((fs::path(base.output_dir) / "summary.json").string(), j.dump(2) + "\n");
}

inline std::vector<RunResult> run_modes(const ExperimentConfig& base, const std::vector<learner::Mode>& modes,
                                        const RunOptions& opt = {}) {
    std::vector<RunResult> runs;
    for (auto mode : modes)
        for (auto seed : base.seeds) {
            runs.push_back(run_cell(base, mode, seed, std::nullopt, opt));
            const auto& r = runs.back();
            std::cout << r.run_id << (r.failed ? " FAILED: " + r.error : " done") << std::endl;
        }
    if (opt.write_files) write_summary(runs, base);
    return runs;
}

inline std::vector<RunResult> run_train(const ExperimentConfig& base, const RunOptions& opt = {}) {
    return run_modes(base, {base.mode}, opt);
}

inline const std::vector<learner::Mode>& ablation_modes() {
    static const std::vector<learner::Mode> modes{learner::Mode::cgdm, learner::Mode::no_con, learner::Mode::no_dc,
                                                  learner::Mode::gdm};
    return modes;
}

inline std::vector<RunResult> run_ablate(const ExperimentConfig& base, const RunOptions& opt = {}) {
    return run_modes(base, ablation_modes(), opt);
}

inline std::vector<RunResult> run_sweep(const ExperimentConfig& base, const RunOptions& opt = {}) {
    if (base.sweep_axis == SweepAxis::none) throw ConfigError("experiment.sweep_axis: a sweep needs an axis");
    std::vector<RunResult> runs;
    for (double v : base.sweep_values)
        for (auto seed : base.seeds) {
            runs.push_back(run_cell(base, base.mode, seed, v, opt));
            const auto& r = runs.back();
            std::cout << r.run_id << (r.failed ? " FAILED: " + r.error : " done") << std::endl;
        }
    if (opt.write_files) write_summary(runs, base);
    return runs;
}

// Per-slot trace of evaluation episodes: reward, latency parts per vehicle,
// reputation per (user, RSU), attack and MTD flags.
inline std::vector<MetricRow> trace_episode(sim::Environment& env, std::uint64_t env_seed,
                                            const learner::ActionSource& source, std::mt19937_64& rng,
                                            const std::string& run_id, const std::string& mode, std::uint64_t seed) {
    std::vector<MetricRow> rows;
    Eigen::VectorXd obs = env.reset(env_seed);
    const int V = env.config().num_vehicles, S = env.config().num_rsus;
    while (!env.done()) {
        const auto slot = static_cast<std::int64_t>(env.state().slot);
        auto add = [&](const std::string& metric, double v) { rows.push_back({run_id, mode, seed, slot, metric, v}); };
        const Eigen::VectorXd a = source(obs, rng).col(0);
        const auto r = env.step(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
        add("reward", r.reward);
        add("violations", r.decision.violations);
        for (int v = 0; v < V; ++v) {
            const auto& l = r.latency[v];
            const std::string p = "v" + std::to_string(v) + ".";
            add(p + "t_uc", l.t_uc);
            add(p + "t_dep", l.t_dep);
            add(p + "t_um", l.t_um);
            add(p + "t_pro", l.t_pro);
            add(p + "t_down", l.t_down);
            add(p + "t_mig", l.t_mig);
            add(p + "t_ext", l.t_ext);
            add(p + "total", l.total);
            add(p + "target", r.decision.targets[v]);
        }
        for (int s = 0; s < S; ++s) {
            const std::string p = "s" + std::to_string(s) + ".";
            add(p + "attacked", r.attacked[s] ? 1.0 : 0.0);
            add(p + "mtd", r.decision.mtd[s] ? 1.0 : 0.0);
            add(p + "load", env.state().loads[s]);
        }
        const auto& rep = env.trust().reputation();
        for (int u = 0; u < V; ++u)
            for (int s = 0; s < S; ++s) add("reputation.u" + std::to_string(u) + ".s" + std::to_string(s), rep(u, s));
        obs = r.observation;
    }
    return rows;
}

// Evaluates a checkpointed policy (or the random baseline) and writes per-slot traces.
inline std::vector<MetricRow> run_evaluate(const ExperimentConfig& base, std::uint64_t seed, const RunOptions& opt = {}) {
    const ExperimentConfig cfg = cell_config(base, base.mode, seed, std::nullopt);
    cfg.validate();
    sim::Environment env(cfg.world, cfg.trust);
    learner::Trainer trainer(env.observation_dim(), env.action_dim(), cfg.trainer, cfg.mode, seed);
    if (cfg.mode != learner::Mode::random) {
        if (cfg.checkpoint.empty())
            throw ConfigError("experiment.checkpoint: evaluate needs a checkpoint unless the mode is random");
        trainer.restore(nn::load_checkpoint(cfg.checkpoint));
    }
    const learner::ActionSource source = [&](const Eigen::MatrixXd& o, std::mt19937_64& g) { return trainer.act_eval(o, g); };
    auto rng = learner::make_stream(seed, learner::eval_stream);
    auto env_rng = learner::make_stream(seed, learner::env_stream);
    std::vector<MetricRow> rows;
    for (int e = 0; e < cfg.trainer.eval_episodes; ++e) {
        const std::string id = "eval-" + learner::to_string(cfg.mode) + "-s" + std::to_string(seed) + "-e" + std::to_string(e);
        auto ep = trace_episode(env, env_rng(), source, rng, id, learner::to_string(cfg.mode), seed);
        rows.insert(rows.end(), ep.begin(), ep.end());
    }
    if (opt.write_files) {
        const auto dir = fs::path(cfg.output_dir) / ("eval-" + learner::to_string(cfg.mode) + "-s" + std::to_string(seed));
        fs::create_directories(dir);
        write_text_file((dir / "manifest.cfg").string(), manifest_text(cfg));
        write_text_file((dir / "manifest.sha1").string(), config_hash(cfg) + "\n");
        write_metrics((dir / "metrics.csv").string(), rows);
    }
    return rows;
}

struct ReplayOutcome {
    bool identical = false;
    std::string original;
    std::string replayed;
};

// Re-executes the run described by a manifest into `out_dir` and compares metric files byte for byte.
inline ReplayOutcome run_replay(const std::string& manifest_path, const std::string& out_dir) {
    const auto text = read_text_file(manifest_path);
    auto cfg = apply_entries(ExperimentConfig{}, parse_config_text(text, manifest_path));
    cfg.validate();
    if (cfg.seeds.size() != 1) throw ConfigError("experiment.seeds: a manifest names exactly one seed");
    const auto recorded = config_hash(cfg);
    const auto hash_file = fs::path(manifest_path).parent_path() / "manifest.sha1";
    if (fs::exists(hash_file) && trim(read_text_file(hash_file.string())) != recorded)
        throw IoError(manifest_path + ": content does not match manifest.sha1");
    cfg.output_dir = out_dir;
    auto result = run_cell(cfg, cfg.mode, cfg.seeds.front());
    ReplayOutcome o;
    o.original = (fs::path(manifest_path).parent_path() / "metrics.csv").string();
    o.replayed = (fs::path(result.directory) / "metrics.csv").string();
    o.identical = read_text_file(o.original) == read_text_file(o.replayed);
    return o;
}

}  // namespace vmig::harness
