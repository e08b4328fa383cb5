#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <openssl/sha.h>

#include "vmig/error.hpp"
#include "vmig/harness/config_file.hpp"
#include "vmig/learner/config.hpp"
#include "vmig/sim/world_config.hpp"
#include "vmig/trust/config.hpp"

namespace vmig::harness {

enum class SweepAxis { none, data_size, bandwidth, compute, attack_frequency, steps };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::none: return "none";
        case SweepAxis::data_size: return "data_size";
        case SweepAxis::bandwidth: return "bandwidth";
        case SweepAxis::compute: return "compute";
        case SweepAxis::attack_frequency: return "attack_frequency";
        case SweepAxis::steps: return "steps";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& key, const std::string& name) {
    for (auto a : {SweepAxis::none, SweepAxis::data_size, SweepAxis::bandwidth, SweepAxis::compute,
                   SweepAxis::attack_frequency, SweepAxis::steps})
        if (to_string(a) == name) return a;
    throw ConfigError(key + ": unknown sweep axis '" + name +
                      "' (expected none, data_size, bandwidth, compute, attack_frequency or steps)");
}

struct ExperimentConfig {
    sim::WorldConfig world;
    trust::TrustConfig trust;
    learner::TrainerConfig trainer;
    learner::Mode mode = learner::Mode::cgdm;
    SweepAxis sweep_axis = SweepAxis::none;
    std::vector<double> sweep_values;
    bool allow_out_of_range = false;     // sweep values outside the nominal ranges
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string output_dir = "runs";
    int summary_window = 20;             // trailing epochs aggregated in the summary
    std::string checkpoint;              // policy to load for `evaluate`

    void validate() const {
        world.validate();
        trust.validate();
        trainer.validate();
        if (seeds.empty()) throw ConfigError("experiment.seeds: at least one seed is required");
        if (summary_window < 1) throw ConfigError("experiment.summary_window: must be >= 1");
        if (sweep_axis != SweepAxis::none && sweep_values.empty())
            throw ConfigError("experiment.sweep_values: required when a sweep axis is set");
        for (double v : sweep_values) check_sweep_value(v);
    }

    // Nominal range of each sweep axis.
    static std::pair<double, double> sweep_range(SweepAxis a) {
        switch (a) {
            case SweepAxis::data_size: return {100.0, 600.0};
            case SweepAxis::bandwidth: return {100.0, 300.0};
            case SweepAxis::compute: return {1e8, 3e8};
            case SweepAxis::attack_frequency: return {0.0, 1.0};
            case SweepAxis::steps: return {1.0, 15.0};
            case SweepAxis::none: break;
        }
        return {0.0, 0.0};
    }

    void check_sweep_value(double v) const {
        if (sweep_axis == SweepAxis::none) return;
        const auto [lo, hi] = sweep_range(sweep_axis);
        if (sweep_axis == SweepAxis::steps && (v < 1.0 || v != static_cast<double>(static_cast<int>(v))))
            throw ConfigError("experiment.sweep_values: steps must be positive integers");
        if (sweep_axis == SweepAxis::attack_frequency && (v < 0.0 || v > 1.0))
            throw ConfigError("experiment.sweep_values: attack frequency must lie in [0,1]");
        if (!allow_out_of_range && (v < lo || v > hi))
            throw ConfigError("experiment.sweep_values: " + format_double(v) + " is outside [" + format_double(lo) +
                              ", " + format_double(hi) + "] for axis " + to_string(sweep_axis) +
                              " (set experiment.allow_out_of_range = true to override)");
    }

    // Copy with one sweep value applied.
    ExperimentConfig with_sweep_value(double v) const {
        check_sweep_value(v);
        ExperimentConfig c = *this;
        switch (sweep_axis) {
            case SweepAxis::data_size: c.world.data_size_min = c.world.data_size_max = v; break;
            case SweepAxis::bandwidth:
                c.world.uplink_bandwidth_min = c.world.uplink_bandwidth_max = v;
                c.world.downlink_bandwidth_min = c.world.downlink_bandwidth_max = v;
                break;
            case SweepAxis::compute: c.world.cpu_speed_min = c.world.cpu_speed_max = v; break;
            case SweepAxis::attack_frequency: c.world.attack_frequency = v; break;
            case SweepAxis::steps: c.trainer.policy.steps = static_cast<int>(v); break;
            case SweepAxis::none: break;
        }
        return c;
    }
};

// One configuration key bound to a field of ExperimentConfig.
struct ConfigField {
    std::string key;
    std::string help;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

namespace detail {

template <class Proj>
ConfigField real(std::string key, std::string help, Proj proj) {
    return {key, std::move(help), [proj](const ExperimentConfig& c) { return format_double(proj(c)); },
            [proj, key](ExperimentConfig& c, const std::string& v) { proj(c) = parse_double(key, v); }};
}

template <class Proj>
ConfigField integer(std::string key, std::string help, Proj proj) {
    return {key, std::move(help), [proj](const ExperimentConfig& c) { return std::to_string(proj(c)); },
            [proj, key](ExperimentConfig& c, const std::string& v) { proj(c) = parse_int(key, v); }};
}

template <class Proj>
ConfigField boolean(std::string key, std::string help, Proj proj) {
    return {key, std::move(help),
            [proj](const ExperimentConfig& c) { return std::string(proj(c) ? "true" : "false"); },
            [proj, key](ExperimentConfig& c, const std::string& v) { proj(c) = parse_bool(key, v); }};
}

template <class Proj>
ConfigField int_list(std::string key, std::string help, Proj proj) {
    return {key, std::move(help),
            [proj](const ExperimentConfig& c) {
                std::string out;
                for (int x : proj(c)) out += (out.empty() ? "" : ",") + std::to_string(x);
                return out;
            },
            [proj, key](ExperimentConfig& c, const std::string& v) {
                auto& dst = proj(c);
                dst.clear();
                for (const auto& item : split_list(v)) dst.push_back(parse_int(key, item));
            }};
}

}  // namespace detail

// Every configuration key, in canonical order.
inline const std::vector<ConfigField>& config_fields() {
    using detail::boolean;
    using detail::int_list;
    using detail::integer;
    using detail::real;
    using C = ExperimentConfig;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        // world
        f.push_back(integer("world.num_vehicles", "vehicles V", [](auto& c) -> auto& { return c.world.num_vehicles; }));
        f.push_back(integer("world.num_rsus", "RSUs S", [](auto& c) -> auto& { return c.world.num_rsus; }));
        f.push_back(real("world.map_extent", "side of the square map, m", [](auto& c) -> auto& { return c.world.map_extent; }));
        f.push_back({"world.rsu_positions", "x:y pairs separated by commas; empty places RSUs on a grid",
                     [](const C& c) {
                         std::string out;
                         for (const auto& p : c.world.rsu_positions)
                             out += (out.empty() ? "" : ",") + format_double(p.x) + ":" + format_double(p.y);
                         return out;
                     },
                     [](C& c, const std::string& v) {
                         c.world.rsu_positions.clear();
                         for (const auto& item : split_list(v)) {
                             const auto xy = split_list(item, ':');
                             if (xy.size() != 2)
                                 throw ConfigError("world.rsu_positions: expected x:y, got '" + item + "'");
                             c.world.rsu_positions.push_back(
                                 {parse_double("world.rsu_positions", xy[0]), parse_double("world.rsu_positions", xy[1])});
                         }
                     }});
        f.push_back(real("world.rsu_coverage_radius", "beacon coverage radius, m", [](auto& c) -> auto& { return c.world.rsu_coverage_radius; }));
        f.push_back(real("world.carrier_frequency", "Hz", [](auto& c) -> auto& { return c.world.carrier_frequency; }));
        f.push_back(real("world.channel_gain_coeff", "path-loss coefficient", [](auto& c) -> auto& { return c.world.channel_gain_coeff; }));
        f.push_back(real("world.light_speed", "m/s", [](auto& c) -> auto& { return c.world.light_speed; }));
        f.push_back(real("world.uplink_bandwidth_min", "Mbit/s", [](auto& c) -> auto& { return c.world.uplink_bandwidth_min; }));
        f.push_back(real("world.uplink_bandwidth_max", "Mbit/s", [](auto& c) -> auto& { return c.world.uplink_bandwidth_max; }));
        f.push_back(real("world.downlink_bandwidth_min", "Mbit/s", [](auto& c) -> auto& { return c.world.downlink_bandwidth_min; }));
        f.push_back(real("world.downlink_bandwidth_max", "Mbit/s", [](auto& c) -> auto& { return c.world.downlink_bandwidth_max; }));
        f.push_back(real("world.inter_rsu_bandwidth", "Mbit/s between RSUs", [](auto& c) -> auto& { return c.world.inter_rsu_bandwidth; }));
        f.push_back(real("world.vehicle_tx_power", "W", [](auto& c) -> auto& { return c.world.vehicle_tx_power; }));
        f.push_back(real("world.noise_power", "W", [](auto& c) -> auto& { return c.world.noise_power; }));
        f.push_back(real("world.cycles_per_bit", "CPU cycles per bit", [](auto& c) -> auto& { return c.world.cycles_per_bit; }));
        f.push_back(real("world.cpu_speed_min", "cycles/s", [](auto& c) -> auto& { return c.world.cpu_speed_min; }));
        f.push_back(real("world.cpu_speed_max", "cycles/s", [](auto& c) -> auto& { return c.world.cpu_speed_max; }));
        f.push_back(integer("world.rsu_max_load", "agents per RSU; 0 means ceil(2V/S)", [](auto& c) -> auto& { return c.world.rsu_max_load; }));
        f.push_back(real("world.mtd_latency", "s charged per vehicle when MTD is active", [](auto& c) -> auto& { return c.world.mtd_latency; }));
        f.push_back(boolean("world.mtd_enabled", "false forces MTD off", [](auto& c) -> auto& { return c.world.mtd_enabled; }));
        f.push_back(real("world.attack_frequency", "attack probability per slot per target", [](auto& c) -> auto& { return c.world.attack_frequency; }));
        f.push_back(real("world.attack_degradation", "bandwidth and CPU multiplier under attack", [](auto& c) -> auto& { return c.world.attack_degradation; }));
        f.push_back(int_list("world.attack_targets", "attacked RSU indices", [](auto& c) -> auto& { return c.world.attack_targets; }));
        f.push_back(integer("world.episode_length", "slots per episode", [](auto& c) -> auto& { return c.world.episode_length; }));
        f.push_back(real("world.reputation_threshold", "minimum reputation of a migration target", [](auto& c) -> auto& { return c.world.reputation_threshold; }));
        f.push_back(real("world.data_size_min", "construction data, Mbit", [](auto& c) -> auto& { return c.world.data_size_min; }));
        f.push_back(real("world.data_size_max", "construction data, Mbit", [](auto& c) -> auto& { return c.world.data_size_max; }));
        f.push_back(real("world.raw_fraction", "raw data as a fraction of the construction range", [](auto& c) -> auto& { return c.world.raw_fraction; }));
        f.push_back(real("world.compute_fraction", "compute data fraction", [](auto& c) -> auto& { return c.world.compute_fraction; }));
        f.push_back(real("world.result_fraction", "result data fraction", [](auto& c) -> auto& { return c.world.result_fraction; }));
        f.push_back(real("world.speed_min", "vehicle speed, m/s", [](auto& c) -> auto& { return c.world.speed_min; }));
        f.push_back(real("world.speed_max", "vehicle speed, m/s", [](auto& c) -> auto& { return c.world.speed_max; }));
        f.push_back(real("world.slot_duration", "s of motion per slot", [](auto& c) -> auto& { return c.world.slot_duration; }));
        f.push_back(integer("world.beacon_packets", "beacons per vehicle, direction and slot", [](auto& c) -> auto& { return c.world.beacon_packets; }));
        f.push_back(real("world.beacon_loss", "beacon loss probability", [](auto& c) -> auto& { return c.world.beacon_loss; }));
        f.push_back(real("world.attack_beacon_loss", "beacon loss under an undefended attack", [](auto& c) -> auto& { return c.world.attack_beacon_loss; }));
        f.push_back({"world.seed", "seed of the environment's initial reset",
                     [](const C& c) { return std::to_string(c.world.seed); },
                     [](C& c, const std::string& v) { c.world.seed = parse_u64("world.seed", v); }});
        // trust
        f.push_back(real("trust.attitude_prior_alpha", "Beta prior, positive pseudo-count", [](auto& c) -> auto& { return c.trust.attitude_prior_alpha; }));
        f.push_back(real("trust.attitude_prior_beta", "Beta prior, negative pseudo-count", [](auto& c) -> auto& { return c.trust.attitude_prior_beta; }));
        f.push_back(real("trust.norm_prior_alpha", "Beta prior for the subjective norm", [](auto& c) -> auto& { return c.trust.norm_prior_alpha; }));
        f.push_back(real("trust.norm_prior_beta", "Beta prior for the subjective norm", [](auto& c) -> auto& { return c.trust.norm_prior_beta; }));
        f.push_back(real("trust.reliability_weight", "received vs forwarded beacon weight", [](auto& c) -> auto& { return c.trust.reliability_weight; }));
        f.push_back(real("trust.control_weight", "reliability vs efficiency weight", [](auto& c) -> auto& { return c.trust.control_weight; }));
        f.push_back(real("trust.update_rate", "weight of the newest reputation", [](auto& c) -> auto& { return c.trust.update_rate; }));
        f.push_back(real("trust.weight_attitude", "factor weight", [](auto& c) -> auto& { return c.trust.weight_attitude; }));
        f.push_back(real("trust.weight_norm", "factor weight", [](auto& c) -> auto& { return c.trust.weight_norm; }));
        f.push_back(real("trust.weight_control", "factor weight", [](auto& c) -> auto& { return c.trust.weight_control; }));
        f.push_back(integer("trust.window_slots", "evidence window, slots", [](auto& c) -> auto& { return c.trust.window_slots; }));
        f.push_back(real("trust.tolerable_latency_min", "s", [](auto& c) -> auto& { return c.trust.tolerable_latency_min; }));
        f.push_back(real("trust.tolerable_latency_max", "s", [](auto& c) -> auto& { return c.trust.tolerable_latency_max; }));
        f.push_back(real("trust.initial_reputation", "reputation before any evidence", [](auto& c) -> auto& { return c.trust.initial_reputation; }));
        // diffusion
        f.push_back(integer("diffusion.steps", "denoising steps K", [](auto& c) -> auto& { return c.trainer.policy.steps; }));
        f.push_back(real("diffusion.beta_min", "schedule", [](auto& c) -> auto& { return c.trainer.policy.beta_min; }));
        f.push_back(real("diffusion.beta_max", "schedule", [](auto& c) -> auto& { return c.trainer.policy.beta_max; }));
        f.push_back(integer("diffusion.embedding_dim", "step embedding width", [](auto& c) -> auto& { return c.trainer.policy.embedding_dim; }));
        f.push_back(int_list("diffusion.hidden", "denoiser hidden widths", [](auto& c) -> auto& { return c.trainer.policy.hidden; }));
        f.push_back(boolean("diffusion.clamp_noise", "tanh on the predicted noise", [](auto& c) -> auto& { return c.trainer.policy.clamp_noise; }));
        f.push_back({"diffusion.squash", "tanh or clip",
                     [](const C& c) { return std::string(c.trainer.policy.squash == diffusion::Squash::tanh ? "tanh" : "clip"); },
                     [](C& c, const std::string& v) {
                         if (v == "tanh") c.trainer.policy.squash = diffusion::Squash::tanh;
                         else if (v == "clip") c.trainer.policy.squash = diffusion::Squash::clip;
                         else throw ConfigError("diffusion.squash: expected tanh or clip, got '" + v + "'");
                     }});
        f.push_back(boolean("diffusion.rescale_latent", "scale x0 by sqrt(alpha_bar_K) before squashing", [](auto& c) -> auto& { return c.trainer.policy.rescale_latent; }));
        f.push_back(real("diffusion.latent_limit", "bound when mapping stored actions back to latents", [](auto& c) -> auto& { return c.trainer.policy.latent_limit; }));
        f.push_back(real("diffusion.kappa", "confidence sharpness", [](auto& c) -> auto& { return c.trainer.kappa; }));
        // trainer
        f.push_back(integer("trainer.epochs", "E", [](auto& c) -> auto& { return c.trainer.epochs; }));
        f.push_back(integer("trainer.batch_size", "M", [](auto& c) -> auto& { return c.trainer.batch_size; }));
        f.push_back(integer("trainer.buffer_capacity", "D", [](auto& c) -> auto& { return c.trainer.buffer_capacity; }));
        f.push_back(real("trainer.actor_learning_rate", "", [](auto& c) -> auto& { return c.trainer.actor_learning_rate; }));
        f.push_back(real("trainer.critic_learning_rate", "", [](auto& c) -> auto& { return c.trainer.critic_learning_rate; }));
        f.push_back(real("trainer.soft_update_rate", "target network rate", [](auto& c) -> auto& { return c.trainer.soft_update_rate; }));
        f.push_back(real("trainer.discount", "gamma", [](auto& c) -> auto& { return c.trainer.discount; }));
        f.push_back(real("trainer.rho", "consistency term weight", [](auto& c) -> auto& { return c.trainer.rho; }));
        f.push_back(integer("trainer.gradient_steps", "updates per epoch", [](auto& c) -> auto& { return c.trainer.gradient_steps; }));
        f.push_back(integer("trainer.trajectories_per_epoch", "episodes collected per epoch", [](auto& c) -> auto& { return c.trainer.trajectories_per_epoch; }));
        f.push_back(integer("trainer.warmup_transitions", "no updates before the buffer holds this many", [](auto& c) -> auto& { return c.trainer.warmup_transitions; }));
        f.push_back(integer("trainer.eval_episodes", "test episodes per epoch", [](auto& c) -> auto& { return c.trainer.eval_episodes; }));
        f.push_back(boolean("trainer.greedy_evaluation", "test episodes use the noise-free chain", [](auto& c) -> auto& { return c.trainer.greedy_evaluation; }));
        f.push_back(int_list("trainer.critic_hidden", "critic hidden widths", [](auto& c) -> auto& { return c.trainer.critic_hidden; }));
        f.push_back(boolean("trainer.stop_gradient_confidence", "treat the confidence weight as a constant", [](auto& c) -> auto& { return c.trainer.stop_gradient_confidence; }));
        f.push_back(boolean("trainer.actor_uses_min_critic", "guide the actor with min of both critics", [](auto& c) -> auto& { return c.trainer.actor_uses_min_critic; }));
        f.push_back(real("trainer.reward_scale", "multiplier on stored rewards", [](auto& c) -> auto& { return c.trainer.reward_scale; }));
        f.push_back(real("trainer.grad_clip", "global gradient norm clip, 0 = off", [](auto& c) -> auto& { return c.trainer.grad_clip; }));
        f.push_back(integer("trainer.checkpoint_every", "epochs between checkpoints, 0 = final only", [](auto& c) -> auto& { return c.trainer.checkpoint_every; }));
        // experiment
        f.push_back({"experiment.mode", "cgdm, no-con, no-dc, gdm or random",
                     [](const C& c) { return learner::to_string(c.mode); },
                     [](C& c, const std::string& v) {
                         try {
                             c.mode = learner::parse_mode(v);
                         } catch (const ConfigError& e) {
                             throw ConfigError(std::string("experiment.") + e.what());
                         }
                     }});
        f.push_back({"experiment.sweep_axis", "none, data_size, bandwidth, compute, attack_frequency or steps",
                     [](const C& c) { return to_string(c.sweep_axis); },
                     [](C& c, const std::string& v) { c.sweep_axis = parse_sweep_axis("experiment.sweep_axis", v); }});
        f.push_back({"experiment.sweep_values", "comma-separated values",
                     [](const C& c) {
                         std::string out;
                         for (double x : c.sweep_values) out += (out.empty() ? "" : ",") + format_double(x);
                         return out;
                     },
                     [](C& c, const std::string& v) {
                         c.sweep_values.clear();
                         for (const auto& item : split_list(v)) c.sweep_values.push_back(parse_double("experiment.sweep_values", item));
                     }});
        f.push_back(boolean("experiment.allow_out_of_range", "accept sweep values outside the nominal ranges", [](auto& c) -> auto& { return c.allow_out_of_range; }));
        f.push_back({"experiment.seeds", "comma-separated run seeds",
                     [](const C& c) {
                         std::string out;
                         for (auto s : c.seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
                         return out;
                     },
                     [](C& c, const std::string& v) {
                         c.seeds.clear();
                         for (const auto& item : split_list(v)) c.seeds.push_back(parse_u64("experiment.seeds", item));
                     }});
        f.push_back({"experiment.output_dir", "directory for run outputs",
                     [](const C& c) { return c.output_dir; }, [](C& c, const std::string& v) { c.output_dir = v; }});
        f.push_back(integer("experiment.summary_window", "trailing epochs aggregated in the summary", [](auto& c) -> auto& { return c.summary_window; }));
        f.push_back({"experiment.checkpoint", "checkpoint evaluated by the evaluate verb",
                     [](const C& c) { return c.checkpoint; }, [](C& c, const std::string& v) { c.checkpoint = v; }});
        return f;
    }();
    return fields;
}

inline const ConfigField* find_field(const std::string& key) {
    for (const auto& f : config_fields())
        if (f.key == key) return &f;
    return nullptr;
}

// Applies entries on top of `base`. Unknown keys are rejected.
inline ExperimentConfig apply_entries(ExperimentConfig base, const std::vector<ConfigEntry>& entries) {
    for (const auto& e : entries) {
        const auto* f = find_field(e.key);
        if (!f) throw ConfigError(e.key + ": unknown key (line " + std::to_string(e.line) + ")");
        f->set(base, e.value);
    }
    return base;
}

inline ExperimentConfig load_config_text(const std::string& text, const std::string& origin = "<config>") {
    auto c = apply_entries(ExperimentConfig{}, parse_config_text(text, origin));
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    auto c = apply_entries(ExperimentConfig{}, parse_config_file(path));
    c.validate();
    return c;
}

// Every key with its resolved value, one per line, in canonical order.
inline std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    for (const auto& f : config_fields()) out += f.key + " = " + f.get(c) + "\n";
    return out;
}

// Hash of `text` as git computes it for a blob.
inline std::string git_blob_sha1(const std::string& text) {
    const std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
    std::string hex;
    char buf[3];
    for (unsigned char b : digest) {
        std::snprintf(buf, sizeof(buf), "%02x", b);
        hex += buf;
    }
    return hex;
}

inline std::string config_hash(const ExperimentConfig& c) { return git_blob_sha1(serialize_config(c)); }

}  // namespace vmig::harness
