#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmig/diffusion/policy.hpp"
#include "vmig/error.hpp"

namespace vmig::learner {

enum class Mode { cgdm, no_con, no_dc, gdm, random };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::cgdm: return "cgdm";
        case Mode::no_con: return "no-con";
        case Mode::no_dc: return "no-dc";
        case Mode::gdm: return "gdm";
        case Mode::random: return "random";
    }
    return "?";
}

inline Mode parse_mode(const std::string& name) {
    for (Mode m : {Mode::cgdm, Mode::no_con, Mode::no_dc, Mode::gdm, Mode::random})
        if (to_string(m) == name) return m;
    throw ConfigError("mode: unknown mode '" + name + "' (expected cgdm, no-con, no-dc, gdm or random)");
}

struct TrainerConfig {
    int epochs = 200;
    int batch_size = 256;
    int buffer_capacity = 1'000'000;
    double actor_learning_rate = 1e-4;
    double critic_learning_rate = 1e-3;
    double soft_update_rate = 0.005;
    double discount = 0.95;
    double kappa = 1.0;
    double rho = 1.0;
    int gradient_steps = 50;          // per epoch
    int trajectories_per_epoch = 1;
    int warmup_transitions = 0;       // no updates until the buffer holds this many
    int eval_episodes = 5;
    bool greedy_evaluation = true;          // noise-free reverse chain for test episodes
    std::vector<int> critic_hidden{256, 256};
    bool stop_gradient_confidence = false;  // treat w as a constant in the actor gradient
    bool actor_uses_min_critic = false;
    double reward_scale = 1.0;              // applied to rewards entering the buffer
    double grad_clip = 0.0;                 // global norm clip, 0 = off
    int checkpoint_every = 0;               // epochs, 0 = final only
    diffusion::PolicyConfig policy;

    // Effective coefficients after the mode switches.
    double effective_kappa(Mode m) const { return (m == Mode::no_con || m == Mode::gdm) ? 0.0 : kappa; }
    double effective_rho(Mode m) const { return (m == Mode::no_dc || m == Mode::gdm) ? 0.0 : rho; }

    void validate() const {
        auto fail = [](const std::string& key, const std::string& what) { throw ConfigError("trainer." + key + ": " + what); };
        if (epochs < 0) fail("epochs", "must be >= 0");
        if (batch_size < 1) fail("batch_size", "must be >= 1");
        if (buffer_capacity < 1) fail("buffer_capacity", "must be >= 1");
        if (!(actor_learning_rate > 0)) fail("actor_learning_rate", "must be positive");
        if (!(critic_learning_rate > 0)) fail("critic_learning_rate", "must be positive");
        if (!(soft_update_rate > 0 && soft_update_rate < 1)) fail("soft_update_rate", "must lie in (0,1)");
        if (!(discount > 0 && discount < 1)) fail("discount", "must lie in (0,1)");
        if (!(kappa >= 0)) fail("kappa", "must be >= 0");
        if (!(rho >= 0)) fail("rho", "must be >= 0");
        if (gradient_steps < 0) fail("gradient_steps", "must be >= 0");
        if (trajectories_per_epoch < 1) fail("trajectories_per_epoch", "must be >= 1");
        if (warmup_transitions < 0) fail("warmup_transitions", "must be >= 0");
        if (eval_episodes < 1) fail("eval_episodes", "must be >= 1");
        if (critic_hidden.empty()) fail("critic_hidden", "needs at least one layer");
        for (int w : critic_hidden)
            if (w < 1) fail("critic_hidden", "widths must be positive");
        if (!(reward_scale > 0)) fail("reward_scale", "must be positive");
        if (!(grad_clip >= 0)) fail("grad_clip", "must be >= 0");
        if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
        const auto& p = policy;
        auto pfail = [](const std::string& key, const std::string& what) { throw ConfigError("diffusion." + key + ": " + what); };
        if (p.steps < 1) pfail("steps", "must be >= 1");
        if (p.embedding_dim < 2) pfail("embedding_dim", "must be >= 2");
        if (p.hidden.empty()) pfail("hidden", "needs at least one layer");
        for (int w : p.hidden)
            if (w < 1) pfail("hidden", "widths must be positive");
        if (!(p.latent_limit > 0)) pfail("latent_limit", "must be positive");
        diffusion::NoiseSchedule::build(p.steps, p.beta_min, p.beta_max);
    }
};

}  // namespace vmig::learner
