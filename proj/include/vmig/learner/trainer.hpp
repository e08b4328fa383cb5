#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/diffusion/policy.hpp"
#include "vmig/error.hpp"
#include "vmig/learner/config.hpp"
#include "vmig/learner/objectives.hpp"
#include "vmig/learner/replay_buffer.hpp"
#include "vmig/nn/adam.hpp"
#include "vmig/nn/checkpoint.hpp"
#include "vmig/sim/environment.hpp"

namespace vmig::learner {

// Independent generator stream `stream` for a run seeded with `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

enum Stream : std::uint32_t { init_stream = 1, collect_stream = 2, update_stream = 3, eval_stream = 4, env_stream = 5 };

inline Matrix random_actions(int action_dim, Eigen::Index batch, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix a(action_dim, batch);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
    return a;
}

struct UpdateStats {
    double critic_loss = 0.0;
    ActorTerms actor;
};

// Online and target networks with their optimizers.
class Trainer {
public:
    Trainer(int observation_dim, int action_dim, TrainerConfig cfg, Mode mode, std::uint64_t seed)
        : cfg_(std::move(cfg)), mode_(mode), obs_dim_(observation_dim), action_dim_(action_dim) {
        cfg_.validate();
        auto rng = make_stream(seed, init_stream);
        actor_ = diffusion::DiffusionPolicy(observation_dim, action_dim, cfg_.policy, rng);
        critic1_ = make_critic(observation_dim, action_dim, cfg_.critic_hidden, rng);
        critic2_ = make_critic(observation_dim, action_dim, cfg_.critic_hidden, rng);
        target_actor_ = actor_;
        target_critic1_ = critic1_;
        target_critic2_ = critic2_;
        actor_opt_ = nn::AdamState(actor_.denoiser().num_params(), {cfg_.actor_learning_rate});
        critic1_opt_ = nn::AdamState(critic1_.num_params(), {cfg_.critic_learning_rate});
        critic2_opt_ = nn::AdamState(critic2_.num_params(), {cfg_.critic_learning_rate});
    }

    const TrainerConfig& config() const { return cfg_; }
    Mode mode() const { return mode_; }
    int observation_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }

    diffusion::DiffusionPolicy& actor() { return actor_; }
    const diffusion::DiffusionPolicy& actor() const { return actor_; }
    const diffusion::DiffusionPolicy& target_actor() const { return target_actor_; }
    nn::DenseNet& critic1() { return critic1_; }
    nn::DenseNet& critic2() { return critic2_; }
    const nn::DenseNet& critic1() const { return critic1_; }
    const nn::DenseNet& critic2() const { return critic2_; }
    const nn::DenseNet& target_critic1() const { return target_critic1_; }
    const nn::DenseNet& target_critic2() const { return target_critic2_; }
    const nn::AdamState& actor_optimizer() const { return actor_opt_; }
    std::int64_t gradient_steps() const { return steps_; }

    ActorSettings actor_settings() const {
        return {cfg_.effective_kappa(mode_), cfg_.effective_rho(mode_), cfg_.stop_gradient_confidence,
                cfg_.actor_uses_min_critic};
    }

    Matrix act(const Matrix& obs, std::mt19937_64& rng) const {
        if (mode_ == Mode::random) return random_actions(action_dim_, obs.cols(), rng);
        return actor_.sample(obs, rng);
    }

    // Action used for test episodes.
    Matrix act_eval(const Matrix& obs, std::mt19937_64& rng) const {
        if (mode_ != Mode::random && cfg_.greedy_evaluation) return actor_.sample_greedy(obs);
        return act(obs, rng);
    }

    Vector targets_for(const Batch& b, std::mt19937_64& rng) const {
        const Matrix next_actions = target_actor_.sample(b.next_observations, rng);
        const Matrix in = critic_input(b.next_observations, next_actions);
        const Vector q1 = target_critic1_.forward(in).row(0).transpose();
        const Vector q2 = target_critic2_.forward(in).row(0).transpose();
        return td_targets(b.rewards, b.terminal, q1, q2, cfg_.discount);
    }

    // One optimizer step on both critics; returns the summed loss before the step.
    double critic_update(const Batch& b, std::mt19937_64& rng) {
        const Vector y = targets_for(b, rng);
        const Matrix in = critic_input(b.observations, b.actions);
        Vector g1 = Vector::Zero(critic1_.num_params());
        Vector g2 = Vector::Zero(critic2_.num_params());
        const double loss = critic_loss(critic1_, in, y, &g1) + critic_loss(critic2_, in, y, &g2);
        if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
        step(critic1_, critic1_opt_, g1);
        step(critic2_, critic2_opt_, g2);
        return loss;
    }

    ActorTerms actor_update(const Batch& b, std::mt19937_64& rng) {
        const auto draws = ActorDraws::draw(action_dim_, static_cast<int>(b.size()), actor_.steps(), rng);
        Vector g = Vector::Zero(actor_.denoiser().num_params());
        const auto terms = actor_objective(actor_, critic1_, critic2_, b.observations, b.actions, draws,
                                           actor_settings(), &g);
        step(actor_.denoiser(), actor_opt_, g);
        return terms;
    }

    void soft_update_targets() {
        soft_update(target_actor_.denoiser(), actor_.denoiser(), cfg_.soft_update_rate);
        soft_update(target_critic1_, critic1_, cfg_.soft_update_rate);
        soft_update(target_critic2_, critic2_, cfg_.soft_update_rate);
    }

    UpdateStats update(const Batch& b, std::mt19937_64& rng) {
        UpdateStats s;
        s.actor = actor_update(b, rng);
        s.critic_loss = critic_update(b, rng);
        soft_update_targets();
        ++steps_;
        return s;
    }

    std::vector<nn::CheckpointEntry> checkpoint() const {
        return {{"actor", actor_.denoiser(), actor_opt_},
                {"critic1", critic1_, critic1_opt_},
                {"critic2", critic2_, critic2_opt_},
                {"target_actor", target_actor_.denoiser(), std::nullopt},
                {"target_critic1", target_critic1_, std::nullopt},
                {"target_critic2", target_critic2_, std::nullopt}};
    }

    void restore(const std::vector<nn::CheckpointEntry>& entries) {
        auto find = [&](const std::string& name) -> const nn::CheckpointEntry& {
            for (const auto& e : entries)
                if (e.name == name) return e;
            throw IoError("checkpoint: missing network '" + name + "'");
        };
        auto same_shape = [](const nn::DenseNet& a, const nn::DenseNet& b, const std::string& name) {
            if (a.widths() != b.widths()) throw IoError("checkpoint: network '" + name + "' has different layer widths");
        };
        const auto& a = find("actor");
        same_shape(a.net, actor_.denoiser(), "actor");
        actor_.denoiser() = a.net;
        if (a.optimizer) actor_opt_ = *a.optimizer;
        const auto& c1 = find("critic1");
        same_shape(c1.net, critic1_, "critic1");
        critic1_ = c1.net;
        if (c1.optimizer) critic1_opt_ = *c1.optimizer;
        const auto& c2 = find("critic2");
        same_shape(c2.net, critic2_, "critic2");
        critic2_ = c2.net;
        if (c2.optimizer) critic2_opt_ = *c2.optimizer;
        same_shape(find("target_actor").net, target_actor_.denoiser(), "target_actor");
        target_actor_.denoiser() = find("target_actor").net;
        same_shape(find("target_critic1").net, target_critic1_, "target_critic1");
        target_critic1_ = find("target_critic1").net;
        same_shape(find("target_critic2").net, target_critic2_, "target_critic2");
        target_critic2_ = find("target_critic2").net;
    }

private:
    void step(nn::DenseNet& net, nn::AdamState& opt, Vector& g) const {
        if (cfg_.grad_clip > 0.0) {
            const double norm = g.norm();
            if (norm > cfg_.grad_clip) g *= cfg_.grad_clip / norm;
        }
        adam_step(opt, net.params(), g);
    }

    TrainerConfig cfg_;
    Mode mode_;
    int obs_dim_;
    int action_dim_;
    diffusion::DiffusionPolicy actor_, target_actor_;
    nn::DenseNet critic1_, critic2_, target_critic1_, target_critic2_;
    nn::AdamState actor_opt_, critic1_opt_, critic2_opt_;
    std::int64_t steps_ = 0;
};

struct EvaluationResult {
    double mean_reward = 0.0;        // per episode
    double mean_latency = 0.0;       // per vehicle and slot
    long violations = 0;
    std::vector<double> episode_rewards;
};

using ActionSource = std::function<Matrix(const Matrix& obs, std::mt19937_64& rng)>;

// Runs one episode per seed, all environments stepping in lockstep so the
// policy is queried once per slot for the whole set.
inline EvaluationResult evaluate(const sim::WorldConfig& world, const trust::TrustConfig& trust_cfg,
                                 const std::vector<std::uint64_t>& env_seeds, const ActionSource& source,
                                 std::mt19937_64& rng) {
    std::vector<sim::Environment> envs;
    envs.reserve(env_seeds.size());
    Matrix obs;
    for (std::size_t e = 0; e < env_seeds.size(); ++e) {
        envs.emplace_back(world, trust_cfg);
        const Vector o = envs.back().reset(env_seeds[e]);
        if (e == 0) obs.resize(o.size(), static_cast<Eigen::Index>(env_seeds.size()));
        obs.col(static_cast<Eigen::Index>(e)) = o;
    }
    EvaluationResult out;
    out.episode_rewards.assign(envs.size(), 0.0);
    double latency = 0.0;
    long latency_count = 0;
    while (!envs.front().done()) {
        const Matrix actions = source(obs, rng);
        for (std::size_t e = 0; e < envs.size(); ++e) {
            const auto c = static_cast<Eigen::Index>(e);
            const Vector a = actions.col(c);
            auto r = envs[e].step(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
            out.episode_rewards[e] += r.reward;
            out.violations += r.decision.violations;
            for (const auto& l : r.latency) latency += l.total;
            latency_count += static_cast<long>(r.latency.size());
            obs.col(c) = r.observation;
        }
    }
    for (double r : out.episode_rewards) out.mean_reward += r;
    out.mean_reward /= static_cast<double>(envs.size());
    out.mean_latency = latency_count ? latency / static_cast<double>(latency_count) : 0.0;
    return out;
}

struct EpochMetrics {
    int epoch = 0;
    double test_reward = 0.0;
    double test_latency = 0.0;
    long test_violations = 0;
    double train_reward = 0.0;
    long train_violations = 0;
    double actor_objective = 0.0;
    double critic_loss = 0.0;
    double mean_confidence = 1.0;
    double bc_loss = 0.0;
    double consistency_grad_norm = 0.0;
    std::int64_t gradient_steps = 0;
    int updates = 0;                 // gradient steps taken in this epoch
    double wall_seconds = 0.0;       // not part of the deterministic log
};

struct TrainHooks {
    std::function<void(const EpochMetrics&, const Trainer&)> on_epoch;
    std::string diagnostic_checkpoint;  // written when training diverges
};

// Collect, update and evaluate for `epochs` epochs. Random mode only evaluates.
inline std::vector<EpochMetrics> train(const sim::WorldConfig& world, const trust::TrustConfig& trust_cfg,
                                       Trainer& trainer, int epochs, std::uint64_t seed,
                                       const TrainHooks& hooks = {}) {
    const auto& cfg = trainer.config();
    auto collect_rng = make_stream(seed, collect_stream);
    auto update_rng = make_stream(seed, update_stream);
    auto eval_rng = make_stream(seed, eval_stream);
    auto env_rng = make_stream(seed, env_stream);

    std::vector<std::uint64_t> eval_seeds;
    for (int e = 0; e < cfg.eval_episodes; ++e) eval_seeds.push_back(env_rng());

    sim::Environment env(world, trust_cfg);
    ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
    const bool learning = trainer.mode() != Mode::random;
    const ActionSource source = [&trainer](const Matrix& obs, std::mt19937_64& rng) {
        return trainer.act_eval(obs, rng);
    };

    std::vector<EpochMetrics> log;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        EpochMetrics m;
        m.epoch = epoch;
        try {
            if (learning) {
                double reward_sum = 0.0;
                for (int t = 0; t < cfg.trajectories_per_epoch; ++t) {
                    Vector obs = env.reset(env_rng());
                    while (!env.done()) {
                        const Vector a = trainer.act(obs, collect_rng);
                        auto r = env.step(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
                        reward_sum += r.reward;
                        m.train_violations += r.decision.violations;
                        buffer.push({obs, a, r.reward * cfg.reward_scale, r.observation, r.done});
                        obs = r.observation;
                    }
                }
                m.train_reward = reward_sum / cfg.trajectories_per_epoch;

                double confidence_sum = 0.0;
                if (buffer.size() >= static_cast<std::size_t>(std::max(1, cfg.warmup_transitions))) {
                    for (int g = 0; g < cfg.gradient_steps; ++g) {
                        const Batch b = buffer.sample(static_cast<std::size_t>(cfg.batch_size), update_rng);
                        const auto s = trainer.update(b, update_rng);
                        m.actor_objective += s.actor.objective;
                        m.critic_loss += s.critic_loss;
                        confidence_sum += s.actor.mean_confidence;
                        m.bc_loss += s.actor.bc_loss;
                        m.consistency_grad_norm += s.actor.bc_grad_norm;
                        ++m.updates;
                    }
                }
                if (m.updates > 0) {
                    m.actor_objective /= m.updates;
                    m.critic_loss /= m.updates;
                    m.mean_confidence = confidence_sum / m.updates;
                    m.bc_loss /= m.updates;
                    m.consistency_grad_norm /= m.updates;
                }
            }
            const auto ev = evaluate(world, trust_cfg, eval_seeds, source, eval_rng);
            m.test_reward = ev.mean_reward;
            m.test_latency = ev.mean_latency;
            m.test_violations = ev.violations;
        } catch (const DivergenceError&) {
            if (!hooks.diagnostic_checkpoint.empty()) nn::save_checkpoint(hooks.diagnostic_checkpoint, trainer.checkpoint());
            throw;
        }
        m.gradient_steps = trainer.gradient_steps();
        m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.push_back(m);
        if (hooks.on_epoch) hooks.on_epoch(m, trainer);
    }
    return log;
}

}  // namespace vmig::learner
