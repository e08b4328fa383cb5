#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "vmig/diffusion/policy.hpp"
#include "vmig/error.hpp"
#include "vmig/nn/dense_net.hpp"

namespace vmig::learner {

using nn::Matrix;
using nn::Vector;

inline nn::DenseNet make_critic(int observation_dim, int action_dim, const std::vector<int>& hidden,
                                std::mt19937_64& rng) {
    std::vector<int> widths{observation_dim + action_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    return nn::DenseNet(widths, nn::Activation::silu, nn::Activation::identity, rng);
}

inline Matrix critic_input(const Matrix& obs, const Matrix& actions) {
    if (obs.cols() != actions.cols()) throw DimensionError("critic_input: batch sizes differ");
    Matrix in(obs.rows() + actions.rows(), obs.cols());
    in.topRows(obs.rows()) = obs;
    in.bottomRows(actions.rows()) = actions;
    return in;
}

inline double td_target(double reward, double discount, double next_q1, double next_q2, bool terminal) {
    if (terminal) return reward;
    return reward + discount * std::min(next_q1, next_q2);
}

inline Vector td_targets(const Vector& rewards, const Vector& terminal, const Vector& next_q1, const Vector& next_q2,
                         double discount) {
    Vector y(rewards.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] = td_target(rewards[i], discount, next_q1[i], next_q2[i], terminal[i] != 0.0);
    return y;
}

// Mean squared TD error of one critic. Adds the parameter gradient to `grad` when given.
inline double critic_loss(const nn::DenseNet& critic, const Matrix& input, const Vector& targets, Vector* grad) {
    const auto n = static_cast<double>(targets.size());
    if (!grad) {
        const Vector residual = targets - critic.forward(input).row(0).transpose();
        return residual.squaredNorm() / n;
    }
    nn::DenseNet::Tape tape;
    const Vector residual = targets - critic.forward(input, tape).row(0).transpose();
    const Matrix g_out = (-2.0 / n) * residual.transpose();
    critic.backward(tape, g_out, *grad);
    return residual.squaredNorm() / n;
}

// target <- tau * online + (1 - tau) * target
inline void soft_update(nn::DenseNet& target, const nn::DenseNet& online, double tau) {
    if (target.num_params() != online.num_params()) throw DimensionError("soft_update: network shapes differ");
    Vector p = tau * online.params() + (1.0 - tau) * target.params();
    target.set_params(p);
}

// All random draws consumed by one actor objective evaluation. Drawing them
// up front makes the objective a deterministic function of the parameters.
struct ActorDraws {
    diffusion::ChainNoise chain;
    std::vector<int> generated_steps;
    Matrix generated_noise;
    std::vector<int> buffer_steps;
    Matrix buffer_noise;

    static ActorDraws draw(int action_dim, int batch, int K, std::mt19937_64& rng) {
        ActorDraws d;
        d.chain = diffusion::ChainNoise::draw(action_dim, batch, K, rng);
        std::uniform_int_distribution<int> step(1, K);
        std::normal_distribution<double> n(0.0, 1.0);
        auto noise = [&] {
            Matrix m(action_dim, batch);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
            return m;
        };
        d.generated_steps.resize(batch);
        for (int& k : d.generated_steps) k = step(rng);
        d.generated_noise = noise();
        d.buffer_steps.resize(batch);
        for (int& k : d.buffer_steps) k = step(rng);
        d.buffer_noise = noise();
        return d;
    }
};

struct ActorSettings {
    double kappa = 1.0;
    double rho = 1.0;
    bool stop_gradient_confidence = false;
    bool use_min_critic = false;
};

struct ActorTerms {
    double objective = 0.0;         // E[w * Q / scale] - rho * E[L_bc]
    double weighted_value = 0.0;    // first expectation
    double bc_loss = 0.0;           // mean consistency loss on buffer actions
    double generated_loss = 0.0;    // mean consistency loss on generated actions
    double mean_confidence = 1.0;
    double q_scale = 1.0;
    double bc_grad_norm = 0.0;      // norm of the rho-term gradient
};

// Actor objective J. When `grad` is given, adds the gradient of -J with
// respect to the denoiser parameters (descent direction for maximizing J).
inline ActorTerms actor_objective(const diffusion::DiffusionPolicy& policy, const nn::DenseNet& critic1,
                                  const nn::DenseNet& critic2, const Matrix& obs, const Matrix& buffer_actions,
                                  const ActorDraws& draws, const ActorSettings& s, Vector* grad) {
    const auto n = obs.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const bool weighted = s.kappa > 0.0;
    ActorTerms out;

    diffusion::ChainTape chain_tape;
    const Matrix x0 = policy.sample_latent(obs, draws.chain, grad ? &chain_tape : nullptr);
    const Matrix actions = policy.squash(x0);
    const Matrix q_in = critic_input(obs, actions);

    nn::DenseNet::Tape t1, t2;
    const Vector q1 = critic1.forward(q_in, t1).row(0).transpose();
    Vector q = q1;
    Vector q2;
    if (s.use_min_critic) {
        q2 = critic2.forward(q_in, t2).row(0).transpose();
        q = q1.cwiseMin(q2);
    }
    const double mean_abs = q.cwiseAbs().mean();
    out.q_scale = mean_abs > 0.0 ? mean_abs : 1.0;  // detached normalizer
    const Vector q_norm = q / out.q_scale;

    // Confidence of the generated actions.
    Vector w = Vector::Ones(n);
    diffusion::ConsistencyTape gen_tape;
    if (weighted) {
        const Vector gen_loss = policy.consistency_loss(obs, x0, draws.generated_steps, draws.generated_noise,
                                                        grad ? &gen_tape : nullptr);
        out.generated_loss = gen_loss.mean();
        w = (-s.kappa * gen_loss.array()).exp().matrix();
    }
    out.mean_confidence = w.mean();
    out.weighted_value = (w.array() * q_norm.array()).mean();

    const Matrix buffer_latent = policy.unsquash(buffer_actions);
    diffusion::ConsistencyTape bc_tape;
    const bool bc_active = s.rho > 0.0;
    const Vector bc_loss = policy.consistency_loss(obs, buffer_latent, draws.buffer_steps, draws.buffer_noise,
                                                   (grad && bc_active) ? &bc_tape : nullptr);
    out.bc_loss = bc_loss.mean();
    out.objective = out.weighted_value - s.rho * out.bc_loss;
    if (!std::isfinite(out.objective)) throw DivergenceError("actor objective is not finite");
    if (!grad) return out;

    // d(-J)/dq_i = -w_i / (n * scale), routed through the critic(s) into the action.
    const Vector g_q = -(w.array() * inv_n / out.q_scale).matrix();
    Vector scratch = Vector::Zero(critic1.num_params());
    Matrix g_action;
    if (s.use_min_critic) {
        Vector g1 = Vector::Zero(n), g2 = Vector::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) (q1[i] <= q2[i] ? g1 : g2)[i] = g_q[i];
        g_action = critic1.backward(t1, g1.transpose(), scratch).bottomRows(actions.rows());
        Vector scratch2 = Vector::Zero(critic2.num_params());
        g_action += critic2.backward(t2, g2.transpose(), scratch2).bottomRows(actions.rows());
    } else {
        g_action = critic1.backward(t1, g_q.transpose(), scratch).bottomRows(actions.rows());
    }
    Matrix g_x0 = (g_action.array() * policy.squash_derivative(x0).array()).matrix();

    // Product rule: d(-w q)/dL = kappa * w * q / n.
    if (weighted && !s.stop_gradient_confidence) {
        const Vector g_loss = (s.kappa * inv_n * w.array() * q_norm.array()).matrix();
        g_x0 += policy.consistency_backward(gen_tape, g_loss, *grad);
    }
    policy.chain_backward(chain_tape, g_x0, *grad);

    if (bc_active) {
        Vector g_bc = Vector::Zero(grad->size());
        policy.consistency_backward(bc_tape, Vector::Constant(n, s.rho * inv_n), g_bc);
        out.bc_grad_norm = g_bc.norm();
        *grad += g_bc;
    }
    return out;
}

}  // namespace vmig::learner
