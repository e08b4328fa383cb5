#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/diffusion/schedule.hpp"
#include "vmig/error.hpp"
#include "vmig/nn/dense_net.hpp"

namespace vmig::diffusion {

using nn::Matrix;
using nn::Vector;

// How the final latent x0 is mapped into the [0,1] action box.
enum class Squash { tanh, clip };

struct PolicyConfig {
    int steps = 5;
    double beta_min = 0.1;
    double beta_max = 10.0;
    int embedding_dim = 16;
    std::vector<int> hidden{256, 256, 256};
    bool clamp_noise = true;      // tanh on the predicted noise inside the posterior mean
    Squash squash = Squash::tanh;
    double latent_limit = 3.0;    // bound on the rescaled latent when mapping stored actions back
    // Multiply x0 by sqrt(alpha_bar_K) before squashing. The clamped chain
    // expands its input by roughly 1/sqrt(alpha_bar_K), which would otherwise
    // leave almost every action component saturated.
    bool rescale_latent = true;
};

// Per-column standard-normal draws consumed by one reverse chain.
struct ChainNoise {
    Matrix initial;              // x_K
    std::vector<Matrix> steps;   // steps[k-1] is added by reverse step k

    static ChainNoise draw(int rows, int cols, int K, std::mt19937_64& rng) {
        std::normal_distribution<double> n(0.0, 1.0);
        auto gaussian = [&]() {
            Matrix m(rows, cols);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
            return m;
        };
        ChainNoise out;
        out.initial = gaussian();
        out.steps.resize(K);
        for (int k = K; k >= 1; --k) out.steps[k - 1] = gaussian();
        return out;
    }

    // All-zero draws: the noise-free chain from x_K = 0.
    static ChainNoise zero(int rows, int cols, int K) {
        ChainNoise out;
        out.initial = Matrix::Zero(rows, cols);
        out.steps.assign(K, Matrix::Zero(rows, cols));
        return out;
    }
};

// Intermediates of a differentiable reverse chain.
struct ChainTape {
    std::vector<Matrix> xs;                 // xs[k] = x_k for k = 0..K
    std::vector<Matrix> predicted;          // predicted[k-1] = raw denoiser output at step k
    std::vector<nn::DenseNet::Tape> tapes;  // tapes[k-1]
};

struct ConsistencyTape {
    nn::DenseNet::Tape tape;
    Matrix residual;               // predicted - injected noise
    std::vector<int> ks;
};

// Conditional DDPM actor: a denoiser network over
// [noisy action | step embedding | observation] plus its noise schedule.
class DiffusionPolicy {
public:
    DiffusionPolicy() = default;

    DiffusionPolicy(int observation_dim, int action_dim, PolicyConfig cfg, std::mt19937_64& rng)
        : cfg_(std::move(cfg)),
          obs_dim_(observation_dim),
          action_dim_(action_dim),
          schedule_(NoiseSchedule::build(cfg_.steps, cfg_.beta_min, cfg_.beta_max)) {
        std::vector<int> widths{action_dim + cfg_.embedding_dim + observation_dim};
        widths.insert(widths.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        widths.push_back(action_dim);
        denoiser_ = nn::DenseNet(widths, nn::Activation::silu, nn::Activation::identity, rng);
        build_embeddings();
    }

    DiffusionPolicy(int observation_dim, int action_dim, PolicyConfig cfg, nn::DenseNet denoiser)
        : cfg_(std::move(cfg)),
          obs_dim_(observation_dim),
          action_dim_(action_dim),
          schedule_(NoiseSchedule::build(cfg_.steps, cfg_.beta_min, cfg_.beta_max)),
          denoiser_(std::move(denoiser)) {
        if (denoiser_.input_dim() != action_dim + cfg_.embedding_dim + observation_dim ||
            denoiser_.output_dim() != action_dim)
            throw DimensionError("DiffusionPolicy: denoiser dimensions do not match the policy");
        build_embeddings();
    }

    const PolicyConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const nn::DenseNet& denoiser() const { return denoiser_; }
    nn::DenseNet& denoiser() { return denoiser_; }
    int observation_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }
    int steps() const { return schedule_.steps(); }
    void set_clamp_noise(bool on) { cfg_.clamp_noise = on; }

    Matrix denoiser_input(const Matrix& x, std::span<const int> ks, const Matrix& obs) const {
        check_batch(x, obs);
        if (static_cast<Eigen::Index>(ks.size()) != x.cols()) throw DimensionError("denoiser_input: one k per column");
        Matrix in(denoiser_.input_dim(), x.cols());
        in.topRows(action_dim_) = x;
        for (Eigen::Index c = 0; c < x.cols(); ++c) in.col(c).segment(action_dim_, cfg_.embedding_dim) = embedding(ks[c]);
        in.bottomRows(obs_dim_) = obs;
        return in;
    }

    Matrix denoiser_input(const Matrix& x, int k, const Matrix& obs) const {
        const std::vector<int> ks(x.cols(), k);
        return denoiser_input(x, ks, obs);
    }

    // Raw (pre-squash) noise prediction.
    Matrix predict_noise(const Matrix& x_k, int k, const Matrix& obs) const {
        return denoiser_.forward(denoiser_input(x_k, k, obs));
    }

    Matrix posterior_mean(const Matrix& x_k, int k, const Matrix& obs) const {
        return mean_from_prediction(x_k, k, predict_noise(x_k, k, obs));
    }

    // Posterior mean given an explicit noise prediction.
    Matrix mean_from_prediction(const Matrix& x_k, int k, const Matrix& predicted) const {
        const double coeff = schedule_.beta(k) / std::sqrt(1.0 - schedule_.alpha_bar(k));
        const Matrix used = cfg_.clamp_noise ? Matrix(predicted.array().tanh().matrix()) : predicted;
        return (x_k - coeff * used) / std::sqrt(schedule_.alpha(k));
    }

    Matrix reverse_step(const Matrix& x_k, int k, const Matrix& obs, const Matrix& eps) const {
        return posterior_mean(x_k, k, obs) + std::sqrt(schedule_.posterior_variance(k)) * eps;
    }

    // Full reverse chain from x_K; returns the latent x0. Records
    // intermediates when `tape` is given.
    Matrix sample_latent(const Matrix& obs, const ChainNoise& noise, ChainTape* tape = nullptr) const {
        const int K = steps();
        if (noise.initial.rows() != action_dim_ || noise.initial.cols() != obs.cols() ||
            static_cast<int>(noise.steps.size()) != K)
            throw DimensionError("sample_latent: noise does not match the batch");
        if (tape) {
            tape->xs.assign(K + 1, Matrix());
            tape->predicted.assign(K, Matrix());
            tape->tapes.assign(K, nn::DenseNet::Tape());
            tape->xs[K] = noise.initial;
        }
        Matrix x = noise.initial;
        for (int k = K; k >= 1; --k) {
            const Matrix in = denoiser_input(x, k, obs);
            Matrix predicted = tape ? denoiser_.forward(in, tape->tapes[k - 1]) : denoiser_.forward(in);
            x = mean_from_prediction(x, k, predicted) + std::sqrt(schedule_.posterior_variance(k)) * noise.steps[k - 1];
            if (!x.allFinite())
                throw DivergenceError("diffusion sampler: non-finite latent at step " + std::to_string(k));
            if (tape) {
                tape->predicted[k - 1] = std::move(predicted);
                tape->xs[k - 1] = x;
            }
        }
        return x;
    }

    // Reverse-mode pass through the chain recorded in `tape`. Adds the
    // denoiser parameter gradient into `grad` and returns dL/dx_K.
    Matrix chain_backward(const ChainTape& tape, const Matrix& grad_x0, Vector& grad) const {
        const int K = steps();
        if (static_cast<int>(tape.tapes.size()) != K) throw StateError("chain_backward: no recorded chain");
        Matrix g = grad_x0;
        for (int k = 1; k <= K; ++k) {
            const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule_.alpha(k));
            const double coeff = schedule_.beta(k) / std::sqrt(1.0 - schedule_.alpha_bar(k));
            Matrix g_pred = (-coeff * inv_sqrt_alpha) * g;
            if (cfg_.clamp_noise)
                g_pred = (g_pred.array() * (1.0 - tape.predicted[k - 1].array().tanh().square())).matrix();
            const Matrix g_in = denoiser_.backward(tape.tapes[k - 1], g_pred, grad);
            g = inv_sqrt_alpha * g + g_in.topRows(action_dim_);
        }
        return g;
    }

    // Gain applied to x0 before squashing.
    double latent_gain() const { return cfg_.rescale_latent ? std::sqrt(schedule_.alpha_bar(steps())) : 1.0; }

    Matrix squash(const Matrix& x0) const {
        const Eigen::ArrayXXd z = latent_gain() * x0.array();
        if (cfg_.squash == Squash::tanh) return ((z.tanh() + 1.0) * 0.5).matrix();
        return ((z.max(-1.0).min(1.0) + 1.0) * 0.5).matrix();
    }

    Matrix squash_derivative(const Matrix& x0) const {
        const double g = latent_gain();
        const Eigen::ArrayXXd z = g * x0.array();
        if (cfg_.squash == Squash::tanh) return (0.5 * g * (1.0 - z.tanh().square())).matrix();
        return ((z.abs() < 1.0).cast<double>() * (0.5 * g)).matrix();
    }

    // Latent corresponding to a stored action; the rescaled latent is bounded by latent_limit.
    Matrix unsquash(const Matrix& action) const {
        const Eigen::ArrayXXd centered = 2.0 * action.array() - 1.0;
        if (cfg_.squash == Squash::tanh) {
            const double bound = std::tanh(cfg_.latent_limit);
            return (centered.max(-bound).min(bound).atanh() / latent_gain()).matrix();
        }
        return (centered.max(-1.0).min(1.0) / latent_gain()).matrix();
    }

    // Actions in [0,1] for a batch of observations.
    Matrix sample(const Matrix& obs, std::mt19937_64& rng) const {
        const auto noise = ChainNoise::draw(action_dim_, static_cast<int>(obs.cols()), steps(), rng);
        return squash(sample_latent(obs, noise));
    }

    // Greedy action: the reverse chain with every draw set to zero.
    Matrix sample_greedy(const Matrix& obs) const {
        return squash(sample_latent(obs, ChainNoise::zero(action_dim_, static_cast<int>(obs.cols()), steps())));
    }

    // Per-sample squared error between predicted and injected noise at
    // x_k = forward_sample(x0, k, eps), with one k per column.
    Vector consistency_loss(const Matrix& obs, const Matrix& x0, std::span<const int> ks, const Matrix& eps,
                            ConsistencyTape* tape = nullptr) const {
        check_batch(x0, obs);
        Matrix x_k(x0.rows(), x0.cols());
        for (Eigen::Index c = 0; c < x0.cols(); ++c) {
            const double ab = schedule_.alpha_bar(ks[c]);
            x_k.col(c) = std::sqrt(ab) * x0.col(c) + std::sqrt(1.0 - ab) * eps.col(c);
        }
        const Matrix in = denoiser_input(x_k, ks, obs);
        Matrix residual;
        if (tape) {
            residual = denoiser_.forward(in, tape->tape) - eps;
            tape->ks.assign(ks.begin(), ks.end());
            tape->residual = residual;
        } else {
            residual = denoiser_.forward(in) - eps;
        }
        return residual.colwise().squaredNorm().transpose();
    }

    // Backward of sum_i weights[i] * loss_i. Adds the parameter gradient to
    // `grad` and returns the gradient with respect to x0.
    Matrix consistency_backward(const ConsistencyTape& tape, const Vector& weights, Vector& grad) const {
        if (tape.residual.cols() != weights.size()) throw DimensionError("consistency_backward: weight count");
        const Matrix g_out = 2.0 * tape.residual * weights.asDiagonal();
        const Matrix g_in = denoiser_.backward(tape.tape, g_out, grad);
        Matrix g_x0 = g_in.topRows(action_dim_);
        for (Eigen::Index c = 0; c < g_x0.cols(); ++c) g_x0.col(c) *= std::sqrt(schedule_.alpha_bar(tape.ks[c]));
        return g_x0;
    }

private:
    void build_embeddings() {
        embeddings_.clear();
        for (int k = 0; k <= schedule_.steps(); ++k) embeddings_.push_back(time_embedding(k, cfg_.embedding_dim));
    }

    const Vector& embedding(int k) const {
        if (k < 1 || k > schedule_.steps()) throw Error("diffusion: step index out of range");
        return embeddings_[k];
    }

    void check_batch(const Matrix& x, const Matrix& obs) const {
        if (x.rows() != action_dim_ || obs.rows() != obs_dim_ || x.cols() != obs.cols())
            throw DimensionError("diffusion policy: batch shape mismatch");
    }

    PolicyConfig cfg_;
    int obs_dim_ = 0;
    int action_dim_ = 0;
    NoiseSchedule schedule_;
    nn::DenseNet denoiser_;
    std::vector<Vector> embeddings_;
};

}  // namespace vmig::diffusion
