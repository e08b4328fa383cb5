#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "vmig/error.hpp"

namespace vmig::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    Eigen::VectorXd m;  // first moment
    Eigen::VectorXd v;  // second moment
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(Eigen::Index n, AdamConfig cfg)
        : config(cfg), m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

// One bias-corrected Adam descent step on `params`.
inline void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != grad.size() || state.m.size() != params.size())
        throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
    if (!grad.allFinite()) throw DivergenceError("adam_step: non-finite gradient");
    const auto& c = state.config;
    ++state.step;
    state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
    state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    params.array() -= c.learning_rate * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.epsilon);
}

}  // namespace vmig::nn
