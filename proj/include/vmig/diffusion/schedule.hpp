#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"

namespace vmig::diffusion {

// Variance-preserving noise schedule with K steps. Accessors take the
// 1-based step index k; alpha_bar(0) is 1 by convention.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    static NoiseSchedule build(int steps, double beta_min, double beta_max) {
        if (steps < 1) throw ConfigError("diffusion.steps: must be >= 1");
        if (!(beta_min > 0.0 && beta_min < beta_max))
            throw ConfigError("diffusion.beta_min/beta_max: require 0 < beta_min < beta_max");
        NoiseSchedule s;
        s.steps_ = steps;
        const double K = steps;
        for (int k = 1; k <= steps; ++k) {
            const double b = 1.0 - std::exp(-beta_min / K - (beta_max - beta_min) * (2.0 * k - 1.0) / (2.0 * K * K));
            if (!(b > 0.0 && b < 1.0))
                throw ConfigError("diffusion schedule: beta_" + std::to_string(k) + " = " + std::to_string(b) +
                                  " is outside (0,1)");
            s.beta_.push_back(b);
        }
        double prod = 1.0;
        for (int k = 1; k <= steps; ++k) {
            const double a = 1.0 - s.beta_[k - 1];
            const double prev = prod;
            prod *= a;
            s.alpha_.push_back(a);
            s.alpha_bar_.push_back(prod);
            s.posterior_variance_.push_back((1.0 - prev) / (1.0 - prod) * s.beta_[k - 1]);
        }
        return s;
    }

    int steps() const { return steps_; }
    double beta(int k) const { return beta_.at(k - 1); }
    double alpha(int k) const { return alpha_.at(k - 1); }
    double alpha_bar(int k) const { return k == 0 ? 1.0 : alpha_bar_.at(k - 1); }
    // beta-tilde: variance of the reverse step k.
    double posterior_variance(int k) const { return posterior_variance_.at(k - 1); }

    const std::vector<double>& betas() const { return beta_; }
    const std::vector<double>& alphas() const { return alpha_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }
    const std::vector<double>& posterior_variances() const { return posterior_variance_; }

private:
    int steps_ = 0;
    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
    std::vector<double> posterior_variance_;
};

// Closed-form corruption of x0 to step k with the standard-normal draw eps.
inline Eigen::MatrixXd forward_sample(const Eigen::MatrixXd& x0, int k, const NoiseSchedule& schedule,
                                      const Eigen::MatrixXd& eps) {
    if (k < 1 || k > schedule.steps()) throw Error("forward_sample: step index out of range");
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw DimensionError("forward_sample: shape mismatch");
    const double ab = schedule.alpha_bar(k);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

// Sinusoidal embedding of the step index.
inline Eigen::VectorXd time_embedding(int k, int dim) {
    Eigen::VectorXd e(dim);
    const int half = dim / 2;
    const double scale = half > 1 ? std::log(10000.0) / (half - 1) : 0.0;
    for (int i = 0; i < half; ++i) {
        const double f = std::exp(-scale * i);
        e[i] = std::sin(k * f);
        e[half + i] = std::cos(k * f);
    }
    if (dim % 2 == 1) e[dim - 1] = 0.0;
    return e;
}

// Confidence weight of the actor for a given consistency loss.
inline double confidence(double loss, double kappa) { return std::exp(-kappa * loss); }

}  // namespace vmig::diffusion
