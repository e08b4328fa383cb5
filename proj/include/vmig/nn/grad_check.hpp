#pragma once

#include <algorithm>
#include <functional>

#include <Eigen/Dense>

namespace vmig::nn {

// Central finite-difference gradient of a scalar function of a parameter vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& at, double h = 1e-5) {
    Eigen::VectorXd g(at.size());
    Eigen::VectorXd x = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double scale = std::max(a.norm(), b.norm());
    if (scale == 0.0) return 0.0;
    return (a - b).norm() / scale;
}

}  // namespace vmig::nn
