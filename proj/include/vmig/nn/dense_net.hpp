#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"

namespace vmig::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { identity = 0, tanh = 1, silu = 2, sigmoid = 3 };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::silu: return "silu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline Matrix activate(Activation a, const Matrix& z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::silu: return (z.array() / (1.0 + (-z.array()).exp())).matrix();
        case Activation::sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    }
    return z;
}

// Elementwise derivative of the activation at pre-activation z.
inline Matrix activation_derivative(Activation a, const Matrix& z) {
    switch (a) {
        case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
        case Activation::tanh: return (1.0 - z.array().tanh().square()).matrix();
        case Activation::silu: {
            const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
            return (sig * (1.0 + z.array() * (1.0 - sig))).matrix();
        }
        case Activation::sigmoid: {
            const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
            return (sig * (1.0 - sig)).matrix();
        }
    }
    return z;
}

// Fully connected feed-forward network over column batches (one sample per
// column). All parameters live in one flat vector: for each layer the
// weight matrix (column-major, out x in) followed by its bias.
class DenseNet {
public:
    // Intermediate values of one forward pass, needed by backward().
    struct Tape {
        std::vector<Matrix> inputs;  // input of each layer
        std::vector<Matrix> pre;     // pre-activation of each layer
    };

    DenseNet() = default;

    DenseNet(std::vector<int> widths, Activation hidden, Activation output)
        : widths_(std::move(widths)), hidden_(hidden), output_(output) {
        if (widths_.size() < 2) throw DimensionError("DenseNet: need at least input and output widths");
        for (int w : widths_)
            if (w < 1) throw DimensionError("DenseNet: layer widths must be positive");
        params_ = Vector::Zero(count_params(widths_));
    }

    // Uniform fan-in initialisation: U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
    DenseNet(std::vector<int> widths, Activation hidden, Activation output, std::mt19937_64& rng)
        : DenseNet(std::move(widths), hidden, output) {
        Eigen::Index off = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            const int in = widths_[l], out = widths_[l + 1];
            std::uniform_real_distribution<double> u(-1.0 / std::sqrt(in), 1.0 / std::sqrt(in));
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out + out; ++i) params_[off + i] = u(rng);
            off += static_cast<Eigen::Index>(in) * out + out;
        }
    }

    static Eigen::Index count_params(const std::vector<int>& widths) {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l)
            n += static_cast<Eigen::Index>(widths[l]) * widths[l + 1] + widths[l + 1];
        return n;
    }

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    int layers() const { return static_cast<int>(widths_.size()) - 1; }
    const std::vector<int>& widths() const { return widths_; }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }
    Eigen::Index num_params() const { return params_.size(); }

    const Vector& params() const { return params_; }
    Vector& params() { return params_; }
    void set_params(const Vector& p) {
        if (p.size() != params_.size()) throw DimensionError("DenseNet::set_params: size mismatch");
        params_ = p;
    }

    Matrix forward(const Matrix& x) const {
        check_input(x);
        Matrix a = x;
        for (int l = 0; l < layers(); ++l) {
            Matrix z = (weight(l) * a).colwise() + bias(l);
            a = activate(activation_of(l), z);
        }
        return a;
    }

    Matrix forward(const Matrix& x, Tape& tape) const {
        check_input(x);
        tape.inputs.assign(layers(), Matrix());
        tape.pre.assign(layers(), Matrix());
        Matrix a = x;
        for (int l = 0; l < layers(); ++l) {
            tape.inputs[l] = a;
            tape.pre[l] = (weight(l) * a).colwise() + bias(l);
            a = activate(activation_of(l), tape.pre[l]);
        }
        return a;
    }

    // Reverse pass for the forward pass recorded in `tape`. Adds dL/dparams
    // into `grad` (sized num_params()) and returns dL/dinput.
    Matrix backward(const Tape& tape, const Matrix& grad_out, Vector& grad) const {
        if (static_cast<int>(tape.pre.size()) != layers() || tape.pre.empty())
            throw StateError("DenseNet::backward: no recorded forward pass");
        if (grad.size() != num_params()) throw DimensionError("DenseNet::backward: gradient buffer size mismatch");
        if (grad_out.rows() != output_dim() || grad_out.cols() != tape.pre.back().cols())
            throw DimensionError("DenseNet::backward: output gradient shape mismatch");
        Matrix g = grad_out;
        for (int l = layers() - 1; l >= 0; --l) {
            const Matrix dz = (g.array() * activation_derivative(activation_of(l), tape.pre[l]).array()).matrix();
            const auto [woff, boff] = offsets(l);
            const int in = widths_[l], out = widths_[l + 1];
            Eigen::Map<Matrix> dw(grad.data() + woff, out, in);
            dw.noalias() += dz * tape.inputs[l].transpose();
            grad.segment(boff, out) += dz.rowwise().sum();
            g = weight(l).transpose() * dz;
        }
        return g;
    }

    // Stateful convenience pair: forward_recorded() keeps the tape for the
    // next backward() call.
    Matrix forward_recorded(const Matrix& x) {
        last_ = Tape{};
        return forward(x, last_);
    }

    Matrix backward(const Matrix& grad_out, Vector& grad) const {
        if (last_.pre.empty()) throw StateError("DenseNet::backward called before forward_recorded");
        return backward(last_, grad_out, grad);
    }

    Eigen::Map<const Matrix> weight(int l) const {
        const auto [woff, boff] = offsets(l);
        (void)boff;
        return {params_.data() + woff, widths_[l + 1], widths_[l]};
    }
    Eigen::Map<const Vector> bias(int l) const {
        const auto [woff, boff] = offsets(l);
        (void)woff;
        return {params_.data() + boff, widths_[l + 1]};
    }
    Eigen::Map<Matrix> weight(int l) {
        const auto [woff, boff] = offsets(l);
        (void)boff;
        return {params_.data() + woff, widths_[l + 1], widths_[l]};
    }
    Eigen::Map<Vector> bias(int l) {
        const auto [woff, boff] = offsets(l);
        (void)woff;
        return {params_.data() + boff, widths_[l + 1]};
    }

private:
    Activation activation_of(int l) const { return l == layers() - 1 ? output_ : hidden_; }

    std::pair<Eigen::Index, Eigen::Index> offsets(int l) const {
        Eigen::Index off = 0;
        for (int i = 0; i < l; ++i) off += static_cast<Eigen::Index>(widths_[i]) * widths_[i + 1] + widths_[i + 1];
        return {off, off + static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1]};
    }

    void check_input(const Matrix& x) const {
        if (x.rows() != input_dim())
            throw DimensionError("DenseNet::forward: expected input dimension " + std::to_string(input_dim()) +
                                 ", got " + std::to_string(x.rows()));
    }

    std::vector<int> widths_;
    Activation hidden_ = Activation::silu;
    Activation output_ = Activation::identity;
    Vector params_;
    Tape last_;
};

}  // namespace vmig::nn
