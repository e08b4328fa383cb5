#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "vmig/nn/adam.hpp"
#include "vmig/nn/checkpoint.hpp"
#include "vmig/nn/dense_net.hpp"
#include "vmig/nn/grad_check.hpp"

using namespace vmig;
using namespace vmig::nn;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace

TEST(DenseNetTest, IdentityWeightsPassInputThrough) {
    DenseNet net({3, 3}, Activation::identity, Activation::identity);
    net.weight(0) = Matrix::Identity(3, 3);
    Matrix x(3, 2);
    x << 1, -2, 3, 4, -5, 6;
    EXPECT_EQ(net.forward(x), x);
}

TEST(DenseNetTest, AffineExample) {
    DenseNet net({1, 1}, Activation::identity, Activation::identity);
    net.weight(0)(0, 0) = 2.0;
    net.bias(0)[0] = 1.0;
    EXPECT_EQ(net.forward(Matrix::Constant(1, 1, 3.0))(0, 0), 7.0);
}

TEST(DenseNetTest, BoundedOutputActivation) {
    std::mt19937_64 rng(1);
    DenseNet net({4, 8, 3}, Activation::silu, Activation::tanh, rng);
    const Matrix y = net.forward(50.0 * random_matrix(4, 100, rng));
    EXPECT_LE(y.cwiseAbs().maxCoeff(), 1.0);
    DenseNet sig({4, 3}, Activation::silu, Activation::sigmoid, rng);
    const Matrix s = sig.forward(random_matrix(4, 100, rng));
    EXPECT_GT(s.minCoeff(), 0.0);
    EXPECT_LT(s.maxCoeff(), 1.0);
}

TEST(DenseNetTest, DimensionAndStateErrors) {
    std::mt19937_64 rng(2);
    DenseNet net({3, 4, 2}, Activation::tanh, Activation::identity, rng);
    EXPECT_THROW(net.forward(Matrix::Zero(2, 1)), DimensionError);
    Vector g = Vector::Zero(net.num_params());
    EXPECT_THROW(net.backward(Matrix::Zero(2, 1), g), StateError);
    EXPECT_THROW(DenseNet({3}, Activation::tanh, Activation::identity), DimensionError);
}

TEST(DenseNetTest, LinearLeastSquaresGradient) {
    std::mt19937_64 rng(3);
    DenseNet net({3, 2}, Activation::identity, Activation::identity, rng);
    const Matrix x = random_matrix(3, 5, rng);
    const Matrix y = random_matrix(2, 5, rng);
    DenseNet::Tape tape;
    const Matrix pred = net.forward(x, tape);
    Vector g = Vector::Zero(net.num_params());
    net.backward(tape, pred - y, g);
    // L = 0.5 * ||W x + b - y||^2: dW = (Wx + b - y) x^T, db = row sums.
    const Matrix r = net.weight(0) * x + net.bias(0).replicate(1, 5) - y;
    const Matrix dw = r * x.transpose();
    const Vector db = r.rowwise().sum();
    EXPECT_LT((Eigen::Map<const Matrix>(g.data(), 2, 3) - dw).norm(), 1e-12);
    EXPECT_LT((g.tail(2) - db).norm(), 1e-12);
}

TEST(DenseNetTest, ZeroOutputGradientGivesZeroParameterGradient) {
    std::mt19937_64 rng(4);
    DenseNet net({3, 5, 2}, Activation::silu, Activation::identity, rng);
    DenseNet::Tape tape;
    net.forward(random_matrix(3, 4, rng), tape);
    Vector g = Vector::Zero(net.num_params());
    const Matrix gin = net.backward(tape, Matrix::Zero(2, 4), g);
    EXPECT_EQ(g.norm(), 0.0);
    EXPECT_EQ(gin.norm(), 0.0);
}

TEST(DenseNetTest, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> width(1, 6);
    const Activation acts[] = {Activation::tanh, Activation::silu, Activation::sigmoid};
    for (int trial = 0; trial < 120; ++trial) {
        const int in = width(rng), out = width(rng), depth = 1 + trial % 3;
        std::vector<int> widths{in};
        for (int l = 0; l < depth; ++l) widths.push_back(width(rng));
        widths.push_back(out);
        DenseNet net(widths, acts[trial % 3], trial % 2 ? Activation::tanh : Activation::identity, rng);
        const Matrix x = random_matrix(in, 3, rng);
        const Matrix w = random_matrix(out, 3, rng);
        auto loss = [&](const Vector& p) {
            DenseNet n = net;
            n.set_params(p);
            return (n.forward(x).array() * w.array()).sum();
        };
        DenseNet::Tape tape;
        net.forward(x, tape);
        Vector g = Vector::Zero(net.num_params());
        net.backward(tape, w, g);
        ASSERT_LE(relative_error(g, central_difference(loss, net.params())), 1e-5) << "trial " << trial;
    }
}

TEST(DenseNetTest, InputGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(6);
    DenseNet net({4, 6, 3}, Activation::silu, Activation::identity, rng);
    const Matrix x = random_matrix(4, 1, rng);
    const Matrix w = random_matrix(3, 1, rng);
    DenseNet::Tape tape;
    net.forward(x, tape);
    Vector g = Vector::Zero(net.num_params());
    const Vector gin = net.backward(tape, w, g).col(0);
    auto loss = [&](const Vector& in) { return (net.forward(in).array() * w.array()).sum(); };
    EXPECT_LE(relative_error(gin, central_difference(loss, x.col(0))), 1e-6);
}

TEST(DenseNetTest, DeterministicForward) {
    std::mt19937_64 a(7), b(7);
    DenseNet n1({5, 8, 2}, Activation::silu, Activation::identity, a);
    DenseNet n2({5, 8, 2}, Activation::silu, Activation::identity, b);
    EXPECT_EQ(n1.params(), n2.params());
    std::mt19937_64 rng(8);
    const Matrix x = random_matrix(5, 4, rng);
    EXPECT_EQ(n1.forward(x), n2.forward(x));
}

TEST(DenseNetTest, ParameterVectorRoundTrip) {
    std::mt19937_64 rng(9);
    DenseNet net({3, 4, 2}, Activation::tanh, Activation::identity, rng);
    const Vector p = net.params();
    DenseNet other({3, 4, 2}, Activation::tanh, Activation::identity);
    other.set_params(p);
    EXPECT_EQ(other.params(), p);
    EXPECT_THROW(other.set_params(Vector::Zero(3)), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    AdamState s(4, AdamConfig{});
    Vector p = Vector::LinSpaced(4, -1.0, 1.0);
    const Vector before = p;
    adam_step(s, p, Vector::Zero(4));
    EXPECT_EQ(p, before);
    EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesBySignedLearningRate) {
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    AdamState s(4, cfg);
    Vector p = Vector::Zero(4);
    Vector g(4);
    g << 3.0, -0.5, 1e-2, -40.0;
    adam_step(s, p, g);
    for (int i = 0; i < 4; ++i) {
        // m_hat = g and v_hat = g^2, so the step is eta * g / (|g| + eps).
        const double expected = -cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon);
        EXPECT_NEAR(p[i], expected, 1e-15);
        EXPECT_NEAR(p[i], -cfg.learning_rate * (g[i] > 0 ? 1.0 : -1.0), 1e-9);
    }
}

TEST(Adam, NonFiniteGradientIsDivergence) {
    AdamState s(2, AdamConfig{});
    Vector p = Vector::Zero(2);
    Vector g(2);
    g << 1.0, std::nan("");
    EXPECT_THROW(adam_step(s, p, g), DivergenceError);
    EXPECT_THROW(adam_step(s, p, Vector::Zero(3)), DimensionError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    std::mt19937_64 rng(10);
    CheckpointEntry a{"actor", DenseNet({4, 5, 3}, Activation::silu, Activation::identity, rng), std::nullopt};
    AdamState opt(a.net.num_params(), AdamConfig{});
    Vector p = a.net.params();
    adam_step(opt, p, Vector::Ones(p.size()));
    a.net.set_params(p);
    a.optimizer = opt;
    CheckpointEntry b{"critic", DenseNet({2, 1}, Activation::tanh, Activation::identity, rng), std::nullopt};
    const std::string bytes = serialize_checkpoint({a, b});
    const auto back = deserialize_checkpoint(bytes);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].name, "actor");
    EXPECT_EQ(back[0].net.widths(), a.net.widths());
    EXPECT_EQ(back[0].net.params(), a.net.params());
    ASSERT_TRUE(back[0].optimizer.has_value());
    EXPECT_EQ(back[0].optimizer->m, opt.m);
    EXPECT_EQ(back[0].optimizer->v, opt.v);
    EXPECT_EQ(back[0].optimizer->step, 1);
    EXPECT_FALSE(back[1].optimizer.has_value());
    EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, RejectsCorruptData) {
    EXPECT_THROW(deserialize_checkpoint("NOTACKPT"), IoError);
    std::mt19937_64 rng(11);
    std::string bytes = serialize_checkpoint({{"x", DenseNet({2, 1}, Activation::tanh, Activation::identity, rng), {}}});
    EXPECT_THROW(deserialize_checkpoint(bytes + "z"), IoError);
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
}
