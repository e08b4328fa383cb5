#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "vmig/learner/objectives.hpp"
#include "vmig/learner/replay_buffer.hpp"
#include "vmig/learner/trainer.hpp"
#include "vmig/nn/grad_check.hpp"

using namespace vmig;
using namespace vmig::learner;

namespace {

Matrix gaussian(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Transition make_transition(int i) {
    Vector o = Vector::Constant(2, i);
    return {o, Vector::Constant(1, 0.5), static_cast<double>(i), o, false};
}

TrainerConfig tiny_trainer() {
    TrainerConfig c;
    c.epochs = 3;
    c.batch_size = 8;
    c.gradient_steps = 2;
    c.eval_episodes = 1;
    c.critic_hidden = {8};
    c.policy.hidden = {8};
    c.policy.embedding_dim = 4;
    c.policy.steps = 2;
    return c;
}

sim::WorldConfig tiny_world() {
    sim::WorldConfig w;
    w.num_vehicles = 2;
    w.num_rsus = 2;
    w.episode_length = 10;
    return w;
}

// Chi-square critical value at 1% via the Wilson-Hilferty approximation.
double chi_square_critical_1pct(int dof) {
    const double z = 2.3263478740408408;
    const double k = dof;
    return k * std::pow(1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k)), 3.0);
}

}  // namespace

TEST(ReplayBufferTest, BoundedFifo) {
    ReplayBuffer b(3);
    for (int i = 0; i < 5; ++i) b.push(make_transition(i));
    EXPECT_EQ(b.size(), 3u);
    EXPECT_EQ(b.at(0).reward, 2.0);
    EXPECT_EQ(b.at(2).reward, 4.0);
    Transition bad = make_transition(0);
    bad.reward = std::nan("");
    EXPECT_THROW(b.push(bad), Error);
}

TEST(ReplayBufferTest, SamplingIsUniform) {
    const int n = 20;
    ReplayBuffer b(n);
    for (int i = 0; i < n + 7; ++i) b.push(make_transition(i));
    std::mt19937_64 rng(1);
    std::vector<int> hits(n, 0);
    const int draws = 40000;
    for (auto i : b.sample_indices(draws, rng)) ++hits[i];
    const double expected = static_cast<double>(draws) / n;
    double chi2 = 0.0;
    for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
    EXPECT_LT(chi2, chi_square_critical_1pct(n - 1));
}

TEST(TdTarget, Examples) {
    EXPECT_NEAR(td_target(-10.0, 0.95, 2.0, 3.0, false), -8.1, 1e-12);
    EXPECT_EQ(td_target(-10.0, 0.0, 2.0, 3.0, false), -10.0);
    EXPECT_EQ(td_target(-1.0, 0.5, 4.0, 4.0, false), 1.0);
    EXPECT_EQ(td_target(-3.0, 0.95, 2.0, 3.0, true), -3.0);
}

TEST(TdTarget, PessimisticBootstrap) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 5.0);
    Vector r(256), t = Vector::Zero(256), q1(256), q2(256);
    for (int i = 0; i < 256; ++i) r[i] = n(rng), q1[i] = n(rng), q2[i] = n(rng);
    const Vector y = td_targets(r, t, q1, q2, 0.95);
    for (int i = 0; i < 256; ++i) {
        const double boot = (y[i] - r[i]) / 0.95;
        EXPECT_LE(boot, q1[i] + 1e-12);
        EXPECT_LE(boot, q2[i] + 1e-12);
        EXPECT_LE(oracle::ulps(y[i], oracle::td(r[i], 0.95, q1[i], q2[i], false)), 1u);
    }
}

TEST(CriticLoss, MatchesBatchOracleAndVanishesAtTarget) {
    std::mt19937_64 rng(3);
    const auto critic = make_critic(3, 2, {5}, rng);
    const Matrix in = gaussian(5, 6, rng);
    const Vector pred = critic.forward(in).row(0).transpose();
    const Vector y = pred + gaussian(6, 1, rng).col(0);
    double expect = 0.0;
    for (int i = 0; i < 6; ++i) expect += (y[i] - pred[i]) * (y[i] - pred[i]);
    EXPECT_NEAR(critic_loss(critic, in, y, nullptr), expect / 6.0, 1e-14);

    Vector g = Vector::Zero(critic.num_params());
    EXPECT_EQ(critic_loss(critic, in, pred, &g), 0.0);
    EXPECT_EQ(g.norm(), 0.0);
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    const auto critic = make_critic(3, 2, {6, 5}, rng);
    const Matrix in = gaussian(5, 4, rng);
    const Vector y = gaussian(4, 1, rng).col(0);
    Vector g = Vector::Zero(critic.num_params());
    critic_loss(critic, in, y, &g);
    auto f = [&](const Vector& p) {
        nn::DenseNet c = critic;
        c.set_params(p);
        return critic_loss(c, in, y, nullptr);
    };
    EXPECT_LE(nn::relative_error(g, nn::central_difference(f, critic.params())), 1e-5);
}

TEST(SoftUpdate, Examples) {
    nn::DenseNet online({1, 1}, nn::Activation::identity, nn::Activation::identity);
    nn::DenseNet target = online;
    online.params().setOnes();
    soft_update(target, online, 0.005);
    EXPECT_EQ(target.params()[0], 0.005);
    soft_update(target, online, 1.0);
    EXPECT_EQ(target.params(), online.params());
    const Vector before = target.params();
    soft_update(target, online, 0.3);
    EXPECT_EQ(target.params(), before);
}

TEST(SoftUpdate, TargetLagShrinksGeometrically) {
    std::mt19937_64 rng(5);
    nn::DenseNet online({3, 4, 1}, nn::Activation::silu, nn::Activation::identity, rng);
    nn::DenseNet target({3, 4, 1}, nn::Activation::silu, nn::Activation::identity, rng);
    const double tau = 0.05;
    double gap = (target.params() - online.params()).norm();
    for (int i = 0; i < 50; ++i) {
        soft_update(target, online, tau);
        const double next = (target.params() - online.params()).norm();
        EXPECT_NEAR(next, (1.0 - tau) * gap, 1e-12 * gap + 1e-300);
        gap = next;
    }
}

TEST(ActorObjective, GradientMatchesFiniteDifferences) {
    for (bool stop : {false, true})
        for (bool use_min : {false, true}) {
            std::mt19937_64 rng(6);
            diffusion::PolicyConfig pc;
            pc.steps = 3;
            pc.embedding_dim = 4;
            pc.hidden = {8, 8};
            diffusion::DiffusionPolicy policy(3, 2, pc, rng);
            const auto c1 = make_critic(3, 2, {8}, rng);
            const auto c2 = make_critic(3, 2, {8}, rng);
            const Matrix obs = gaussian(3, 4, rng);
            const Matrix buffer = (Matrix::Random(2, 4).array() * 0.45 + 0.5).matrix();
            const auto draws = ActorDraws::draw(2, 4, 3, rng);
            const ActorSettings s{0.7, 0.4, stop, use_min};
            Vector g = Vector::Zero(policy.denoiser().num_params());
            actor_objective(policy, c1, c2, obs, buffer, draws, s, &g);
            if (stop) continue;  // the stop-gradient variant is not the derivative of J
            // The Q normalizer is detached; hold it fixed at its current value.
            const double scale = actor_objective(policy, c1, c2, obs, buffer, draws, s, nullptr).q_scale;
            auto g_fd = nn::central_difference(
                [&](const Vector& p) {
                    diffusion::DiffusionPolicy q = policy;
                    q.denoiser().set_params(p);
                    const auto t = actor_objective(q, c1, c2, obs, buffer, draws, s, nullptr);
                    return -(t.weighted_value * t.q_scale / scale - s.rho * t.bc_loss);
                },
                policy.denoiser().params());
            EXPECT_LE(nn::relative_error(g, g_fd), 1e-4) << "use_min " << use_min;
        }
}

TEST(ActorObjective, AblationTelemetry) {
    std::mt19937_64 rng(7);
    diffusion::PolicyConfig pc;
    pc.steps = 2;
    pc.embedding_dim = 4;
    pc.hidden = {6};
    diffusion::DiffusionPolicy policy(2, 3, pc, rng);
    const auto c1 = make_critic(2, 3, {6}, rng);
    const Matrix obs = gaussian(2, 5, rng);
    const Matrix buffer = Matrix::Constant(3, 5, 0.3);
    const auto draws = ActorDraws::draw(3, 5, 2, rng);
    Vector g = Vector::Zero(policy.denoiser().num_params());
    const auto no_con = actor_objective(policy, c1, c1, obs, buffer, draws, {0.0, 1.0, false, false}, &g);
    EXPECT_EQ(no_con.mean_confidence, 1.0);
    EXPECT_GT(no_con.bc_grad_norm, 0.0);
    const auto no_dc = actor_objective(policy, c1, c1, obs, buffer, draws, {1.0, 0.0, false, false}, &g);
    EXPECT_EQ(no_dc.bc_grad_norm, 0.0);
    EXPECT_LT(no_dc.mean_confidence, 1.0);
    EXPECT_GT(no_dc.mean_confidence, 0.0);
}

TEST(ActorObjective, ModesForceKappaAndRho) {
    TrainerConfig c;
    c.kappa = 0.5;
    c.rho = 2.0;
    EXPECT_EQ(c.effective_kappa(Mode::cgdm), 0.5);
    EXPECT_EQ(c.effective_rho(Mode::cgdm), 2.0);
    EXPECT_EQ(c.effective_kappa(Mode::no_con), 0.0);
    EXPECT_EQ(c.effective_rho(Mode::no_con), 2.0);
    EXPECT_EQ(c.effective_kappa(Mode::no_dc), 0.5);
    EXPECT_EQ(c.effective_rho(Mode::no_dc), 0.0);
    EXPECT_EQ(c.effective_kappa(Mode::gdm), 0.0);
    EXPECT_EQ(c.effective_rho(Mode::gdm), 0.0);
    EXPECT_EQ(parse_mode("no-con"), Mode::no_con);
    EXPECT_THROW(parse_mode("ppo"), ConfigError);
}

TEST(TrainerTest, TargetsStartAsExactCopies) {
    Trainer t(4, 3, tiny_trainer(), Mode::cgdm, 1);
    EXPECT_EQ(t.target_actor().denoiser().params(), t.actor().denoiser().params());
    EXPECT_EQ(t.target_critic1().params(), t.critic1().params());
    EXPECT_EQ(t.target_critic2().params(), t.critic2().params());
    EXPECT_NE(t.critic1().params(), t.critic2().params());
}

TEST(TrainerTest, CriticParametersMoveIffGradientIsNonzero) {
    Trainer t(2, 1, tiny_trainer(), Mode::gdm, 2);
    std::mt19937_64 rng(3);
    Batch b;
    b.observations = gaussian(2, 8, rng);
    b.actions = Matrix::Constant(1, 8, 0.5);
    b.rewards = Vector::Constant(8, -1.0);
    b.next_observations = gaussian(2, 8, rng);
    b.terminal = Vector::Zero(8);
    const Vector before = t.critic1().params();
    t.critic_update(b, rng);
    EXPECT_NE(t.critic1().params(), before);
}

TEST(TrainerTest, ZeroEpochsLeaveNetworksUntouched) {
    Trainer t(10, 10, tiny_trainer(), Mode::cgdm, 4);
    const Vector actor = t.actor().denoiser().params();
    const auto log = train(tiny_world(), trust::TrustConfig{}, t, 0, 4);
    EXPECT_TRUE(log.empty());
    EXPECT_EQ(t.actor().denoiser().params(), actor);
    EXPECT_EQ(t.gradient_steps(), 0);
}

TEST(TrainerTest, RandomModeTakesNoGradientSteps) {
    sim::Environment env(tiny_world(), trust::TrustConfig{});
    Trainer t(env.observation_dim(), env.action_dim(), tiny_trainer(), Mode::random, 5);
    const auto log = train(tiny_world(), trust::TrustConfig{}, t, 3, 5);
    ASSERT_EQ(log.size(), 3u);
    for (const auto& m : log) {
        EXPECT_EQ(m.updates, 0);
        EXPECT_EQ(m.gradient_steps, 0);
    }
}

TEST(TrainerTest, RandomActionsAreUniform) {
    std::mt19937_64 a(6), b(6);
    const Matrix x = random_actions(10, 10000, a);
    EXPECT_EQ(x, random_actions(10, 10000, b));
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_LE(x.maxCoeff(), 1.0);
    const double sigma = std::sqrt(1.0 / 12.0 / x.size());
    EXPECT_NEAR(x.mean(), 0.5, 3.0 * sigma);
}

TEST(TrainerTest, TrainingLogIsDeterministic) {
    auto run = [] {
        sim::Environment env(tiny_world(), trust::TrustConfig{});
        Trainer t(env.observation_dim(), env.action_dim(), tiny_trainer(), Mode::cgdm, 7);
        std::vector<double> out;
        for (const auto& m : train(tiny_world(), trust::TrustConfig{}, t, 3, 7)) {
            out.push_back(m.test_reward);
            out.push_back(m.actor_objective);
            out.push_back(m.critic_loss);
            out.push_back(m.mean_confidence);
        }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(TrainerTest, ConfidenceTelemetryInNoConMode) {
    sim::Environment env(tiny_world(), trust::TrustConfig{});
    Trainer t(env.observation_dim(), env.action_dim(), tiny_trainer(), Mode::no_con, 8);
    for (const auto& m : train(tiny_world(), trust::TrustConfig{}, t, 2, 8)) EXPECT_EQ(m.mean_confidence, 1.0);
    Trainer c(env.observation_dim(), env.action_dim(), tiny_trainer(), Mode::cgdm, 8);
    for (const auto& m : train(tiny_world(), trust::TrustConfig{}, c, 2, 8)) {
        EXPECT_GT(m.mean_confidence, 0.0);
        EXPECT_LE(m.mean_confidence, 1.0);
    }
}

TEST(TrainerTest, CheckpointRestoresEveryNetwork) {
    Trainer a(6, 4, tiny_trainer(), Mode::cgdm, 9);
    Trainer b(6, 4, tiny_trainer(), Mode::cgdm, 10);
    const auto entries = a.checkpoint();
    EXPECT_EQ(entries.size(), 6u);
    b.restore(nn::deserialize_checkpoint(nn::serialize_checkpoint(entries)));
    EXPECT_EQ(b.actor().denoiser().params(), a.actor().denoiser().params());
    EXPECT_EQ(b.target_critic2().params(), a.target_critic2().params());
    Trainer wrong(5, 4, tiny_trainer(), Mode::cgdm, 9);
    EXPECT_THROW(wrong.restore(entries), Error);
}

// One vehicle, two RSUs; RSU 1 is under permanent undefended attack and
// therefore strictly slower. The trained policy should migrate to RSU 0.
TEST(MicroWorld, TrainedPolicyPrefersTheFasterRsu) {
    sim::WorldConfig w;
    w.num_vehicles = 1;
    w.num_rsus = 2;
    w.episode_length = 20;
    w.attack_targets = {1};
    w.attack_frequency = 1.0;
    w.mtd_enabled = false;
    w.reputation_threshold = 0.01;
    trust::TrustConfig tc;
    tc.initial_reputation = 0.5;
    TrainerConfig c;
    c.batch_size = 64;
    c.gradient_steps = 20;
    c.critic_hidden = {32, 32};
    c.policy.hidden = {32, 32};
    c.actor_learning_rate = 1e-3;
    c.reward_scale = 0.1;
    c.eval_episodes = 1;
    c.kappa = 0.02;
    c.rho = 0.01;
    sim::Environment env(w, tc);
    Trainer t(env.observation_dim(), env.action_dim(), c, Mode::cgdm, 11);
    train(w, tc, t, 60, 11);

    std::mt19937_64 rng(12);
    int picks = 0, slots = 0;
    for (int ep = 0; ep < 5; ++ep) {
        Vector obs = env.reset(1000 + ep);
        while (!env.done()) {
            const Vector a = t.act_eval(obs, rng).col(0);
            picks += a[env.layout().premigration(0, 0)] > a[env.layout().premigration(0, 1)];
            ++slots;
            obs = env.step(std::span<const double>(a.data(), static_cast<std::size_t>(a.size()))).observation;
        }
    }
    EXPECT_GE(picks, 0.9 * slots);
}
