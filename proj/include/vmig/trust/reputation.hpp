#pragma once

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"
#include "vmig/trust/beacon.hpp"
#include "vmig/trust/config.hpp"
#include "vmig/trust/ledger.hpp"

namespace vmig::trust {

// Perceived behavioural control, clamped to [0,1] because the reliability
// term may be negative.
inline double perceived_control(double reliability, double efficiency, double sigma) {
    return std::clamp(sigma * reliability + (1.0 - sigma) * efficiency, 0.0, 1.0);
}

struct FactorWeights {
    double attitude = 1.0 / 3.0;
    double norm = 1.0 / 3.0;
    double control = 1.0 / 3.0;

    FactorWeights normalized() const {
        const double z = attitude + norm + control;
        return {attitude / z, norm / z, control / z};
    }
};

// Reputation as behavioural intention; `w` must already be normalized.
inline double behavioral_intention(double a, double s, double p, const FactorWeights& w) {
    return w.attitude * a + w.norm * s + w.control * p;
}

inline double smooth_update(double old_value, double near_value, double xi) {
    return xi * near_value + (1.0 - xi) * old_value;
}

struct UserEvaluation {
    int user = 0;
    int rsu = 0;
    bool positive = true;
};

struct BeaconSample {
    int rsu = 0;
    BeaconCounts counts;
};

struct LatencySample {
    int rsu = 0;
    double total = 0.0;
};

using TrustEvent = std::variant<UserEvaluation, BeaconSample, LatencySample>;

// Smoothed per-(user, RSU) reputation and the parameters that shape it.
struct ReputationState {
    Eigen::MatrixXd value;            // users x RSUs, each in [0,1]
    FactorWeights weights;            // normalized
    double lambda = 0.5;
    double sigma = 0.5;
    double xi = 0.7;
    std::vector<double> tolerable;    // T^max per user, s
};

// Owns the evaluation ledger, beacon windows and reputation matrix of one
// environment. Events are recorded against the current slot; end_slot()
// folds them into the reputation values and opens the next slot.
class TrustEngine {
public:
    TrustEngine() = default;
    TrustEngine(int users, int rsus, const TrustConfig& cfg, std::vector<double> tolerable_latency)
        : users_(users),
          rsus_(rsus),
          ledger_(users, rsus, {cfg.attitude_prior_alpha, cfg.attitude_prior_beta},
                  {cfg.norm_prior_alpha, cfg.norm_prior_beta}),
          beacons_(rsus, cfg.window_slots) {
        cfg.validate();
        if (static_cast<int>(tolerable_latency.size()) != users)
            throw DimensionError("TrustEngine: need one tolerable latency per user");
        state_.value = Eigen::MatrixXd::Constant(users, rsus, cfg.initial_reputation);
        state_.weights = FactorWeights{cfg.weight_attitude, cfg.weight_norm, cfg.weight_control}.normalized();
        state_.lambda = cfg.reliability_weight;
        state_.sigma = cfg.control_weight;
        state_.xi = cfg.update_rate;
        state_.tolerable = std::move(tolerable_latency);
    }

    void record(const TrustEvent& event) {
        std::visit(
            [this](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, UserEvaluation>) {
                    ledger_.record(e.user, e.rsu, e.positive);
                } else if constexpr (std::is_same_v<T, BeaconSample>) {
                    beacons_.add_beacon(e.rsu, slot_, e.counts);
                } else {
                    beacons_.add_latency(e.rsu, slot_, e.total);
                }
            },
            event);
    }

    double attitude(int u, int s) const { return trust::attitude(ledger_, u, s); }
    double subjective_norm(int u, int s) const { return trust::subjective_norm(ledger_, u, s); }
    // Missing beacon evidence counts as neutral reliability 0.
    double reliability(int s) const { return transmission_reliability(beacons_, s, state_.lambda).value_or(0.0); }
    double efficiency(int u, int s) const {
        check_user(u);
        return migration_efficiency(beacons_, s, state_.tolerable[u]);
    }
    double control(int u, int s) const { return perceived_control(reliability(s), efficiency(u, s), state_.sigma); }
    double instantaneous(int u, int s) const {
        return behavioral_intention(attitude(u, s), subjective_norm(u, s), control(u, s), state_.weights);
    }

    // Recomputes every reputation from the windowed evidence, then advances the slot.
    void end_slot() {
        beacons_.evict(slot_);
        for (int s = 0; s < rsus_; ++s) {
            const double r = reliability(s);
            for (int u = 0; u < users_; ++u) {
                const double m = migration_efficiency(beacons_, s, state_.tolerable[u]);
                const double p = perceived_control(r, m, state_.sigma);
                const double near = behavioral_intention(attitude(u, s), subjective_norm(u, s), p, state_.weights);
                state_.value(u, s) = smooth_update(state_.value(u, s), near, state_.xi);
            }
        }
        ++slot_;
    }

    const Eigen::MatrixXd& reputation() const { return state_.value; }
    const ReputationState& state() const { return state_; }
    const EvaluationLedger& ledger() const { return ledger_; }
    const BeaconStats& beacons() const { return beacons_; }
    int slot() const { return slot_; }
    int users() const { return users_; }
    int rsus() const { return rsus_; }

private:
    void check_user(int u) const {
        if (u < 0 || u >= users_) throw ReferenceError("TrustEngine: unknown user " + std::to_string(u));
    }

    int users_ = 0;
    int rsus_ = 0;
    int slot_ = 0;
    EvaluationLedger ledger_;
    BeaconStats beacons_;
    ReputationState state_;
};

}  // namespace vmig::trust
