#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmig/error.hpp"

namespace vmig::trust {

struct BetaPrior {
    double alpha = 1.0;
    double beta = 1.0;
};

// Binary interaction evaluations per (user, RSU), kept as positive and
// negative counts. Per-RSU totals make the leave-one-out aggregation O(1).
class EvaluationLedger {
public:
    EvaluationLedger() = default;
    EvaluationLedger(int users, int rsus, BetaPrior attitude_prior, BetaPrior norm_prior)
        : users_(users),
          rsus_(rsus),
          attitude_prior_(attitude_prior),
          norm_prior_(norm_prior),
          pos_(static_cast<std::size_t>(users) * rsus, 0),
          neg_(static_cast<std::size_t>(users) * rsus, 0),
          pos_total_(rsus, 0),
          neg_total_(rsus, 0) {
        if (!(attitude_prior.alpha > 0 && attitude_prior.beta > 0 && norm_prior.alpha > 0 && norm_prior.beta > 0))
            throw ConfigError("EvaluationLedger: Beta priors must be strictly positive");
    }

    void record(int u, int s, bool positive) {
        check(u, s);
        auto& bucket = positive ? pos_ : neg_;
        auto& total = positive ? pos_total_ : neg_total_;
        ++bucket[index(u, s)];
        ++total[s];
    }

    std::uint64_t positives(int u, int s) const { return check(u, s), pos_[index(u, s)]; }
    std::uint64_t negatives(int u, int s) const { return check(u, s), neg_[index(u, s)]; }
    // Counts summed over every user except `u`.
    std::uint64_t positives_excluding(int u, int s) const { return check(u, s), pos_total_[s] - pos_[index(u, s)]; }
    std::uint64_t negatives_excluding(int u, int s) const { return check(u, s), neg_total_[s] - neg_[index(u, s)]; }

    const BetaPrior& attitude_prior() const { return attitude_prior_; }
    const BetaPrior& norm_prior() const { return norm_prior_; }
    int users() const { return users_; }
    int rsus() const { return rsus_; }

private:
    std::size_t index(int u, int s) const { return static_cast<std::size_t>(u) * rsus_ + s; }
    void check(int u, int s) const {
        if (u < 0 || u >= users_ || s < 0 || s >= rsus_)
            throw ReferenceError("EvaluationLedger: unknown (user " + std::to_string(u) + ", RSU " +
                                 std::to_string(s) + ")");
    }

    int users_ = 0;
    int rsus_ = 0;
    BetaPrior attitude_prior_;
    BetaPrior norm_prior_;
    std::vector<std::uint64_t> pos_;
    std::vector<std::uint64_t> neg_;
    std::vector<std::uint64_t> pos_total_;
    std::vector<std::uint64_t> neg_total_;
};

// Posterior mean of a Beta(alpha, beta) prior after p successes and q failures.
inline double beta_posterior_mean(const BetaPrior& prior, double p, double q) {
    return (prior.alpha + p) / (prior.alpha + prior.beta + p + q);
}

// Attitude of user u towards RSU s: posterior mean of u's own evaluations.
inline double attitude(const EvaluationLedger& ledger, int u, int s) {
    return beta_posterior_mean(ledger.attitude_prior(), static_cast<double>(ledger.positives(u, s)),
                               static_cast<double>(ledger.negatives(u, s)));
}

// Subjective norm: posterior mean of every other user's evaluations of s.
inline double subjective_norm(const EvaluationLedger& ledger, int u, int s) {
    return beta_posterior_mean(ledger.norm_prior(), static_cast<double>(ledger.positives_excluding(u, s)),
                               static_cast<double>(ledger.negatives_excluding(u, s)));
}

}  // namespace vmig::trust
