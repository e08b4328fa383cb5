#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"

namespace vmig::learner {

struct Transition {
    Eigen::VectorXd observation;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_observation;
    bool terminal = false;
};

// Column-stacked minibatch.
struct Batch {
    Eigen::MatrixXd observations;
    Eigen::MatrixXd actions;
    Eigen::VectorXd rewards;
    Eigen::MatrixXd next_observations;
    Eigen::VectorXd terminal;  // 1.0 for terminal transitions

    Eigen::Index size() const { return rewards.size(); }
};

// Bounded FIFO store; once full, each push overwrites the oldest entry.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("trainer.buffer_capacity: must be positive");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    void push(Transition t) {
        if (!std::isfinite(t.reward)) throw DivergenceError("replay buffer: non-finite reward");
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    // i = 0 is the oldest stored transition.
    const Transition& at(std::size_t i) const {
        if (i >= items_.size()) throw ReferenceError("replay buffer: index out of range");
        return items_[(head_ + i) % items_.size()];
    }

    // Uniform draw of positions with replacement.
    std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const {
        if (items_.empty()) throw StateError("replay buffer: sampling from an empty buffer");
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<std::size_t> idx(n);
        for (auto& i : idx) i = pick(rng);
        return idx;
    }

    Batch gather(const std::vector<std::size_t>& idx) const {
        const auto& first = at(idx.front());
        const auto n = static_cast<Eigen::Index>(idx.size());
        Batch b;
        b.observations.resize(first.observation.size(), n);
        b.actions.resize(first.action.size(), n);
        b.rewards.resize(n);
        b.next_observations.resize(first.next_observation.size(), n);
        b.terminal.resize(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            const auto& t = at(idx[c]);
            b.observations.col(c) = t.observation;
            b.actions.col(c) = t.action;
            b.rewards[c] = t.reward;
            b.next_observations.col(c) = t.next_observation;
            b.terminal[c] = t.terminal ? 1.0 : 0.0;
        }
        return b;
    }

    Batch sample(std::size_t n, std::mt19937_64& rng) const { return gather(sample_indices(n, rng)); }

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t head_ = 0;  // oldest entry once the buffer is full
};

}  // namespace vmig::learner
