#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"
#include "vmig/sim/action.hpp"
#include "vmig/sim/channel.hpp"
#include "vmig/sim/latency.hpp"
#include "vmig/sim/world_config.hpp"
#include "vmig/trust/reputation.hpp"

namespace vmig::sim {

// Ground truth of the world at the start of a slot.
struct WorldState {
    int slot = 0;
    std::vector<Point> positions;        // per vehicle
    std::vector<double> speeds;          // m/s
    std::vector<Point> waypoints;        // current waypoint per vehicle
    std::vector<int> hosted;             // K_v
    std::vector<std::uint8_t> replica;   // epsilon, vehicle-major V x S
    std::vector<int> loads;              // L_s
    std::vector<bool> attacked;          // flags of the last executed slot
    std::vector<bool> mtd;               // flags of the last executed slot
    std::vector<ServiceLoad> data;       // per vehicle, fixed for the episode
    std::vector<double> cpu_speed;       // per RSU, fixed for the episode
    std::vector<double> uplink_bandwidth;
    std::vector<double> downlink_bandwidth;
    std::vector<double> tolerable;       // T^max per user
};

struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    std::vector<LatencyBreakdown> latency;  // per vehicle, `total` filled in
    DecodedAction decision;
    std::vector<bool> attacked;
    bool done = false;
};

// Discrete-time vehicular environment. Not thread-safe; one instance per worker.
class Environment {
public:
    Environment(WorldConfig world, trust::TrustConfig trust_cfg)
        : cfg_(std::move(world)), trust_cfg_(std::move(trust_cfg)), layout_{cfg_.num_vehicles, cfg_.num_rsus} {
        cfg_.validate();
        trust_cfg_.validate();
        rsu_positions_ = cfg_.effective_rsu_positions();
        reset(cfg_.seed);
    }

    int observation_dim() const { return 2 * V() + 2 * V() * S() + S(); }
    int action_dim() const { return layout_.dim(); }
    const ActionLayout& layout() const { return layout_; }
    const WorldConfig& config() const { return cfg_; }
    const trust::TrustConfig& trust_config() const { return trust_cfg_; }
    const WorldState& state() const { return state_; }
    const trust::TrustEngine& trust() const { return trust_; }
    const std::vector<Point>& rsu_positions() const { return rsu_positions_; }
    bool done() const { return state_.slot >= cfg_.episode_length; }

    Eigen::VectorXd reset(std::uint64_t seed) {
        rng_.seed(seed);
        const int V = this->V(), S = this->S();
        auto uniform = [this](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); };

        state_ = WorldState{};
        state_.cpu_speed.resize(S);
        state_.uplink_bandwidth.resize(S);
        state_.downlink_bandwidth.resize(S);
        for (int s = 0; s < S; ++s) {
            state_.cpu_speed[s] = uniform(cfg_.cpu_speed_min, cfg_.cpu_speed_max);
            state_.uplink_bandwidth[s] = uniform(cfg_.uplink_bandwidth_min, cfg_.uplink_bandwidth_max);
            state_.downlink_bandwidth[s] = uniform(cfg_.downlink_bandwidth_min, cfg_.downlink_bandwidth_max);
        }
        state_.data.resize(V);
        state_.tolerable.resize(V);
        state_.positions.resize(V);
        state_.speeds.resize(V);
        state_.waypoints.resize(V);
        for (int v = 0; v < V; ++v) {
            const double lo = cfg_.data_size_min, hi = cfg_.data_size_max;
            state_.data[v] = {uniform(lo, hi), uniform(cfg_.raw_fraction * lo, cfg_.raw_fraction * hi),
                              uniform(cfg_.compute_fraction * lo, cfg_.compute_fraction * hi),
                              uniform(cfg_.result_fraction * lo, cfg_.result_fraction * hi)};
            state_.tolerable[v] = uniform(trust_cfg_.tolerable_latency_min, trust_cfg_.tolerable_latency_max);
            state_.positions[v] = random_point();
            state_.speeds[v] = uniform(cfg_.speed_min, cfg_.speed_max);
            state_.waypoints[v] = random_point();
        }

        // Initial deployment: nearest RSU with room, no replicas yet.
        state_.hosted.assign(V, 0);
        state_.loads.assign(S, 0);
        const int cap = cfg_.effective_max_load();
        for (int v = 0; v < V; ++v) {
            int best = -1;
            for (int s = 0; s < S; ++s) {
                if (state_.loads[s] >= cap) continue;
                if (best < 0 || distance(state_.positions[v], rsu_positions_[s]) <
                                    distance(state_.positions[v], rsu_positions_[best]))
                    best = s;
            }
            state_.hosted[v] = best;
            ++state_.loads[best];
        }
        state_.replica.assign(static_cast<std::size_t>(V) * S, 0);
        state_.attacked.assign(S, false);
        state_.mtd.assign(S, false);

        trust_ = trust::TrustEngine(V, S, trust_cfg_, state_.tolerable);
        return observe();
    }

    Eigen::VectorXd observe() const {
        const int V = this->V(), S = this->S();
        Eigen::VectorXd o(observation_dim());
        int i = 0;
        for (int v = 0; v < V; ++v) {
            o[i++] = std::clamp(state_.positions[v].x / cfg_.map_extent, 0.0, 1.0);
            o[i++] = std::clamp(state_.positions[v].y / cfg_.map_extent, 0.0, 1.0);
        }
        for (int v = 0; v < V; ++v)
            for (int s = 0; s < S; ++s) o[i++] = state_.hosted[v] == s ? 1.0 : 0.0;
        const double cap = cfg_.effective_max_load();
        for (int s = 0; s < S; ++s) o[i++] = state_.loads[s] / cap;
        const auto& rep = trust_.reputation();
        for (int v = 0; v < V; ++v)
            for (int s = 0; s < S; ++s) o[i++] = rep(v, s);
        return o;
    }

    // Distance used for the radio link, clamped to 1 m.
    double link_distance(int v, int s) const {
        return std::max(1.0, distance(state_.positions[v], rsu_positions_[s]));
    }

    // Link conditions for vehicle v served at its current host with the given
    // pre-migration target, under this slot's attack and MTD flags.
    LinkConditions link_conditions(int v, int target, bool attacked, bool mtd) const {
        const int s = state_.hosted[v];
        const double factor = (attacked && !mtd) ? cfg_.attack_degradation : 1.0;
        const double gain = channel_gain(link_distance(v, s), cfg_);
        LinkConditions link;
        link.uplink_rate =
            link_rate(state_.uplink_bandwidth[s] * factor, cfg_.vehicle_tx_power, gain, cfg_.noise_power);
        link.downlink_rate =
            link_rate(state_.downlink_bandwidth[s] * factor, cfg_.vehicle_tx_power, gain, cfg_.noise_power);
        link.backhaul_bandwidth = cfg_.inter_rsu_bandwidth * factor;
        link.cpu_speed = state_.cpu_speed[s] * factor;
        link.cycles_per_bit = cfg_.cycles_per_bit;
        link.mtd_latency = cfg_.mtd_latency;
        link.migrating = target != s;
        return link;
    }

    StepResult step(std::span<const double> raw_action) {
        if (done())
            throw EpisodeError("step: episode already ended at slot " + std::to_string(state_.slot));
        const int V = this->V(), S = this->S();

        StepResult out;
        out.decision = decode_action(raw_action, layout_, state_.hosted, trust_.reputation(),
                                     cfg_.reputation_threshold, cfg_.effective_max_load(), cfg_.mtd_enabled);
        const auto& d = out.decision;

        out.attacked.assign(S, false);
        std::bernoulli_distribution attack(cfg_.attack_frequency);
        for (int s : cfg_.attack_targets) out.attacked[s] = attack(rng_);
        auto disrupted = [&](int s) { return out.attacked[s] && !d.mtd[s]; };

        out.latency.resize(V);
        std::vector<double> totals(V);
        for (int v = 0; v < V; ++v) {
            const int s = state_.hosted[v];
            const auto link = link_conditions(v, d.targets[v], out.attacked[s], d.mtd[s]);
            auto parts = latency_breakdown(state_.data[v], d.allocation[v], link, d.mtd[s]);
            parts.total = total_latency(parts, replica(v, s), d.mtd[s]);
            out.latency[v] = parts;
            totals[v] = parts.total;
        }
        out.reward = reward(totals);

        // Beacons from every vehicle inside each RSU's coverage.
        for (int s = 0; s < S; ++s) {
            const double loss = disrupted(s) ? cfg_.attack_beacon_loss : cfg_.beacon_loss;
            std::binomial_distribution<int> failures(cfg_.beacon_packets, loss);
            trust::BeaconCounts counts;
            bool any = false;
            for (int v = 0; v < V; ++v) {
                if (distance(state_.positions[v], rsu_positions_[s]) > cfg_.rsu_coverage_radius) continue;
                any = true;
                const int rx_fail = failures(rng_);
                const int fwd_fail = failures(rng_);
                counts.rx_fail += rx_fail;
                counts.rx_ok += cfg_.beacon_packets - rx_fail;
                counts.fwd_fail += fwd_fail;
                counts.fwd_ok += cfg_.beacon_packets - fwd_fail;
            }
            if (any) trust_.record(trust::BeaconSample{s, counts});
        }
        for (int v = 0; v < V; ++v) {
            const int s = state_.hosted[v];
            trust_.record(trust::LatencySample{s, totals[v]});
            const bool positive = totals[v] <= state_.tolerable[v] && !disrupted(s);
            trust_.record(trust::UserEvaluation{v, s, positive});
        }
        trust_.end_slot();

        // Pre-migration: the host keeps the deployed agent, the target gets a replica.
        for (int v = 0; v < V; ++v) {
            replica(v, state_.hosted[v]) = 1;
            replica(v, d.targets[v]) = 1;
            state_.hosted[v] = d.targets[v];
        }
        state_.loads.assign(S, 0);
        for (int v = 0; v < V; ++v) ++state_.loads[state_.hosted[v]];
        state_.attacked = out.attacked;
        state_.mtd = d.mtd;

        for (int v = 0; v < V; ++v) advance_vehicle(v);
        ++state_.slot;

        out.observation = observe();
        out.done = done();
        return out;
    }

private:
    int V() const { return cfg_.num_vehicles; }
    int S() const { return cfg_.num_rsus; }

    std::uint8_t& replica(int v, int s) { return state_.replica[static_cast<std::size_t>(v) * S() + s]; }
    bool replica(int v, int s) const { return state_.replica[static_cast<std::size_t>(v) * S() + s] != 0; }

    Point random_point() {
        std::uniform_real_distribution<double> u(0.0, cfg_.map_extent);
        const double x = u(rng_);
        return {x, u(rng_)};
    }

    // Piecewise-linear motion towards successive random waypoints.
    void advance_vehicle(int v) {
        double remaining = state_.speeds[v] * cfg_.slot_duration;
        Point& p = state_.positions[v];
        for (int guard = 0; remaining > 0.0 && guard < 64; ++guard) {
            Point& w = state_.waypoints[v];
            const double gap = distance(p, w);
            if (gap > remaining) {
                p.x += (w.x - p.x) * remaining / gap;
                p.y += (w.y - p.y) * remaining / gap;
                return;
            }
            p = w;
            remaining -= gap;
            w = random_point();
        }
    }

    WorldConfig cfg_;
    trust::TrustConfig trust_cfg_;
    ActionLayout layout_;
    std::vector<Point> rsu_positions_;
    WorldState state_;
    trust::TrustEngine trust_;
    std::mt19937_64 rng_;
};

}  // namespace vmig::sim
