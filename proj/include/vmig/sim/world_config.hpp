#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vmig/error.hpp"

namespace vmig::sim {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Static description of the vehicular world. Units: metres, seconds, Hz,
// Mbit and Mbit/s for data and bandwidth, cycles/s for CPU speed.
struct WorldConfig {
    int num_vehicles = 8;
    int num_rsus = 4;
    double map_extent = 1000.0;             // square side, m
    std::vector<Point> rsu_positions;       // empty: uniform grid over the map
    double rsu_coverage_radius = 400.0;     // m

    double carrier_frequency = 5.9e9;       // Hz
    double channel_gain_coeff = 1.0;
    double light_speed = 299792458.0;       // m/s

    // Wireless bandwidth is drawn per RSU and episode from [min, max].
    double uplink_bandwidth_min = 100.0;
    double uplink_bandwidth_max = 300.0;
    double downlink_bandwidth_min = 100.0;
    double downlink_bandwidth_max = 300.0;
    double inter_rsu_bandwidth = 500.0;     // Mbit/s between any two RSUs

    double vehicle_tx_power = 0.1;          // W, used for uplink and downlink
    double noise_power = 1e-12;             // W
    double cycles_per_bit = 0.5;
    double cpu_speed_min = 1e8;             // cycles/s, drawn per RSU and episode
    double cpu_speed_max = 3e8;
    int rsu_max_load = 0;                   // 0: ceil(2V/S)

    double mtd_latency = 0.3;               // s
    bool mtd_enabled = true;
    double attack_frequency = 0.3;          // per slot per targeted RSU
    double attack_degradation = 0.2;        // multiplier on bandwidth and CPU
    std::vector<int> attack_targets{0};

    int episode_length = 100;               // slots
    double reputation_threshold = 0.7;

    // Construction data D^con is drawn per vehicle and episode from
    // [data_size_min, data_size_max]; the other three sizes are drawn from
    // the same range scaled by their fraction.
    double data_size_min = 100.0;           // Mbit
    double data_size_max = 600.0;
    double raw_fraction = 0.2;
    double compute_fraction = 0.5;
    double result_fraction = 0.05;

    double speed_min = 10.0;                // m/s
    double speed_max = 20.0;
    double slot_duration = 1.0;             // s of motion per slot

    int beacon_packets = 10;                // per direction, per vehicle in coverage, per slot
    double beacon_loss = 0.02;
    double attack_beacon_loss = 0.8;

    std::uint64_t seed = 1;

    int effective_max_load() const {
        if (rsu_max_load > 0) return rsu_max_load;
        return (2 * num_vehicles + num_rsus - 1) / num_rsus;
    }

    std::vector<Point> effective_rsu_positions() const {
        if (!rsu_positions.empty()) return rsu_positions;
        const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_rsus))));
        const int rows = (num_rsus + cols - 1) / cols;
        std::vector<Point> out;
        out.reserve(num_rsus);
        for (int i = 0; i < num_rsus; ++i) {
            const int r = i / cols;
            const int c = i % cols;
            out.push_back({map_extent * (c + 0.5) / cols, map_extent * (r + 0.5) / rows});
        }
        return out;
    }

    void validate() const {
        auto fail = [](const std::string& key, const std::string& why) {
            throw ConfigError("world." + key + ": " + why);
        };
        auto positive = [&](const std::string& key, double v) {
            if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be > 0");
        };
        auto ordered = [&](const std::string& lo_key, double lo, double hi) {
            if (lo > hi) fail(lo_key, "min exceeds max");
        };
        if (num_vehicles < 1) fail("num_vehicles", "must be >= 1");
        if (num_rsus < 2) fail("num_rsus", "must be >= 2");
        positive("map_extent", map_extent);
        positive("rsu_coverage_radius", rsu_coverage_radius);
        positive("carrier_frequency", carrier_frequency);
        positive("channel_gain_coeff", channel_gain_coeff);
        positive("light_speed", light_speed);
        positive("uplink_bandwidth_min", uplink_bandwidth_min);
        positive("uplink_bandwidth_max", uplink_bandwidth_max);
        ordered("uplink_bandwidth_min", uplink_bandwidth_min, uplink_bandwidth_max);
        positive("downlink_bandwidth_min", downlink_bandwidth_min);
        positive("downlink_bandwidth_max", downlink_bandwidth_max);
        ordered("downlink_bandwidth_min", downlink_bandwidth_min, downlink_bandwidth_max);
        positive("inter_rsu_bandwidth", inter_rsu_bandwidth);
        positive("vehicle_tx_power", vehicle_tx_power);
        positive("noise_power", noise_power);
        positive("cycles_per_bit", cycles_per_bit);
        positive("cpu_speed_min", cpu_speed_min);
        positive("cpu_speed_max", cpu_speed_max);
        ordered("cpu_speed_min", cpu_speed_min, cpu_speed_max);
        if (rsu_max_load < 0) fail("rsu_max_load", "must be >= 0 (0 selects the default)");
        if (static_cast<long>(effective_max_load()) * num_rsus < num_vehicles)
            fail("rsu_max_load", "total RSU capacity cannot host every vehicle");
        if (!(mtd_latency >= 0.0)) fail("mtd_latency", "must be >= 0");
        if (!(attack_frequency >= 0.0 && attack_frequency <= 1.0)) fail("attack_frequency", "must lie in [0,1]");
        if (!(attack_degradation > 0.0 && attack_degradation <= 1.0))
            fail("attack_degradation", "must lie in (0,1]");
        for (int s : attack_targets)
            if (s < 0 || s >= num_rsus) fail("attack_targets", "RSU index out of range");
        if (episode_length < 1) fail("episode_length", "must be >= 1");
        if (!(reputation_threshold > 0.0 && reputation_threshold < 1.0))
            fail("reputation_threshold", "must lie in (0,1)");
        positive("data_size_min", data_size_min);
        positive("data_size_max", data_size_max);
        ordered("data_size_min", data_size_min, data_size_max);
        positive("raw_fraction", raw_fraction);
        positive("compute_fraction", compute_fraction);
        positive("result_fraction", result_fraction);
        if (!(speed_min >= 0.0)) fail("speed_min", "must be >= 0");
        ordered("speed_min", speed_min, speed_max);
        positive("slot_duration", slot_duration);
        if (beacon_packets < 1) fail("beacon_packets", "must be >= 1");
        if (!(beacon_loss >= 0.0 && beacon_loss <= 1.0)) fail("beacon_loss", "must lie in [0,1]");
        if (!(attack_beacon_loss >= 0.0 && attack_beacon_loss <= 1.0))
            fail("attack_beacon_loss", "must lie in [0,1]");
        if (!rsu_positions.empty() && static_cast<int>(rsu_positions.size()) != num_rsus)
            fail("rsu_positions", "must list exactly num_rsus points");
    }
};

}  // namespace vmig::sim
