#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "vmig/error.hpp"
#include "vmig/sim/world_config.hpp"

namespace vmig::sim {

// Free-space path-loss gain between a vehicle and an RSU `distance` metres apart.
inline double channel_gain(double distance, const WorldConfig& cfg) {
    if (!(distance > 0.0) || !std::isfinite(distance))
        throw GeometryError("channel_gain: distance must be positive and finite, got " + std::to_string(distance));
    const double ratio = cfg.light_speed / (4.0 * std::numbers::pi * cfg.carrier_frequency * distance);
    return cfg.channel_gain_coeff * (ratio * ratio);
}

// Shannon-form rate in Mbit/s; `bandwidth` is the Mbit/s-scaled bandwidth.
inline double link_rate(double bandwidth, double tx_power, double gain, double noise) {
    if (!(bandwidth > 0.0) || !(noise > 0.0) || !(gain >= 0.0) || !(tx_power >= 0.0))
        throw Error("link_rate: requires bandwidth > 0, noise > 0, gain >= 0, power >= 0");
    return bandwidth * std::log2(1.0 + tx_power * gain / noise);
}

}  // namespace vmig::sim
