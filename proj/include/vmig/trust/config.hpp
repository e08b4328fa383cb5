#pragma once

#include <cmath>
#include <string>

#include "vmig/error.hpp"

namespace vmig::trust {

struct TrustConfig {
    // Beta priors for the attitude and subjective-norm posteriors. The prior
    // mean matches initial_reputation so that an RSU nobody has used yet is
    // not excluded by the safety threshold on priors alone.
    double attitude_prior_alpha = 3.5;
    double attitude_prior_beta = 1.5;
    double norm_prior_alpha = 3.5;
    double norm_prior_beta = 1.5;

    double reliability_weight = 0.5;  // lambda: received vs forwarded packets
    double control_weight = 0.5;      // sigma: reliability vs efficiency
    double update_rate = 0.7;         // xi

    double weight_attitude = 0.33;
    double weight_norm = 0.33;
    double weight_control = 0.33;

    int window_slots = 10;
    double tolerable_latency_min = 5.0;  // s, drawn per user and episode
    double tolerable_latency_max = 10.0;
    double initial_reputation = 0.7;

    void validate() const {
        auto fail = [](const std::string& key, const std::string& why) {
            throw ConfigError("trust." + key + ": " + why);
        };
        auto positive = [&](const std::string& key, double v) {
            if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be > 0");
        };
        auto open_unit = [&](const std::string& key, double v) {
            if (!(v > 0.0 && v < 1.0)) fail(key, "must lie in (0,1)");
        };
        positive("attitude_prior_alpha", attitude_prior_alpha);
        positive("attitude_prior_beta", attitude_prior_beta);
        positive("norm_prior_alpha", norm_prior_alpha);
        positive("norm_prior_beta", norm_prior_beta);
        open_unit("reliability_weight", reliability_weight);
        open_unit("control_weight", control_weight);
        open_unit("update_rate", update_rate);
        open_unit("weight_attitude", weight_attitude);
        open_unit("weight_norm", weight_norm);
        open_unit("weight_control", weight_control);
        if (window_slots < 1) fail("window_slots", "must be >= 1");
        positive("tolerable_latency_min", tolerable_latency_min);
        positive("tolerable_latency_max", tolerable_latency_max);
        if (tolerable_latency_min > tolerable_latency_max) fail("tolerable_latency_min", "min exceeds max");
        if (!(initial_reputation >= 0.0 && initial_reputation <= 1.0))
            fail("initial_reputation", "must lie in [0,1]");
    }
};

}  // namespace vmig::trust
