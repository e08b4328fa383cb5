#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmig/error.hpp"

namespace vmig::sim {

// Flat action layout: [pre-migration logits, vehicle-major (v*S + s)]
// [allocation logits, RSU-major (s*V + v)] [MTD probabilities (s)].
struct ActionLayout {
    int vehicles = 0;
    int rsus = 0;

    int dim() const { return 2 * vehicles * rsus + rsus; }
    int premigration(int v, int s) const { return v * rsus + s; }
    int allocation(int s, int v) const { return vehicles * rsus + s * vehicles + v; }
    int mtd(int s) const { return 2 * vehicles * rsus + s; }
};

struct DecodedAction {
    std::vector<int> targets;         // pre-migration RSU per vehicle
    std::vector<double> allocation;   // compute share of each vehicle at its host
    std::vector<bool> mtd;            // per RSU
    std::vector<int> loads;           // hosted + pending pre-migrations, per RSU
    int violations = 0;               // vehicles resolved through the fallback path
};

// Softmax over `logits` restricted to entries with `allowed` set. Masked
// entries get probability 0.
inline std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& allowed) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (allowed[i]) top = std::max(top, logits[i]);
    std::vector<double> p(logits.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!allowed[i]) continue;
        p[i] = std::exp(logits[i] - top);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

// Maps a raw action in [0,1]^dim onto feasible decisions.
//
// Vehicles are resolved in index order. A target RSU is masked when the
// user's reputation for it is below `threshold`, or when it is not the
// vehicle's current host and its load has reached `max_load`. If every RSU
// is masked the vehicle falls back to the highest-reputation RSU that still
// has room (its own host always has room) and `violations` is incremented.
inline DecodedAction decode_action(std::span<const double> raw, const ActionLayout& layout,
                                   std::span<const int> hosted, const Eigen::MatrixXd& reputation,
                                   double threshold, int max_load, bool mtd_enabled = true) {
    const int V = layout.vehicles;
    const int S = layout.rsus;
    if (static_cast<int>(raw.size()) != layout.dim())
        throw DimensionError("decode_action: expected action of dimension " + std::to_string(layout.dim()) +
                             ", got " + std::to_string(raw.size()));
    if (static_cast<int>(hosted.size()) != V || reputation.rows() != V || reputation.cols() != S)
        throw DimensionError("decode_action: state dimensions disagree with the layout");

    DecodedAction out;
    out.targets.assign(V, 0);
    out.allocation.assign(V, 0.0);
    out.mtd.assign(S, false);
    out.loads.assign(S, 0);
    for (int v = 0; v < V; ++v) {
        if (hosted[v] < 0 || hosted[v] >= S) throw ReferenceError("decode_action: hosted RSU index out of range");
        ++out.loads[hosted[v]];
    }

    std::vector<bool> allowed(S);
    for (int v = 0; v < V; ++v) {
        const int host = hosted[v];
        bool any = false;
        for (int s = 0; s < S; ++s) {
            const bool trusted = reputation(v, s) >= threshold;
            const bool room = (s == host) || out.loads[s] < max_load;
            allowed[s] = trusted && room;
            any = any || allowed[s];
        }
        int target = -1;
        if (any) {
            const auto p = masked_softmax(raw.subspan(layout.premigration(v, 0), S), allowed);
            target = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        } else {
            double best = -std::numeric_limits<double>::infinity();
            for (int s = 0; s < S; ++s) {
                const bool room = (s == host) || out.loads[s] < max_load;
                if (room && reputation(v, s) > best) {
                    best = reputation(v, s);
                    target = s;
                }
            }
            ++out.violations;
        }
        out.targets[v] = target;
        if (target != host) ++out.loads[target];
    }

    std::vector<double> logits;
    for (int s = 0; s < S; ++s) {
        logits.clear();
        std::vector<int> members;
        for (int v = 0; v < V; ++v)
            if (hosted[v] == s) {
                members.push_back(v);
                logits.push_back(raw[layout.allocation(s, v)]);
            }
        if (members.empty()) continue;
        auto share = masked_softmax(logits, std::vector<bool>(members.size(), true));
        // Rounding can push the summed shares a few ulps above 1; shave the largest one.
        const auto largest = std::max_element(share.begin(), share.end());
        for (;;) {
            double sum = 0.0;
            for (double x : share) sum += x;
            if (sum <= 1.0) break;
            *largest = std::nextafter(*largest, 0.0);
        }
        for (std::size_t i = 0; i < members.size(); ++i) out.allocation[members[i]] = share[i];
    }

    for (int s = 0; s < S; ++s) out.mtd[s] = mtd_enabled && raw[layout.mtd(s)] > 0.5;
    return out;
}

}  // namespace vmig::sim
