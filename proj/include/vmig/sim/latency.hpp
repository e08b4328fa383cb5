#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "vmig/error.hpp"

namespace vmig::sim {

// Per-vehicle latency components for one slot, in seconds.
struct LatencyBreakdown {
    double t_uc = 0.0;    // upload of agent construction data
    double t_dep = 0.0;   // agent deployment
    double t_um = 0.0;    // upload of raw multi-modal data
    double t_pro = 0.0;   // task processing
    double t_down = 0.0;  // result download
    double t_mig = 0.0;   // pre-migration to the next RSU
    double t_ext = 0.0;   // MTD reconfiguration
    double total = 0.0;
};

// Data volumes of one vehicle's agent, in Mbit.
struct ServiceLoad {
    double construction = 0.0;  // D^con
    double raw = 0.0;           // D^raw
    double compute = 0.0;       // D^com
    double result = 0.0;        // D^res
};

// Effective conditions at the hosting RSU for one vehicle and slot, after
// any attack degradation has been applied.
struct LinkConditions {
    double uplink_rate = 0.0;         // Mbit/s
    double downlink_rate = 0.0;       // Mbit/s
    double backhaul_bandwidth = 0.0;  // Mbit/s towards the pre-migration target
    double cpu_speed = 0.0;           // cycles/s
    double cycles_per_bit = 0.0;
    double mtd_latency = 0.0;         // s
    bool migrating = false;           // false when the target is the hosting RSU
};

inline constexpr double kBitsPerMbit = 1e6;

// Component latencies; `total` is left at zero (see total_latency).
inline LatencyBreakdown latency_breakdown(const ServiceLoad& data, double alpha, const LinkConditions& link,
                                          bool mtd) {
    if (!(alpha > 0.0))
        throw AllocationError("latency_breakdown: hosted vehicle received no compute share (alpha <= 0)");
    if (!(alpha <= 1.0)) throw AllocationError("latency_breakdown: compute share exceeds 1");
    LatencyBreakdown out;
    const double share = alpha * link.cpu_speed;
    out.t_uc = data.construction / link.uplink_rate;
    out.t_dep = link.cycles_per_bit * data.construction * kBitsPerMbit / share;
    out.t_um = data.raw / link.uplink_rate;
    out.t_pro = link.cycles_per_bit * data.compute * kBitsPerMbit / share;
    out.t_down = data.result / link.downlink_rate;
    out.t_mig = link.migrating ? data.construction / link.backhaul_bandwidth : 0.0;
    out.t_ext = mtd ? link.mtd_latency : 0.0;
    return out;
}

// Total migration latency of one vehicle. `replica` says whether the hosting
// RSU already holds the agent; `mtd` whether that RSU runs MTD this slot.
inline double total_latency(const LatencyBreakdown& p, bool replica, bool mtd) {
    const double setup = replica ? 0.0 : (p.t_uc + p.t_dep);
    const double ext = mtd ? p.t_ext : 0.0;
    return setup + p.t_um + p.t_down + std::max(p.t_pro, p.t_mig) + ext;
}

inline double reward(std::span<const double> totals) {
    double sum = 0.0;
    for (double t : totals) sum += t;
    return -sum;
}

}  // namespace vmig::sim
