#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "vmig/error.hpp"

namespace vmig::trust {

// Packet counts reported in beacons: received (D) and forwarded (F).
struct BeaconCounts {
    std::uint64_t rx_ok = 0;     // D_s
    std::uint64_t rx_fail = 0;   // D_f
    std::uint64_t fwd_ok = 0;    // F_s
    std::uint64_t fwd_fail = 0;  // F_f

    BeaconCounts& operator+=(const BeaconCounts& o) {
        rx_ok += o.rx_ok;
        rx_fail += o.rx_fail;
        fwd_ok += o.fwd_ok;
        fwd_fail += o.fwd_fail;
        return *this;
    }
};

// Per-RSU beacon counts and total-latency samples over a sliding window of
// the last `window` slots. One entry per slot that received any sample.
class BeaconStats {
public:
    BeaconStats() = default;
    BeaconStats(int rsus, int window) : window_(window), entries_(rsus) {
        if (window < 1) throw ConfigError("BeaconStats: window must be >= 1 slot");
    }

    void add_beacon(int s, int slot, const BeaconCounts& counts) { entry(s, slot).counts += counts; }
    void add_latency(int s, int slot, double total) { entry(s, slot).latencies.push_back(total); }

    // Drops entries that fall outside the window ending at `now`.
    void evict(int now) {
        for (auto& q : entries_)
            while (!q.empty() && q.front().slot <= now - window_) q.pop_front();
    }

    BeaconCounts counts(int s) const {
        check(s);
        BeaconCounts sum;
        for (const auto& e : entries_[s]) sum += e.counts;
        return sum;
    }

    // Mean of every windowed latency sample at s, or nullopt if there are none.
    std::optional<double> mean_latency(int s) const {
        check(s);
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& e : entries_[s]) {
            for (double t : e.latencies) sum += t;
            n += e.latencies.size();
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }

    std::size_t entries(int s) const { return check(s), entries_[s].size(); }
    int window() const { return window_; }
    int rsus() const { return static_cast<int>(entries_.size()); }

private:
    struct Entry {
        int slot = 0;
        BeaconCounts counts;
        std::vector<double> latencies;
    };

    void check(int s) const {
        if (s < 0 || s >= rsus()) throw ReferenceError("BeaconStats: unknown RSU " + std::to_string(s));
    }

    Entry& entry(int s, int slot) {
        check(s);
        auto& q = entries_[s];
        if (!q.empty() && slot < q.back().slot) throw StateError("BeaconStats: samples must arrive in slot order");
        if (q.empty() || q.back().slot != slot) q.push_back(Entry{slot, {}, {}});
        while (q.front().slot <= slot - window_) q.pop_front();
        return q.back();
    }

    int window_ = 1;
    std::vector<std::deque<Entry>> entries_;
};

// Weighted delivery/forwarding rate in [-1, 1]; nullopt when either
// direction has no packets in the window.
inline std::optional<double> transmission_reliability(const BeaconCounts& c, double lambda) {
    const double rx = static_cast<double>(c.rx_ok + c.rx_fail);
    const double fwd = static_cast<double>(c.fwd_ok + c.fwd_fail);
    if (rx == 0.0 || fwd == 0.0) return std::nullopt;
    const double rd = (static_cast<double>(c.rx_ok) - static_cast<double>(c.rx_fail)) / rx;
    const double rf = (static_cast<double>(c.fwd_ok) - static_cast<double>(c.fwd_fail)) / fwd;
    return lambda * rd + (1.0 - lambda) * rf;
}

inline std::optional<double> transmission_reliability(const BeaconStats& stats, int s, double lambda) {
    return transmission_reliability(stats.counts(s), lambda);
}

// Efficiency of an RSU given a mean total latency and the user's tolerable latency.
inline double migration_efficiency(double mean_latency, double tolerable) {
    if (!(tolerable > 0.0)) throw Error("migration_efficiency: tolerable latency must be > 0");
    return std::max(0.0, 1.0 - mean_latency / tolerable);
}

// Windowed form; an empty window yields the neutral value 0.5.
inline double migration_efficiency(const BeaconStats& stats, int s, double tolerable) {
    const auto mean = stats.mean_latency(s);
    if (!mean) return 0.5;
    return migration_efficiency(*mean, tolerable);
}

}  // namespace vmig::trust
