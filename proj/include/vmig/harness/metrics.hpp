#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "vmig/error.hpp"
#include "vmig/harness/config_file.hpp"

namespace vmig::harness {

struct MetricRow {
    std::string run_id;
    std::string mode;
    std::uint64_t seed = 0;
    std::int64_t index = 0;
    std::string metric;
    double value = 0.0;
};

inline constexpr const char* kMetricsHeader = "run_id,mode,seed,index,metric,value";

inline std::string format_rows(const std::vector<MetricRow>& rows) {
    std::string out = kMetricsHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.run_id + ',' + r.mode + ',' + std::to_string(r.seed) + ',' + std::to_string(r.index) + ',' + r.metric +
               ',' + format_double(r.value) + '\n';
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

inline void write_metrics(const std::string& path, const std::vector<MetricRow>& rows) {
    write_text_file(path, format_rows(rows));
}

inline std::vector<MetricRow> parse_metrics(const std::string& text, const std::string& origin = "<metrics>") {
    std::vector<MetricRow> rows;
    const auto lines = split_list(text, '\n');
    if (lines.empty() || lines.front() != kMetricsHeader) throw IoError(origin + ": missing metrics header");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split_list(lines[i], ',');
        if (cells.size() != 6) throw IoError(origin + ": malformed row " + std::to_string(i + 1));
        MetricRow r;
        r.run_id = cells[0];
        r.mode = cells[1];
        r.seed = parse_u64("seed", cells[2]);
        r.index = parse_integer("index", cells[3]);
        r.metric = cells[4];
        r.value = parse_double("value", cells[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
    std::size_t count = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd out;
    out.count = xs.size();
    if (xs.empty()) return out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return out;
}

// Mean of `metric` over the trailing `window` indices of each (group, seed),
// then mean and std over seeds. Groups are labelled by `group_of(row)`.
template <class GroupOf>
std::map<std::string, std::map<std::string, MeanStd>> aggregate_final(const std::vector<MetricRow>& rows, int window,
                                                                      GroupOf group_of) {
    // group -> metric -> seed -> index -> value
    std::map<std::string, std::map<std::string, std::map<std::uint64_t, std::map<std::int64_t, double>>>> by;
    for (const auto& r : rows) by[group_of(r)][r.metric][r.seed][r.index] = r.value;
    std::map<std::string, std::map<std::string, MeanStd>> out;
    for (const auto& [group, metrics] : by)
        for (const auto& [metric, seeds] : metrics) {
            std::vector<double> per_seed;
            for (const auto& [seed, series] : seeds) {
                double sum = 0.0;
                int n = 0;
                for (auto it = series.rbegin(); it != series.rend() && n < window; ++it, ++n) sum += it->second;
                per_seed.push_back(sum / n);
            }
            out[group][metric] = mean_std(per_seed);
        }
    return out;
}

inline nlohmann::json to_json(const std::map<std::string, std::map<std::string, MeanStd>>& agg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [group, metrics] : agg)
        for (const auto& [metric, s] : metrics)
            j[group][metric] = {{"mean", s.mean}, {"std", s.std}, {"seeds", s.count}};
    return j;
}

}  // namespace vmig::harness
