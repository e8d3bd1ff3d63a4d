#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "structconf/common.hpp"

namespace structconf {

// One scored unit in an error-detection ranking; tie_key makes the sort over
// equal confidences deterministic (stable input order by construction).
struct RankedUnit {
    double nu = 0.0;
    bool is_error = false;
    std::int64_t tie_key = 0;
};

inline std::vector<RankedUnit> sorted_by_confidence(std::vector<RankedUnit> units) {
    std::sort(units.begin(), units.end(), [](const RankedUnit& a, const RankedUnit& b) {
        if (a.nu != b.nu) return a.nu < b.nu;
        return a.tie_key < b.tie_key;
    });
    return units;
}

// Mean precision at the rank of every true error, least confident first.
inline double average_precision(const std::vector<RankedUnit>& units) {
    const auto ranked = sorted_by_confidence(units);
    long errors_seen = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < ranked.size(); ++r)
        if (ranked[r].is_error) {
            ++errors_seen;
            sum += static_cast<double>(errors_seen) / static_cast<double>(r + 1);
        }
    if (errors_seen == 0) throw UndefinedMetricError("no errors to rank");
    return sum / static_cast<double>(errors_seen);
}

// Precision after retrieving each decile of the total errors.
inline std::vector<std::pair<double, double>> precision_recall_curve(
    const std::vector<RankedUnit>& units) {
    const auto ranked = sorted_by_confidence(units);
    long total_errors = 0;
    for (const auto& u : ranked)
        if (u.is_error) ++total_errors;
    if (total_errors == 0) throw UndefinedMetricError("no errors to rank");

    std::vector<std::pair<double, double>> curve;
    long errors_seen = 0;
    int next_decile = 1;
    for (std::size_t r = 0; r < ranked.size() && next_decile <= 10; ++r) {
        if (!ranked[r].is_error) continue;
        ++errors_seen;
        while (next_decile <= 10 &&
               errors_seen * 10 >= total_errors * next_decile) {
            curve.emplace_back(next_decile / 10.0,
                               static_cast<double>(errors_seen) /
                                   static_cast<double>(r + 1));
            ++next_decile;
        }
    }
    return curve;
}

struct CalibrationBin {
    int index = 0;     // 1..20
    double center = 0.0;
    long count = 0;
    long correct = 0;

    double accuracy() const {
        return static_cast<double>(correct) / static_cast<double>(count);
    }
};

// 20 uniform bins over [0,1]; bin j covers [(j-1)/20, j/20), with the top
// bin closed so nu = 1.0 lands in bin 20.
inline std::vector<CalibrationBin> calibration_bins(
    const std::vector<std::pair<double, bool>>& scored) {
    std::vector<CalibrationBin> bins(20);
    for (int j = 1; j <= 20; ++j)
        bins[j - 1] = {j, j / 20.0 - 1.0 / 40.0, 0, 0};
    for (const auto& [nu, correct] : scored) {
        if (!(nu >= 0.0 && nu <= 1.0))
            throw UndefinedMetricError("confidence outside [0,1]");
        const int j = std::min(19, static_cast<int>(nu * 20.0));
        ++bins[j].count;
        if (correct) ++bins[j].correct;
    }
    return bins;
}

inline double calibration_rmse(const std::vector<CalibrationBin>& bins) {
    long total = 0;
    double sum = 0.0;
    for (const auto& b : bins) {
        if (b.count == 0) continue;
        total += b.count;
        const double d = b.center - b.accuracy();
        sum += static_cast<double>(b.count) * d * d;
    }
    if (total == 0) throw UndefinedMetricError("all calibration bins empty");
    return std::sqrt(sum / static_cast<double>(total));
}

// Sample size making every empirical per-unit accuracy estimate over N units
// epsilon-accurate with probability 1 - delta, by Chernoff plus union bound.
inline long chernoff_k(double epsilon, double delta, long N) {
    if (epsilon <= 0.0 || epsilon >= 1.0) throw ConfigError("epsilon must be in (0,1)");
    if (delta <= 0.0 || delta >= 1.0) throw ConfigError("delta must be in (0,1)");
    if (N < 1) throw ConfigError("N must be positive");
    return static_cast<long>(
        std::ceil(std::log(2.0 * static_cast<double>(N) / delta) /
                  (2.0 * epsilon * epsilon)));
}

// Accuracy-dependent half-width of the Bernstein interval after K draws.
inline double bernstein_epsilon(double gamma, long K, long N, double delta) {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0,1]");
    if (K < 1) throw ConfigError("K must be positive");
    if (delta <= 0.0 || delta >= 1.0) throw ConfigError("delta must be in (0,1)");
    if (N < 1) throw ConfigError("N must be positive");
    const double L = std::log(2.0 * static_cast<double>(N) / delta);
    const double t = 2.0 * L / 3.0;
    return (t + std::sqrt(t * t + 8.0 * static_cast<double>(K) * L * gamma *
                                      (1.0 - gamma))) /
           (2.0 * static_cast<double>(K));
}

}  // namespace structconf
