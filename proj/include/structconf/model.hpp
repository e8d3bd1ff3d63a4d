#pragma once

#include <optional>
#include <span>
#include <vector>

#include "structconf/common.hpp"

namespace structconf {

// Linear model shared by all learners: dense mean weights, an optional
// per-feature variance diagonal, and a running average of the mean.
class LinearModel {
public:
    LinearModel() = default;

    explicit LinearModel(int dimension, bool with_variance = false,
                         double initial_variance = 1.0)
        : mu_(dimension, 0.0), avg_mu_(dimension, 0.0) {
        if (dimension < 0) throw DimensionError("negative dimension");
        if (with_variance) {
            if (initial_variance <= 0.0)
                throw ConfigError("initial variance must be positive");
            sigma_.emplace(dimension, initial_variance);
        }
    }

    int dimension() const { return static_cast<int>(mu_.size()); }

    std::vector<double>& mu() { return mu_; }
    const std::vector<double>& mu() const { return mu_; }

    bool has_variance() const { return sigma_.has_value(); }
    std::vector<double>& sigma_diag() { return *sigma_; }
    const std::vector<double>& sigma_diag() const { return *sigma_; }

    const std::vector<double>& avg_mu() const { return avg_mu_; }
    std::vector<double>& avg_mu() { return avg_mu_; }

    long update_count() const { return update_count_; }
    void set_update_count(long c) { update_count_ = c; }

    // Advance the running mean with the current mu snapshot; called once
    // per training step, including no-op steps.
    void accumulate_average() {
        ++update_count_;
        const double inv = 1.0 / static_cast<double>(update_count_);
        for (std::size_t f = 0; f < mu_.size(); ++f)
            avg_mu_[f] += (mu_[f] - avg_mu_[f]) * inv;
    }

    std::span<const double> prediction_weights(bool averaged) const {
        return averaged && update_count_ > 0 ? std::span<const double>(avg_mu_)
                                             : std::span<const double>(mu_);
    }

private:
    std::vector<double> mu_;
    std::optional<std::vector<double>> sigma_;
    std::vector<double> avg_mu_;
    long update_count_ = 0;
};

}  // namespace structconf
