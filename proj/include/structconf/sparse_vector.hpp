#pragma once

#include <cmath>
#include <map>
#include <span>

#include "structconf/common.hpp"

namespace structconf {

// Sparse feature vector in canonical form: no explicit zero entries are
// ever stored, so equality is plain entrywise comparison.
class SparseVector {
public:
    using map_type = std::map<int, double>;
    using const_iterator = map_type::const_iterator;

    SparseVector() = default;

    void set(int feature, double weight) {
        if (feature < 0) throw DimensionError("negative feature id");
        if (weight == 0.0)
            entries_.erase(feature);
        else
            entries_[feature] = weight;
    }

    void add(int feature, double delta) {
        if (feature < 0) throw DimensionError("negative feature id");
        auto [it, inserted] = entries_.try_emplace(feature, delta);
        if (!inserted) it->second += delta;
        if (it->second == 0.0) entries_.erase(it);
    }

    // this += scale * other
    void add_scaled(const SparseVector& other, double scale) {
        for (const auto& [f, w] : other.entries_) add(f, w * scale);
    }

    double get(int feature) const {
        auto it = entries_.find(feature);
        return it == entries_.end() ? 0.0 : it->second;
    }

    double dot(std::span<const double> dense) const {
        double s = 0.0;
        for (const auto& [f, w] : entries_) {
            if (f >= static_cast<int>(dense.size()))
                throw DimensionError("feature id " + std::to_string(f) +
                                     " out of range for dimension " +
                                     std::to_string(dense.size()));
            s += w * dense[f];
        }
        return s;
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& [f, w] : entries_) s += w * w;
        return s;
    }

    // dense += scale * this
    void add_to(std::span<double> dense, double scale = 1.0) const {
        for (const auto& [f, w] : entries_) {
            if (f >= static_cast<int>(dense.size()))
                throw DimensionError("feature id out of range");
            dense[f] += scale * w;
        }
    }

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const_iterator begin() const { return entries_.begin(); }
    const_iterator end() const { return entries_.end(); }

    friend bool operator==(const SparseVector& a, const SparseVector& b) {
        return a.entries_ == b.entries_;
    }

private:
    map_type entries_;
};

}  // namespace structconf
