#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "structconf/common.hpp"
#include "structconf/instances.hpp"

namespace structconf {

// Node and transition scores of a chain instance under a fixed weight vector.
struct PotentialTable {
    int n = 0;
    int L = 0;
    std::vector<double> node;   // [p * L + y]
    std::vector<double> trans;  // [(q - 1) * L * L + prev * L + cur]

    PotentialTable() = default;
    PotentialTable(int n_, int L_)
        : n(n_),
          L(L_),
          node(static_cast<std::size_t>(n_) * L_, 0.0),
          trans(n_ > 1 ? static_cast<std::size_t>(n_ - 1) * L_ * L_ : 0, 0.0) {}

    double& node_at(int p, int y) { return node[static_cast<std::size_t>(p) * L + y]; }
    double node_at(int p, int y) const { return node[static_cast<std::size_t>(p) * L + y]; }
    double& trans_at(int q, int prev, int cur) {
        return trans[(static_cast<std::size_t>(q) - 1) * L * L +
                     static_cast<std::size_t>(prev) * L + cur];
    }
    double trans_at(int q, int prev, int cur) const {
        return trans[(static_cast<std::size_t>(q) - 1) * L * L +
                     static_cast<std::size_t>(prev) * L + cur];
    }

    double score(const std::vector<int>& y) const {
        double s = 0.0;
        for (int p = 0; p < n; ++p) s += node_at(p, y[p]);
        for (int q = 1; q < n; ++q) s += trans_at(q, y[q - 1], y[q]);
        return s;
    }

    PotentialTable& operator+=(const PotentialTable& other) {
        for (std::size_t i = 0; i < node.size(); ++i) node[i] += other.node[i];
        for (std::size_t i = 0; i < trans.size(); ++i) trans[i] += other.trans[i];
        return *this;
    }
};

inline PotentialTable build_potentials(const ChainInstance& x,
                                       std::span<const double> weights) {
    PotentialTable t(x.length, x.label_count);
    for (int p = 0; p < x.length; ++p)
        for (int y = 0; y < x.label_count; ++y)
            t.node_at(p, y) = x.node_feat(p, y).dot(weights);
    for (int q = 1; q < x.length; ++q)
        for (int a = 0; a < x.label_count; ++a)
            for (int b = 0; b < x.label_count; ++b)
                t.trans_at(q, a, b) = x.trans_feat(q, a, b).dot(weights);
    return t;
}

// Per-position probability rows of the Gibbs distribution over labelings.
struct MarginalTable {
    int n = 0;
    int L = 0;
    std::vector<double> prob;  // [p * L + y]

    double at(int p, int y) const { return prob[static_cast<std::size_t>(p) * L + y]; }
};

namespace detail {

// Suffix-max table: best[p][y] = max total score of positions p..n-1 given
// label y at p, including node(p, y). Ties resolved toward the lowest next
// label so the recovered argmax is the lexicographically smallest maximizer.
inline std::vector<double> suffix_max(const PotentialTable& t,
                                      std::vector<int>* choice = nullptr) {
    const int n = t.n, L = t.L;
    std::vector<double> best(static_cast<std::size_t>(n) * L);
    if (choice) choice->assign(static_cast<std::size_t>(n) * L, -1);
    for (int y = 0; y < L; ++y) best[(n - 1) * static_cast<std::size_t>(L) + y] = t.node_at(n - 1, y);
    for (int p = n - 2; p >= 0; --p) {
        for (int y = 0; y < L; ++y) {
            double b = kNegInf;
            int arg = -1;
            for (int z = 0; z < L; ++z) {
                const double cand = t.trans_at(p + 1, y, z) + best[(p + 1) * static_cast<std::size_t>(L) + z];
                if (cand > b) {
                    b = cand;
                    arg = z;
                }
            }
            best[p * static_cast<std::size_t>(L) + y] = t.node_at(p, y) + b;
            if (choice) (*choice)[p * static_cast<std::size_t>(L) + y] = arg;
        }
    }
    return best;
}

// Prefix-max table: best[p][y] = max score of positions 0..p given label y
// at p, including node(p, y).
inline std::vector<double> prefix_max(const PotentialTable& t) {
    const int n = t.n, L = t.L;
    std::vector<double> best(static_cast<std::size_t>(n) * L);
    for (int y = 0; y < L; ++y) best[y] = t.node_at(0, y);
    for (int p = 1; p < n; ++p)
        for (int y = 0; y < L; ++y) {
            double b = kNegInf;
            for (int z = 0; z < L; ++z)
                b = std::max(b, best[(p - 1) * static_cast<std::size_t>(L) + z] + t.trans_at(p, z, y));
            best[p * static_cast<std::size_t>(L) + y] = b + t.node_at(p, y);
        }
    return best;
}

inline double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

inline std::pair<std::vector<int>, double> viterbi(const PotentialTable& t) {
    if (t.n < 1 || t.L < 1) throw ShapeError("empty potential table");
    std::vector<int> choice;
    const auto best = detail::suffix_max(t, &choice);
    int y0 = 0;
    for (int y = 1; y < t.L; ++y)
        if (best[y] > best[y0]) y0 = y;
    std::vector<int> labels(t.n);
    labels[0] = y0;
    for (int p = 1; p < t.n; ++p)
        labels[p] = choice[(p - 1) * static_cast<std::size_t>(t.L) + labels[p - 1]];
    return {std::move(labels), best[y0]};
}

// K highest-scoring distinct labelings, non-increasing score, ties broken by
// lexicographic labeling order. Per-state k-list Viterbi.
inline std::vector<std::pair<std::vector<int>, double>> kbest_viterbi(
    const PotentialTable& t, int K) {
    if (t.n < 1 || t.L < 1) throw ShapeError("empty potential table");
    if (K < 1) throw ConfigError("K must be positive");
    struct Entry {
        double score;
        std::vector<int> prefix;
    };
    const auto better = [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.prefix < b.prefix;
    };
    // lists[y]: top candidates for prefixes ending in label y
    std::vector<std::vector<Entry>> lists(t.L);
    for (int y = 0; y < t.L; ++y) lists[y].push_back({t.node_at(0, y), {y}});
    for (int p = 1; p < t.n; ++p) {
        std::vector<std::vector<Entry>> next(t.L);
        for (int y = 0; y < t.L; ++y) {
            auto& merged = next[y];
            for (int z = 0; z < t.L; ++z)
                for (const auto& e : lists[z]) {
                    Entry ext{e.score + t.trans_at(p, z, y) + t.node_at(p, y), e.prefix};
                    ext.prefix.push_back(y);
                    merged.push_back(std::move(ext));
                }
            std::sort(merged.begin(), merged.end(), better);
            if (static_cast<int>(merged.size()) > K) merged.resize(K);
        }
        lists = std::move(next);
    }
    std::vector<Entry> all;
    for (auto& l : lists)
        for (auto& e : l) all.push_back(std::move(e));
    std::sort(all.begin(), all.end(), better);
    if (static_cast<int>(all.size()) > K) all.resize(K);
    std::vector<std::pair<std::vector<int>, double>> out;
    out.reserve(all.size());
    for (auto& e : all) out.emplace_back(std::move(e.prefix), e.score);
    return out;
}

// Forward-backward in log-space under inverse temperature c.
inline MarginalTable forward_backward_marginals(const PotentialTable& t, double c) {
    if (c <= 0.0) throw ConfigError("temperature scale must be positive");
    const int n = t.n, L = t.L;
    std::vector<double> alpha(static_cast<std::size_t>(n) * L);
    std::vector<double> beta(static_cast<std::size_t>(n) * L, 0.0);
    std::vector<double> work(L);
    for (int y = 0; y < L; ++y) alpha[y] = c * t.node_at(0, y);
    for (int p = 1; p < n; ++p)
        for (int y = 0; y < L; ++y) {
            for (int z = 0; z < L; ++z)
                work[z] = alpha[(p - 1) * static_cast<std::size_t>(L) + z] + c * t.trans_at(p, z, y);
            alpha[p * static_cast<std::size_t>(L) + y] = detail::log_sum_exp(work) + c * t.node_at(p, y);
        }
    for (int p = n - 2; p >= 0; --p)
        for (int y = 0; y < L; ++y) {
            for (int z = 0; z < L; ++z)
                work[z] = c * t.trans_at(p + 1, y, z) + c * t.node_at(p + 1, z) +
                          beta[(p + 1) * static_cast<std::size_t>(L) + z];
            beta[p * static_cast<std::size_t>(L) + y] = detail::log_sum_exp(work);
        }
    for (int y = 0; y < L; ++y) work[y] = alpha[(n - 1) * static_cast<std::size_t>(L) + y];
    const double log_z = detail::log_sum_exp(work);
    MarginalTable m;
    m.n = n;
    m.L = L;
    m.prob.resize(static_cast<std::size_t>(n) * L);
    for (int p = 0; p < n; ++p)
        for (int y = 0; y < L; ++y)
            m.prob[p * static_cast<std::size_t>(L) + y] =
                std::exp(alpha[p * static_cast<std::size_t>(L) + y] +
                         beta[p * static_cast<std::size_t>(L) + y] - log_z);
    return m;
}

enum class ConstraintMode { forbid, force };

// Best total score among labelings constrained at one position, via the
// max-product prefix and suffix tables (one O(n L^2) pass each, shared by
// all positions through constrained_scores below).
struct ConstrainedScorer {
    explicit ConstrainedScorer(const PotentialTable& t)
        : t_(&t), prefix_(detail::prefix_max(t)), suffix_(detail::suffix_max(t)) {}

    double best_with_label(int p, int y) const {
        const int L = t_->L;
        // prefix and suffix both include node(p, y); subtract one copy
        return prefix_[p * static_cast<std::size_t>(L) + y] +
               suffix_[p * static_cast<std::size_t>(L) + y] - t_->node_at(p, y);
    }

    double constrained_best(int p, ConstraintMode mode, int y0) const {
        if (p < 0 || p >= t_->n) throw ShapeError("position out of range");
        if (y0 < 0 || y0 >= t_->L) throw ShapeError("label out of range");
        if (mode == ConstraintMode::force) return best_with_label(p, y0);
        if (t_->L < 2) throw InfeasibleError("cannot forbid the only label");
        double b = kNegInf;
        for (int y = 0; y < t_->L; ++y)
            if (y != y0) b = std::max(b, best_with_label(p, y));
        return b;
    }

private:
    const PotentialTable* t_;
    std::vector<double> prefix_;
    std::vector<double> suffix_;
};

inline double constrained_best_score(const PotentialTable& t, int p,
                                     ConstraintMode mode, int y0) {
    return ConstrainedScorer(t).constrained_best(p, mode, y0);
}

}  // namespace structconf
