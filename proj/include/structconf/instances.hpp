#pragma once

#include <span>
#include <vector>

#include "structconf/common.hpp"
#include "structconf/sparse_vector.hpp"

namespace structconf {

// A sentence with per-position node features and per-boundary transition
// features, factored over single labels and pairs of consecutive labels.
struct ChainInstance {
    int length = 0;
    int label_count = 0;
    // node[p * L + y], p in [0, n)
    std::vector<SparseVector> node;
    // trans[(q - 1) * L * L + prev * L + cur], q in [1, n)
    std::vector<SparseVector> trans;
    std::vector<int> gold;

    ChainInstance() = default;
    ChainInstance(int n, int L)
        : length(n),
          label_count(L),
          node(static_cast<std::size_t>(n) * L),
          trans(n > 1 ? static_cast<std::size_t>(n - 1) * L * L : 0),
          gold(n, 0) {}

    SparseVector& node_feat(int p, int y) {
        return node[static_cast<std::size_t>(p) * label_count + y];
    }
    const SparseVector& node_feat(int p, int y) const {
        return node[static_cast<std::size_t>(p) * label_count + y];
    }
    SparseVector& trans_feat(int q, int prev, int cur) {
        return trans[(static_cast<std::size_t>(q) - 1) * label_count * label_count +
                     static_cast<std::size_t>(prev) * label_count + cur];
    }
    const SparseVector& trans_feat(int q, int prev, int cur) const {
        return trans[(static_cast<std::size_t>(q) - 1) * label_count * label_count +
                     static_cast<std::size_t>(prev) * label_count + cur];
    }
};

// A sentence with one feature bundle per candidate head->dependent edge and
// a gold head assignment forming a spanning arborescence rooted at node 0.
struct TreeInstance {
    int length = 0;  // number of words, excluding the root
    // edge[h * n + (d - 1)], h in [0, n], d in [1, n], h != d
    std::vector<SparseVector> edge;
    std::vector<int> gold_heads;  // gold_heads[d - 1] in [0, n]

    TreeInstance() = default;
    explicit TreeInstance(int n)
        : length(n),
          edge(static_cast<std::size_t>(n + 1) * n),
          gold_heads(n, 0) {}

    SparseVector& edge_feat(int h, int d) {
        return edge[static_cast<std::size_t>(h) * length + (d - 1)];
    }
    const SparseVector& edge_feat(int h, int d) const {
        return edge[static_cast<std::size_t>(h) * length + (d - 1)];
    }
};

inline int hamming_loss(const std::vector<int>& y, const std::vector<int>& y_hat) {
    if (y.size() != y_hat.size()) throw ShapeError("labelings differ in length");
    int loss = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] != y_hat[i]) ++loss;
    return loss;
}

inline double score_labeling(const ChainInstance& x, const std::vector<int>& y,
                             std::span<const double> weights) {
    if (static_cast<int>(y.size()) != x.length) throw ShapeError("bad labeling length");
    double s = 0.0;
    for (int p = 0; p < x.length; ++p) s += x.node_feat(p, y[p]).dot(weights);
    for (int q = 1; q < x.length; ++q) s += x.trans_feat(q, y[q - 1], y[q]).dot(weights);
    return s;
}

inline double score_heads(const TreeInstance& x, const std::vector<int>& heads,
                          std::span<const double> weights) {
    if (static_cast<int>(heads.size()) != x.length) throw ShapeError("bad head count");
    double s = 0.0;
    for (int d = 1; d <= x.length; ++d) s += x.edge_feat(heads[d - 1], d).dot(weights);
    return s;
}

// Phi(x, y) - Phi(x, y_hat), assembled from the factored tables.
inline SparseVector feature_difference(const ChainInstance& x,
                                       const std::vector<int>& y,
                                       const std::vector<int>& y_hat) {
    if (y.size() != y_hat.size()) throw ShapeError("labelings differ in length");
    SparseVector g;
    for (int p = 0; p < x.length; ++p) {
        if (y[p] == y_hat[p]) continue;
        g.add_scaled(x.node_feat(p, y[p]), 1.0);
        g.add_scaled(x.node_feat(p, y_hat[p]), -1.0);
    }
    for (int q = 1; q < x.length; ++q) {
        if (y[q - 1] == y_hat[q - 1] && y[q] == y_hat[q]) continue;
        g.add_scaled(x.trans_feat(q, y[q - 1], y[q]), 1.0);
        g.add_scaled(x.trans_feat(q, y_hat[q - 1], y_hat[q]), -1.0);
    }
    return g;
}

inline SparseVector feature_difference(const TreeInstance& x,
                                       const std::vector<int>& heads,
                                       const std::vector<int>& heads_hat) {
    if (heads.size() != heads_hat.size()) throw ShapeError("head counts differ");
    SparseVector g;
    for (int d = 1; d <= x.length; ++d) {
        if (heads[d - 1] == heads_hat[d - 1]) continue;
        g.add_scaled(x.edge_feat(heads[d - 1], d), 1.0);
        g.add_scaled(x.edge_feat(heads_hat[d - 1], d), -1.0);
    }
    return g;
}

}  // namespace structconf
