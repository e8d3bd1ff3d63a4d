#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "structconf/common.hpp"
#include "structconf/instances.hpp"

namespace structconf {

// Dense edge scores over head -> dependent candidates; forbidden edges are
// marked with -inf and never enter a sum.
struct EdgeWeightMatrix {
    int n = 0;                // words, excluding root
    std::vector<double> w;    // [(n + 1) x n], w[h * n + (d - 1)]

    EdgeWeightMatrix() = default;
    explicit EdgeWeightMatrix(int n_)
        : n(n_), w(static_cast<std::size_t>(n_ + 1) * n_, 0.0) {}

    double& at(int h, int d) { return w[static_cast<std::size_t>(h) * n + (d - 1)]; }
    double at(int h, int d) const { return w[static_cast<std::size_t>(h) * n + (d - 1)]; }
};

struct Arborescence {
    std::vector<int> heads;  // heads[d - 1] in [0, n]
    double score = 0.0;

    friend bool operator==(const Arborescence& a, const Arborescence& b) {
        return a.heads == b.heads;
    }
};

inline EdgeWeightMatrix build_edge_weights(const TreeInstance& x,
                                           std::span<const double> weights) {
    EdgeWeightMatrix m(x.length);
    for (int h = 0; h <= x.length; ++h)
        for (int d = 1; d <= x.length; ++d)
            m.at(h, d) = (h == d) ? kNegInf : x.edge_feat(h, d).dot(weights);
    return m;
}

namespace detail {

// Recursive Chu-Liu-Edmonds over node set {0..m-1} with node 0 as root.
// score[u][v] may be -inf. Returns parent[] for nodes 1..m-1, or nullopt
// when no spanning arborescence exists. Ties prefer the lower head index.
inline std::optional<std::vector<int>> cle_recurse(
    const std::vector<std::vector<double>>& score, int m) {
    std::vector<int> parent(m, -1);
    for (int v = 1; v < m; ++v) {
        int best = -1;
        for (int u = 0; u < m; ++u) {
            if (u == v || !std::isfinite(score[u][v])) continue;
            if (best == -1 || score[u][v] > score[best][v]) best = u;
        }
        if (best == -1) return std::nullopt;
        parent[v] = best;
    }

    // find a cycle in the greedy parent graph
    std::vector<int> color(m, 0);  // 0 unseen, 1 on stack, 2 done
    color[0] = 2;
    std::vector<int> cycle;
    for (int start = 1; start < m && cycle.empty(); ++start) {
        if (color[start] != 0) continue;
        int v = start;
        std::vector<int> path;
        while (color[v] == 0) {
            color[v] = 1;
            path.push_back(v);
            v = parent[v];
        }
        if (color[v] == 1) {
            auto it = std::find(path.begin(), path.end(), v);
            cycle.assign(it, path.end());
        }
        for (int u : path) color[u] = 2;
    }
    if (cycle.empty()) return parent;

    std::vector<bool> in_cycle(m, false);
    for (int v : cycle) in_cycle[v] = true;

    // contract the cycle into a single node with id `cid`
    std::vector<int> to_new(m, -1);
    int mm = 0;
    for (int v = 0; v < m; ++v)
        if (!in_cycle[v]) to_new[v] = mm++;
    const int cid = mm++;

    std::vector<std::vector<double>> cscore(mm, std::vector<double>(mm, kNegInf));
    // exit_for[u'][cid]: cycle node whose in-edge is replaced when u' -> cid
    // is chosen; exit_for[cid][v']: cycle node heading v' when cid -> v' is chosen
    std::vector<std::vector<int>> exit_for(mm, std::vector<int>(mm, -1));
    for (int u = 0; u < m; ++u) {
        if (in_cycle[u]) continue;
        const int un = to_new[u];
        for (int v = 1; v < m; ++v) {
            if (u == v) continue;
            if (!std::isfinite(score[u][v])) continue;
            if (in_cycle[v]) {
                const double adj = score[u][v] - score[parent[v]][v];
                if (!std::isfinite(cscore[un][cid]) || adj > cscore[un][cid]) {
                    cscore[un][cid] = adj;
                    exit_for[un][cid] = v;  // reused as entry node record
                }
            } else {
                cscore[un][to_new[v]] = score[u][v];
            }
        }
    }
    for (int u : cycle)
        for (int v = 1; v < m; ++v) {
            if (in_cycle[v] || u == v) continue;
            if (!std::isfinite(score[u][v])) continue;
            const int vn = to_new[v];
            if (!std::isfinite(cscore[cid][vn]) || score[u][v] > cscore[cid][vn]) {
                cscore[cid][vn] = score[u][v];
                exit_for[cid][vn] = u;
            }
        }

    auto sub = cle_recurse(cscore, mm);
    if (!sub) return std::nullopt;

    std::vector<int> out(m, -1);
    // non-cycle nodes
    std::vector<int> from_new(mm, -1);
    for (int v = 0; v < m; ++v)
        if (!in_cycle[v]) from_new[to_new[v]] = v;
    for (int v = 1; v < m; ++v) {
        if (in_cycle[v]) continue;
        const int pn = (*sub)[to_new[v]];
        out[v] = (pn == cid) ? exit_for[cid][to_new[v]] : from_new[pn];
    }
    // cycle nodes: keep cycle parents except at the entry point
    for (int v : cycle) out[v] = parent[v];
    const int pn = (*sub)[cid];
    const int entry = exit_for[pn][cid];
    out[entry] = from_new[pn];
    return out;
}

inline std::optional<Arborescence> cle_unconstrained(const EdgeWeightMatrix& w) {
    const int m = w.n + 1;
    std::vector<std::vector<double>> score(m, std::vector<double>(m, kNegInf));
    for (int h = 0; h < m; ++h)
        for (int d = 1; d < m; ++d)
            if (h != d) score[h][d] = w.at(h, d);
    auto parent = cle_recurse(score, m);
    if (!parent) return std::nullopt;
    Arborescence a;
    a.heads.resize(w.n);
    a.score = 0.0;
    for (int d = 1; d < m; ++d) {
        a.heads[d - 1] = (*parent)[d];
        a.score += w.at((*parent)[d], d);
    }
    return a;
}

}  // namespace detail

// Maximum spanning arborescence with exactly one child of the root.
inline Arborescence cle_decode(const EdgeWeightMatrix& w) {
    if (w.n < 1) throw ShapeError("empty sentence");
    auto free_best = detail::cle_unconstrained(w);
    if (free_best) {
        int root_children = 0;
        for (int d = 1; d <= w.n; ++d)
            if (free_best->heads[d - 1] == 0) ++root_children;
        if (root_children == 1) return *free_best;
    }
    // try each candidate root child in turn
    std::optional<Arborescence> best;
    for (int r = 1; r <= w.n; ++r) {
        if (!std::isfinite(w.at(0, r))) continue;
        EdgeWeightMatrix masked = w;
        for (int d = 1; d <= w.n; ++d)
            if (d != r) masked.at(0, d) = kNegInf;
        for (int h = 1; h <= w.n; ++h) masked.at(h, r) = kNegInf;
        auto cand = detail::cle_unconstrained(masked);
        if (cand && (!best || cand->score > best->score)) best = *cand;
    }
    if (!best) throw NoTreeError("no feasible arborescence");
    return *best;
}

enum class HeadConstraint { forbid, force };

inline Arborescence constrained_cle(const EdgeWeightMatrix& w, int d,
                                    HeadConstraint mode, int h0) {
    if (d < 1 || d > w.n) throw ShapeError("dependent out of range");
    if (h0 < 0 || h0 > w.n) throw ShapeError("head out of range");
    EdgeWeightMatrix masked = w;
    if (mode == HeadConstraint::forbid) {
        masked.at(h0, d) = kNegInf;
    } else {
        for (int h = 0; h <= w.n; ++h)
            if (h != h0) masked.at(h, d) = kNegInf;
    }
    return cle_decode(masked);
}

// K best arborescences by branch-and-exclude partitioning of the solution
// space; contract matches the dedicated k-best MST algorithms, complexity is
// worse but fine at the scales handled here.
inline std::vector<Arborescence> kbest_arborescences(const EdgeWeightMatrix& w, int K) {
    if (K < 1) throw ConfigError("K must be positive");
    struct Node {
        Arborescence solution;
        EdgeWeightMatrix constrained;
        long order;
    };
    const auto worse = [](const Node& a, const Node& b) {
        if (a.solution.score != b.solution.score) return a.solution.score < b.solution.score;
        return a.order > b.order;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(worse)> queue(worse);
    long counter = 0;
    try {
        queue.push({cle_decode(w), w, counter++});
    } catch (const NoTreeError&) {
        return {};
    }
    std::vector<Arborescence> out;
    while (!queue.empty() && static_cast<int>(out.size()) < K) {
        Node top = queue.top();
        queue.pop();
        out.push_back(top.solution);
        // split the remaining space around the incumbent
        EdgeWeightMatrix base = top.constrained;
        for (int d = 1; d <= w.n; ++d) {
            EdgeWeightMatrix branch = base;
            const int h = top.solution.heads[d - 1];
            branch.at(h, d) = kNegInf;
            try {
                queue.push({cle_decode(branch), branch, counter++});
            } catch (const NoTreeError&) {
            }
            // force this edge in all later branches
            for (int hh = 0; hh <= w.n; ++hh)
                if (hh != h) base.at(hh, d) = kNegInf;
        }
    }
    return out;
}

}  // namespace structconf
