#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "structconf/common.hpp"
#include "structconf/learners.hpp"

namespace structconf {

enum class ConfidenceMethod { delta, gamma, kb, wkb, kd_fix, kd_pc, kd_fix_plus_delta };

struct ConfidenceConfig {
    ConfidenceMethod method = ConfidenceMethod::delta;
    int K = 50;          // alternatives per instance
    double s = 0.1;      // sampling scale
    double c = 1.0;      // marginal temperature
    double a = 0.99;     // combo weight on the agreement term
    std::uint64_t seed = 0;

    void validate() const {
        if (K < 1) throw ConfigError("K must be positive");
        if (s <= 0.0) throw ConfigError("s must be positive");
        if (c <= 0.0) throw ConfigError("c must be positive");
        if (a <= 0.0 || a >= 1.0) throw ConfigError("a must lie in (0,1)");
    }
};

// Per-unit confidence: a word's label or a dependent's head, with its score.
// nu is in [0,1] for agreement and marginal methods and is the raw margin
// (possibly +inf) for the margin method.
struct ConfidenceAnnotation {
    int unit = 0;
    int predicted = 0;
    double nu = 0.0;
    std::optional<bool> correct;
};

struct AlternativeSet {
    std::vector<std::vector<int>> labelings;
    std::vector<double> weights;
};

inline constexpr double kInfiniteMargin = std::numeric_limits<double>::infinity();

// Margin confidence: score drop when the predicted value is forbidden at one
// unit. No feasible alternative yields the +inf sentinel.
inline std::vector<ConfidenceAnnotation> conf_delta(const ChainInstance& x,
                                                    std::span<const double> w) {
    const auto t = build_potentials(x, w);
    const auto [labels, best] = viterbi(t);
    std::vector<ConfidenceAnnotation> out(x.length);
    if (x.label_count < 2) {
        for (int p = 0; p < x.length; ++p)
            out[p] = {p, labels[p], kInfiniteMargin, std::nullopt};
        return out;
    }
    ConstrainedScorer scorer(t);
    for (int p = 0; p < x.length; ++p) {
        const double alt = scorer.constrained_best(p, ConstraintMode::forbid, labels[p]);
        const double delta = std::isfinite(alt) ? std::max(0.0, best - alt) : kInfiniteMargin;
        out[p] = {p, labels[p], delta, std::nullopt};
    }
    return out;
}

inline std::vector<ConfidenceAnnotation> conf_delta(const TreeInstance& x,
                                                    std::span<const double> w) {
    const auto ew = build_edge_weights(x, w);
    const auto best = cle_decode(ew);
    std::vector<ConfidenceAnnotation> out(x.length);
    for (int d = 1; d <= x.length; ++d) {
        double delta;
        try {
            const auto alt = constrained_cle(ew, d, HeadConstraint::forbid, best.heads[d - 1]);
            delta = std::max(0.0, best.score - alt.score);
        } catch (const NoTreeError&) {
            delta = kInfiniteMargin;
        }
        out[d - 1] = {d - 1, best.heads[d - 1], delta, std::nullopt};
    }
    return out;
}

// Marginal confidence of the predicted label at inverse temperature c.
inline std::vector<ConfidenceAnnotation> conf_gamma(const ChainInstance& x,
                                                    std::span<const double> w, double c) {
    if (c <= 0.0) throw ConfigError("c must be positive");
    const auto t = build_potentials(x, w);
    const auto labels = viterbi(t).first;
    const auto m = forward_backward_marginals(t, c);
    std::vector<ConfidenceAnnotation> out(x.length);
    for (int p = 0; p < x.length; ++p)
        out[p] = {p, labels[p], m.at(p, labels[p]), std::nullopt};
    return out;
}

inline std::vector<ConfidenceAnnotation> conf_gamma(const TreeInstance&,
                                                    std::span<const double>, double) {
    throw UnsupportedMethodError("marginal confidence is not defined for trees");
}

template <class Instance>
AlternativeSet build_alternatives_kbest(const Instance& x, std::span<const double> w,
                                        int K, bool weighted) {
    if (K < 1) throw ConfigError("K must be positive");
    AlternativeSet alts;
    for (const auto& [labeling, score] : kbest_decode(x, w, K)) {
        alts.labelings.push_back(labeling);
        alts.weights.push_back(weighted ? std::max(0.0, score) : 1.0);
    }
    return alts;
}

enum class SampleMode { fix, pc };

namespace detail {

inline std::vector<int> relevant_features(const ChainInstance& x) {
    std::set<int> ids;
    for (const auto& v : x.node)
        for (const auto& [f, val] : v) ids.insert(f);
    for (const auto& v : x.trans)
        for (const auto& [f, val] : v) ids.insert(f);
    return {ids.begin(), ids.end()};
}

inline std::vector<int> relevant_features(const TreeInstance& x) {
    std::set<int> ids;
    for (const auto& v : x.edge)
        for (const auto& [f, val] : v) ids.insert(f);
    return {ids.begin(), ids.end()};
}

}  // namespace detail

// K decodes under weight vectors drawn around w; fix perturbs every relevant
// feature with variance s, pc with variance s * sigma_f. Only features that
// appear in the instance are perturbed, since others cannot change the decode.
template <class Instance>
AlternativeSet build_alternatives_sampled(const Instance& x, std::span<const double> w,
                                          std::span<const double> sigma, int K, double s,
                                          SampleMode mode, std::uint64_t seed,
                                          std::uint64_t instance_id) {
    if (K < 1) throw ConfigError("K must be positive");
    if (s <= 0.0) throw ConfigError("s must be positive");
    if (mode == SampleMode::pc && sigma.size() != w.size())
        throw ConfigError("pc sampling requires a variance diagonal");

    const std::vector<int> feats = detail::relevant_features(x);
    std::vector<double> draw(w.begin(), w.end());
    AlternativeSet alts;
    for (int i = 0; i < K; ++i) {
        GaussianStream g(derive_seed(seed, instance_id, static_cast<std::uint64_t>(i)));
        for (int f : feats) {
            const double var = mode == SampleMode::fix ? s : s * sigma[f];
            draw[f] = w[f] + std::sqrt(var) * g.next();
        }
        alts.labelings.push_back(decode(x, draw));
        alts.weights.push_back(1.0);
        for (int f : feats) draw[f] = w[f];
    }
    return alts;
}

// Per-unit agreement with the prediction, weighted over the alternatives.
inline std::vector<double> agreement_confidence(const AlternativeSet& alts,
                                                const std::vector<int>& prediction) {
    double total = 0.0;
    for (double w : alts.weights) total += w;
    if (total <= 0.0) throw DegenerateWeightsError("all alternative weights are zero");
    std::vector<double> nu(prediction.size(), 0.0);
    for (std::size_t i = 0; i < alts.labelings.size(); ++i) {
        if (alts.weights[i] == 0.0) continue;
        const auto& z = alts.labelings[i];
        if (z.size() != prediction.size()) throw ShapeError("alternative length mismatch");
        for (std::size_t p = 0; p < prediction.size(); ++p)
            if (z[p] == prediction[p]) nu[p] += alts.weights[i];
    }
    for (double& v : nu) v /= total;
    return nu;
}

inline double sentence_confidence(const std::vector<ConfidenceAnnotation>& annotations) {
    if (annotations.empty()) throw ConfigError("no annotations");
    double m = annotations[0].nu;
    for (const auto& a : annotations) m = std::min(m, a.nu);
    return m;
}

namespace detail {

template <class Instance>
std::vector<ConfidenceAnnotation> agreement_annotations(const Instance& x,
                                                        std::span<const double> w,
                                                        const AlternativeSet& alts) {
    const auto prediction = decode(x, w);
    const auto nu = agreement_confidence(alts, prediction);
    std::vector<ConfidenceAnnotation> out(prediction.size());
    for (std::size_t p = 0; p < prediction.size(); ++p)
        out[p] = {static_cast<int>(p), prediction[p], nu[p], std::nullopt};
    return out;
}

// Map each margin to (rank+1)/(unique+1) in (0,1); equal margins share a
// rank, +inf lands on top.
inline std::vector<double> rank_normalize(const std::vector<double>& values) {
    std::vector<double> uniq = values;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), values[i]);
        out[i] = static_cast<double>(it - uniq.begin() + 1) /
                 static_cast<double>(uniq.size() + 1);
    }
    return out;
}

}  // namespace detail

// Score a whole evaluation batch with one method. The combo method mixes
// agreement from isotropic sampling with batch-rank-normalized margins, so
// normalization context is the batch itself.
template <class Instance>
std::vector<std::vector<ConfidenceAnnotation>> score_batch(
    const std::vector<Instance>& instances, const LinearModel& model,
    const ConfidenceConfig& cfg, bool averaged = true) {
    cfg.validate();
    const auto w = model.prediction_weights(averaged);
    std::vector<std::vector<ConfidenceAnnotation>> out;
    out.reserve(instances.size());

    for (std::size_t id = 0; id < instances.size(); ++id) {
        const auto& x = instances[id];
        switch (cfg.method) {
            case ConfidenceMethod::delta:
                out.push_back(conf_delta(x, w));
                break;
            case ConfidenceMethod::gamma:
                out.push_back(conf_gamma(x, w, cfg.c));
                break;
            case ConfidenceMethod::kb:
                out.push_back(detail::agreement_annotations(
                    x, w, build_alternatives_kbest(x, w, cfg.K, false)));
                break;
            case ConfidenceMethod::wkb:
                out.push_back(detail::agreement_annotations(
                    x, w, build_alternatives_kbest(x, w, cfg.K, true)));
                break;
            case ConfidenceMethod::kd_fix:
                out.push_back(detail::agreement_annotations(
                    x, w,
                    build_alternatives_sampled(x, w, {}, cfg.K, cfg.s, SampleMode::fix,
                                               cfg.seed, id)));
                break;
            case ConfidenceMethod::kd_pc: {
                if (!model.has_variance())
                    throw ConfigError("pc sampling requires a variance diagonal");
                out.push_back(detail::agreement_annotations(
                    x, w,
                    build_alternatives_sampled(x, w, model.sigma_diag(), cfg.K, cfg.s,
                                               SampleMode::pc, cfg.seed, id)));
                break;
            }
            case ConfidenceMethod::kd_fix_plus_delta:
                out.push_back(detail::agreement_annotations(
                    x, w,
                    build_alternatives_sampled(x, w, {}, cfg.K, cfg.s, SampleMode::fix,
                                               cfg.seed, id)));
                break;
        }
        const auto& gold = gold_of(x);
        for (auto& a : out.back()) a.correct = a.predicted == gold[a.unit];
    }

    if (cfg.method == ConfidenceMethod::kd_fix_plus_delta) {
        std::vector<double> margins;
        for (std::size_t id = 0; id < instances.size(); ++id)
            for (const auto& a : conf_delta(instances[id], w)) margins.push_back(a.nu);
        const auto normalized = detail::rank_normalize(margins);
        std::size_t k = 0;
        for (auto& annotations : out)
            for (auto& a : annotations) {
                a.nu = cfg.a * a.nu + (1.0 - cfg.a) * normalized[k];
                ++k;
            }
    }
    return out;
}

}  // namespace structconf
