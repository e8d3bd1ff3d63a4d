#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "structconf/confidence.hpp"
#include "structconf/evaluation.hpp"
#include "structconf/learners.hpp"

namespace structconf {

// BIO tag inventory: label 0 is the outside tag, entity type k occupies
// labels 2k+1 (begin) and 2k+2 (inside).
struct TagSet {
    std::vector<std::string> types;

    int label_count() const { return 1 + 2 * static_cast<int>(types.size()); }
    int outside() const { return 0; }
    bool is_outside(int y) const { return y == 0; }
    bool is_begin(int y) const { return y > 0 && y % 2 == 1; }
    bool is_inside(int y) const { return y > 0 && y % 2 == 0; }
    int type_of(int y) const { return (y - 1) / 2; }
    int begin_label(int type) const { return 2 * type + 1; }
    int inside_label(int type) const { return 2 * type + 2; }

    std::string tag_name(int y) const {
        if (y == 0) return "O";
        return (is_begin(y) ? "B-" : "I-") + types[type_of(y)];
    }

    // inverse of tag_name; unknown tags are a parse error
    int label_of(const std::string& tag) const {
        if (tag == "O") return 0;
        if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-')
            throw ParseError("bad BIO tag: " + tag);
        const std::string type = tag.substr(2);
        for (std::size_t k = 0; k < types.size(); ++k)
            if (types[k] == type)
                return tag[0] == 'B' ? begin_label(static_cast<int>(k))
                                     : inside_label(static_cast<int>(k));
        throw ParseError("unknown entity type: " + tag);
    }
};

struct EntitySpan {
    int start = 0;  // inclusive
    int end = 0;    // exclusive
    int type = 0;

    bool operator==(const EntitySpan&) const = default;
};

// Decode phrases from a BIO sequence; a stray inside tag opens a new phrase
// as if it were a begin tag.
inline std::vector<EntitySpan> extract_spans(const TagSet& tags,
                                             const std::vector<int>& labels) {
    std::vector<EntitySpan> spans;
    int p = 0;
    const int n = static_cast<int>(labels.size());
    while (p < n) {
        if (tags.is_outside(labels[p])) {
            ++p;
            continue;
        }
        const int type = tags.type_of(labels[p]);
        const int start = p;
        ++p;
        while (p < n && tags.is_inside(labels[p]) && tags.type_of(labels[p]) == type)
            ++p;
        spans.push_back({start, p, type});
    }
    return spans;
}

struct PRF {
    double precision = 1.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Exact-phrase precision/recall/F1. With no predicted phrases precision is
// 1.0 by convention so threshold sweeps stay defined at both ends.
inline PRF entity_prf(const TagSet& tags, const std::vector<int>& gold,
                      const std::vector<int>& predicted,
                      bool merge_categories = false) {
    if (gold.size() != predicted.size()) throw ShapeError("length mismatch");
    auto gold_spans = extract_spans(tags, gold);
    auto pred_spans = extract_spans(tags, predicted);
    if (merge_categories) {
        for (auto& s : gold_spans) s.type = 0;
        for (auto& s : pred_spans) s.type = 0;
    }
    long hits = 0;
    for (const auto& s : pred_spans)
        if (std::find(gold_spans.begin(), gold_spans.end(), s) != gold_spans.end())
            ++hits;
    PRF out;
    out.precision = pred_spans.empty()
                        ? 1.0
                        : static_cast<double>(hits) / pred_spans.size();
    out.recall = gold_spans.empty() ? 0.0
                                    : static_cast<double>(hits) / gold_spans.size();
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

// Corpus-level PRF pooling phrase counts over sentences.
inline PRF entity_prf_corpus(const TagSet& tags,
                             const std::vector<std::vector<int>>& gold,
                             const std::vector<std::vector<int>>& predicted,
                             bool merge_categories = false) {
    if (gold.size() != predicted.size()) throw ShapeError("sentence count mismatch");
    long hits = 0, pred_total = 0, gold_total = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        auto gold_spans = extract_spans(tags, gold[i]);
        auto pred_spans = extract_spans(tags, predicted[i]);
        if (merge_categories) {
            for (auto& s : gold_spans) s.type = 0;
            for (auto& s : pred_spans) s.type = 0;
        }
        for (const auto& s : pred_spans)
            if (std::find(gold_spans.begin(), gold_spans.end(), s) != gold_spans.end())
                ++hits;
        pred_total += static_cast<long>(pred_spans.size());
        gold_total += static_cast<long>(gold_spans.size());
    }
    PRF out;
    out.precision = pred_total == 0 ? 1.0 : static_cast<double>(hits) / pred_total;
    out.recall = gold_total == 0 ? 0.0 : static_cast<double>(hits) / gold_total;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

// Trade recall for precision: drop entity tags whose confidence falls below t.
inline std::vector<int> apply_precision_tradeoff(
    const TagSet& tags, const std::vector<ConfidenceAnnotation>& annotations,
    double t) {
    if (t < 0.0 || t > 1.0) throw ConfigError("t must be in [0,1]");
    std::vector<int> labels(annotations.size());
    for (std::size_t p = 0; p < annotations.size(); ++p) {
        labels[p] = annotations[p].predicted;
        if (!std::isfinite(annotations[p].nu) ||
            !(annotations[p].nu >= 0.0 && annotations[p].nu <= 1.0))
            throw UnsupportedMethodError("tradeoff requires an absolute confidence");
        if (!tags.is_outside(labels[p]) && annotations[p].nu < t)
            labels[p] = tags.outside();
    }
    return labels;
}

// Trade precision for recall: outside tags held with confidence below t are
// replaced by the strongest entity label at that position, taken from the
// force-label constrained scores.
inline std::vector<int> apply_recall_tradeoff(
    const TagSet& tags, const ChainInstance& x, std::span<const double> w,
    const std::vector<ConfidenceAnnotation>& annotations, double t) {
    if (t < 0.0 || t > 1.0) throw ConfigError("t must be in [0,1]");
    const auto table = build_potentials(x, w);
    ConstrainedScorer scorer(table);
    std::vector<int> labels(annotations.size());
    for (std::size_t p = 0; p < annotations.size(); ++p) {
        labels[p] = annotations[p].predicted;
        if (!std::isfinite(annotations[p].nu) ||
            !(annotations[p].nu >= 0.0 && annotations[p].nu <= 1.0))
            throw UnsupportedMethodError("tradeoff requires an absolute confidence");
        if (!tags.is_outside(labels[p]) || annotations[p].nu >= t) continue;
        double best = kNegInf;
        int best_label = labels[p];
        for (int y = 1; y < x.label_count; ++y) {
            const double s =
                scorer.constrained_best(static_cast<int>(p), ConstraintMode::force, y);
            if (s > best) {
                best = s;
                best_label = y;
            }
        }
        labels[p] = best_label;
    }
    return labels;
}

struct ActiveLearnConfig {
    int initial_labeled = 50;
    int candidate_sample = 1000;
    int batch = 10;
    int eval_every_sentences = 100;
    int stop_at = 5000;
    bool random_selection = false;  // uniform baseline, scorer unused
    ConfidenceConfig scorer;
    TrainConfig trainer;
    std::uint64_t seed = 0;
};

struct CurvePoint {
    int sentences_labeled = 0;
    long words_labeled = 0;
    double metric = 0.0;
};

struct ActiveLearnResult {
    std::vector<CurvePoint> curve;
    bool pool_exhausted = false;
};

namespace detail {

inline std::uint64_t bounded_rand(std::uint64_t& state, std::uint64_t n) {
    state = mix64(state);
    return state % n;
}

// Deterministic partial Fisher-Yates: the first k slots of indices become a
// uniform sample without replacement.
inline void sample_prefix(std::vector<int>& indices, int k, std::uint64_t& state) {
    const int n = static_cast<int>(indices.size());
    for (int i = 0; i < k && i < n - 1; ++i) {
        const int j = i + static_cast<int>(bounded_rand(state, n - i));
        std::swap(indices[i], indices[j]);
    }
}

}  // namespace detail

// Pool-based selection loop: repeatedly train, score a random candidate
// sample by minimal per-unit confidence, and annotate the least confident
// sentences. metric(model) is recorded along the way.
template <class Instance>
ActiveLearnResult active_learning_run(
    const std::vector<Instance>& pool, int dimension, const ActiveLearnConfig& cfg,
    const std::function<double(const LinearModel&)>& metric) {
    if (cfg.initial_labeled < 1 || cfg.batch < 1 || cfg.candidate_sample < cfg.batch)
        throw ConfigError("bad active learning parameters");
    if (pool.empty()) throw ConfigError("empty pool");

    std::uint64_t state = mix64(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    std::vector<int> unlabeled(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) unlabeled[i] = static_cast<int>(i);

    ActiveLearnResult result;
    std::vector<Instance> labeled;
    long words = 0;
    const auto take = [&](int slot) {
        const int idx = unlabeled[slot];
        labeled.push_back(pool[idx]);
        words += pool[idx].length;
        unlabeled.erase(unlabeled.begin() + slot);
    };

    const int seed_count = std::min<int>(cfg.initial_labeled,
                                         static_cast<int>(unlabeled.size()));
    detail::sample_prefix(unlabeled, seed_count, state);
    std::vector<int> initial(unlabeled.begin(), unlabeled.begin() + seed_count);
    std::sort(initial.begin(), initial.end());
    for (int idx : initial) {
        labeled.push_back(pool[idx]);
        words += pool[idx].length;
    }
    unlabeled.erase(unlabeled.begin(), unlabeled.begin() + seed_count);
    std::sort(unlabeled.begin(), unlabeled.end());

    int next_eval = 0;
    while (true) {
        auto model = train(labeled, dimension, cfg.trainer);
        const int labeled_count = static_cast<int>(labeled.size());
        const bool done = labeled_count >= cfg.stop_at || unlabeled.empty();
        if (labeled_count >= next_eval || done) {
            result.curve.push_back({labeled_count, words, metric(model)});
            while (next_eval <= labeled_count) next_eval += cfg.eval_every_sentences;
        }
        if (labeled_count >= cfg.stop_at) break;
        if (unlabeled.empty()) {
            result.pool_exhausted = true;
            break;
        }

        const int sample_n =
            std::min<int>(cfg.candidate_sample, static_cast<int>(unlabeled.size()));
        detail::sample_prefix(unlabeled, sample_n, state);
        if (cfg.random_selection) {
            // the sampled prefix is already uniform; take its head as-is
            const int take_n = std::min<int>(cfg.batch, sample_n);
            for (int slot = take_n - 1; slot >= 0; --slot) take(slot);
            std::sort(unlabeled.begin(), unlabeled.end());
            continue;
        }
        std::vector<Instance> candidates;
        candidates.reserve(sample_n);
        for (int i = 0; i < sample_n; ++i) candidates.push_back(pool[unlabeled[i]]);
        const auto scored = score_batch(candidates, model, cfg.scorer);

        struct Ranked {
            double conf;
            int length;
            int pool_index;
            int slot;
        };
        std::vector<Ranked> ranked;
        for (int i = 0; i < sample_n; ++i)
            ranked.push_back({sentence_confidence(scored[i]), candidates[i].length,
                              unlabeled[i], i});
        std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.conf != b.conf) return a.conf < b.conf;
            if (a.length != b.length) return a.length < b.length;
            return a.pool_index < b.pool_index;
        });
        const int take_n = std::min<int>(cfg.batch, sample_n);
        std::vector<int> slots;
        for (int i = 0; i < take_n; ++i) slots.push_back(ranked[i].slot);
        std::sort(slots.rbegin(), slots.rend());  // erase from the back
        for (int slot : slots) take(slot);
        std::sort(unlabeled.begin(), unlabeled.end());
    }
    return result;
}

// Flatten batch annotations into the evaluation ranking, preserving input
// order as the tie key.
inline std::vector<RankedUnit> to_ranked_units(
    const std::vector<std::vector<ConfidenceAnnotation>>& scored) {
    std::vector<RankedUnit> units;
    std::int64_t key = 0;
    for (const auto& sent : scored)
        for (const auto& a : sent) {
            if (!a.correct.has_value())
                throw UndefinedMetricError("ranking requires gold correctness");
            units.push_back({a.nu, !*a.correct, key++});
        }
    return units;
}

struct TuneGrids {
    std::vector<int> K = {10, 20, 30, 40, 50, 60, 70, 80};
    std::vector<double> s;  // filled by default_grids
    std::vector<double> c;
    std::vector<double> a = {0.99};

    static TuneGrids defaults() {
        TuneGrids g;
        for (int i = 0; i < 20; ++i)
            g.s.push_back(0.01 + i * (1.0 - 0.01) / 19.0);
        for (int i = 0; i < 30; ++i)
            g.c.push_back(0.01 + i * (3.0 - 0.01) / 29.0);
        return g;
    }
};

// Exhaustive grid search over the parameters the method actually uses,
// maximizing average precision on the dev set. Ties keep the smallest
// parameters because the grids are scanned in ascending order.
template <class Instance>
ConfidenceConfig tune(const std::vector<Instance>& dev, const LinearModel& model,
                      ConfidenceMethod method, const TuneGrids& grids,
                      std::uint64_t seed = 0) {
    if (dev.empty()) throw ConfigError("empty dev set");

    const bool needs_K = method == ConfidenceMethod::kb ||
                         method == ConfidenceMethod::wkb ||
                         method == ConfidenceMethod::kd_fix ||
                         method == ConfidenceMethod::kd_pc ||
                         method == ConfidenceMethod::kd_fix_plus_delta;
    const bool needs_s = method == ConfidenceMethod::kd_fix ||
                         method == ConfidenceMethod::kd_pc ||
                         method == ConfidenceMethod::kd_fix_plus_delta;
    const bool needs_c = method == ConfidenceMethod::gamma;
    const bool needs_a = method == ConfidenceMethod::kd_fix_plus_delta;

    const std::vector<int> Ks = needs_K ? grids.K : std::vector<int>{50};
    const std::vector<double> ss = needs_s ? grids.s : std::vector<double>{0.1};
    const std::vector<double> cs = needs_c ? grids.c : std::vector<double>{1.0};
    const std::vector<double> as = needs_a ? grids.a : std::vector<double>{0.99};
    if (Ks.empty() || ss.empty() || cs.empty() || as.empty())
        throw ConfigError("empty tuning grid");

    ConfidenceConfig best;
    double best_ap = -1.0;
    for (int K : Ks)
        for (double s : ss)
            for (double c : cs)
                for (double a : as) {
                    ConfidenceConfig cfg;
                    cfg.method = method;
                    cfg.K = K;
                    cfg.s = s;
                    cfg.c = c;
                    cfg.a = a;
                    cfg.seed = seed;
                    const double ap =
                        average_precision(to_ranked_units(score_batch(dev, model, cfg)));
                    if (ap > best_ap) {
                        best_ap = ap;
                        best = cfg;
                    }
                }
    return best;
}

}  // namespace structconf
