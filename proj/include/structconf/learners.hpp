#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "structconf/chain_inference.hpp"
#include "structconf/common.hpp"
#include "structconf/instances.hpp"
#include "structconf/model.hpp"
#include "structconf/tree_inference.hpp"

namespace structconf {

inline std::vector<int> decode(const ChainInstance& x, std::span<const double> w) {
    return viterbi(build_potentials(x, w)).first;
}

inline std::vector<int> decode(const TreeInstance& x, std::span<const double> w) {
    return cle_decode(build_edge_weights(x, w)).heads;
}

inline std::vector<std::pair<std::vector<int>, double>> kbest_decode(
    const ChainInstance& x, std::span<const double> w, int K) {
    return kbest_viterbi(build_potentials(x, w), K);
}

inline std::vector<std::pair<std::vector<int>, double>> kbest_decode(
    const TreeInstance& x, std::span<const double> w, int K) {
    std::vector<std::pair<std::vector<int>, double>> out;
    for (auto& a : kbest_arborescences(build_edge_weights(x, w), K))
        out.emplace_back(std::move(a.heads), a.score);
    return out;
}

inline const std::vector<int>& gold_of(const ChainInstance& x) { return x.gold; }
inline const std::vector<int>& gold_of(const TreeInstance& x) { return x.gold_heads; }

enum class Algorithm { perceptron, pa, cw, nbest_pa };

struct TrainConfig {
    Algorithm algorithm = Algorithm::pa;
    double C = 1.0;            // PA aggressiveness
    double phi = 1.0;          // CW confidence parameter
    double a = 1.0;            // CW initial variance
    int nbest_k = 5;
    int epochs = 10;
    std::uint64_t seed = 0;
    bool averaging = true;
};

struct UpdateRecord {
    double alpha = 0.0;
    double beta = 0.0;   // CW only
    int loss = 0;
    double margin = 0.0;
    double variance = 0.0;  // CW only
};

namespace detail {

// One PA-I step against a given (possibly non-best) prediction; does not
// touch the averaging accumulator.
template <class Instance>
UpdateRecord pa_step(LinearModel& model, const Instance& x,
                     const std::vector<int>& prediction, double C) {
    UpdateRecord rec;
    const auto& gold = gold_of(x);
    if (prediction == gold) return rec;
    const SparseVector g = feature_difference(x, gold, prediction);
    rec.loss = hamming_loss(gold, prediction);
    if (g.empty()) return rec;  // degenerate: distinct labelings, identical features
    rec.margin = g.dot(model.mu());
    const double alpha =
        std::min(C, std::max(0.0, rec.loss - rec.margin) / g.squared_norm());
    rec.alpha = alpha;
    g.add_to(model.mu(), alpha);
    return rec;
}

}  // namespace detail

template <class Instance>
UpdateRecord perceptron_update(LinearModel& model, const Instance& x) {
    UpdateRecord rec;
    const auto prediction = decode(x, model.mu());
    const auto& gold = gold_of(x);
    if (prediction != gold) {
        const SparseVector g = feature_difference(x, gold, prediction);
        rec.loss = hamming_loss(gold, prediction);
        rec.alpha = 1.0;
        g.add_to(model.mu(), 1.0);
    }
    model.accumulate_average();
    return rec;
}

template <class Instance>
UpdateRecord pa_update(LinearModel& model, const Instance& x, double C) {
    if (C <= 0.0) throw ConfigError("C must be positive");
    const auto prediction = decode(x, model.mu());
    UpdateRecord rec = detail::pa_step(model, x, prediction, C);
    model.accumulate_average();
    return rec;
}

template <class Instance>
UpdateRecord cw_update(LinearModel& model, const Instance& x, double phi) {
    if (phi <= 0.0) throw ConfigError("phi must be positive");
    if (!model.has_variance()) throw ConfigError("CW update requires a variance diagonal");
    UpdateRecord rec;
    const auto prediction = decode(x, model.mu());
    const auto& gold = gold_of(x);
    if (prediction == gold) {
        model.accumulate_average();
        return rec;
    }
    const SparseVector g = feature_difference(x, gold, prediction);
    rec.loss = hamming_loss(gold, prediction);
    if (g.empty()) {
        model.accumulate_average();
        return rec;
    }
    auto& mu = model.mu();
    auto& sigma = model.sigma_diag();
    double v = 0.0;
    for (const auto& [f, gw] : g) v += gw * gw * sigma[f];
    if (v <= 0.0) {
        // variance fully collapsed on every involved feature; the mean update
        // alpha * Sigma * g is zero in this limit, so the step is a no-op
        model.accumulate_average();
        return rec;
    }
    const double m = g.dot(mu);
    rec.margin = m;
    rec.variance = v;
    const double phi_l = phi * rec.loss;
    const double phi1 = 1.0 + phi_l * phi_l / 2.0;
    const double phi2 = 1.0 + phi_l * phi_l;
    const double alpha = std::max(
        0.0, (-m * phi1 + std::sqrt(m * m * std::pow(phi_l, 4) / 4.0 + v * phi_l * phi_l * phi2)) /
                 (v * phi2));
    rec.alpha = alpha;
    if (alpha > 0.0) {
        const double u =
            0.25 * std::pow(-alpha * v * phi_l +
                                std::sqrt(alpha * alpha * v * v * phi_l * phi_l + 4.0 * v),
                            2.0);
        rec.beta = alpha * phi_l / std::sqrt(u);
        for (const auto& [f, gw] : g) {
            mu[f] += alpha * sigma[f] * gw;
            sigma[f] = 1.0 / (1.0 / sigma[f] + rec.beta * gw * gw);
        }
    }
    model.accumulate_average();
    return rec;
}

// K-best decodes are taken once against the pre-update model; PA steps are
// then applied sequentially, best first.
template <class Instance>
std::vector<UpdateRecord> nbest_pa_update(LinearModel& model, const Instance& x,
                                          double C, int K) {
    if (K < 1) throw ConfigError("K must be positive");
    const auto predictions = kbest_decode(x, model.mu(), K);
    std::vector<UpdateRecord> records;
    const auto& gold = gold_of(x);
    for (const auto& [prediction, score] : predictions) {
        if (prediction == gold) continue;
        records.push_back(detail::pa_step(model, x, prediction, C));
    }
    model.accumulate_average();
    return records;
}

template <class Instance>
void train_step(LinearModel& model, const Instance& x, const TrainConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::perceptron:
            perceptron_update(model, x);
            break;
        case Algorithm::pa:
            pa_update(model, x, cfg.C);
            break;
        case Algorithm::cw:
            cw_update(model, x, cfg.phi);
            break;
        case Algorithm::nbest_pa:
            nbest_pa_update(model, x, cfg.C, cfg.nbest_k);
            break;
    }
}

// Fixed-order epoch driver; no shuffling, so runs are reproducible.
template <class Instance>
LinearModel train(const std::vector<Instance>& dataset, int dimension,
                  const TrainConfig& cfg) {
    if (dataset.empty()) throw ConfigError("empty training set");
    if (cfg.epochs < 1) throw ConfigError("epochs must be positive");
    LinearModel model(dimension, cfg.algorithm == Algorithm::cw, cfg.a);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch)
        for (const auto& x : dataset) train_step(model, x, cfg);
    return model;
}

}  // namespace structconf
