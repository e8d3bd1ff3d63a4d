#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "structconf/confidence.hpp"

using namespace structconf;

namespace {

ChainInstance identity_chain(int n, int L) {
    // node (p, y) fires feature p*L+y; weights then equal the potential table
    ChainInstance x(n, L);
    for (int p = 0; p < n; ++p)
        for (int y = 0; y < L; ++y) x.node_feat(p, y).set(p * L + y, 1.0);
    return x;
}

ChainInstance random_feature_chain(std::mt19937_64& rng, int n, int L, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> fid(0, dim - 1);
    ChainInstance x(n, L);
    for (int p = 0; p < n; ++p)
        for (int y = 0; y < L; ++y) {
            x.node_feat(p, y).set(fid(rng), u(rng));
            x.node_feat(p, y).set(fid(rng), u(rng));
        }
    for (int q = 1; q < n; ++q)
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b) x.trans_feat(q, a, b).set(fid(rng), u(rng));
    return x;
}

TreeInstance identity_tree(int n) {
    TreeInstance x(n);
    int f = 0;
    for (int h = 0; h <= n; ++h)
        for (int d = 1; d <= n; ++d) {
            if (h != d) x.edge_feat(h, d).set(f, 1.0);
            ++f;
        }
    return x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("margin confidence on chains") {
    SECTION("score drop matches the quoted example") {
        // two labels at one position: best path scores 17.8, runner-up 12.2
        ChainInstance x = identity_chain(1, 2);
        std::vector<double> w{17.8, 12.2};
        auto ann = conf_delta(x, w);
        REQUIRE(ann.size() == 1);
        CHECK(ann[0].predicted == 0);
        CHECK(ann[0].nu == Catch::Approx(5.6).margin(1e-12));
    }
    SECTION("all-zero potentials give zero margins") {
        ChainInstance x = identity_chain(3, 2);
        std::vector<double> w(6, 0.0);
        for (const auto& a : conf_delta(x, w)) CHECK(a.nu == 0.0);
    }
    SECTION("single label gives the infinite sentinel") {
        ChainInstance x = identity_chain(2, 1);
        std::vector<double> w(2, 0.5);
        for (const auto& a : conf_delta(x, w)) CHECK(std::isinf(a.nu));
    }
    SECTION("matches brute-force constrained maxima") {
        std::mt19937_64 rng(97);
        for (int trial = 0; trial < 20; ++trial) {
            ChainInstance x = identity_chain(5, 3);
            std::vector<double> w(15);
            std::uniform_real_distribution<double> u(-2.0, 2.0);
            for (auto& v : w) v = u(rng);
            auto t = build_potentials(x, w);
            auto [labels, best] = viterbi(t);
            auto ann = conf_delta(x, w);
            for (int p = 0; p < 5; ++p) {
                const double alt =
                    oracle::best_score_with_constraint(t, p, true, labels[p]);
                CHECK(ann[p].nu == Catch::Approx(best - alt).margin(1e-9));
                CHECK(ann[p].nu >= 0.0);
            }
        }
    }
}

TEST_CASE("margin confidence on trees") {
    std::mt19937_64 rng(101);
    SECTION("matches enumeration of constrained arborescences") {
        TreeInstance x = identity_tree(4);
        std::vector<double> w(20);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (auto& v : w) v = u(rng);
        auto ew = build_edge_weights(x, w);
        auto best = cle_decode(ew);
        auto ann = conf_delta(x, w);
        for (int d = 1; d <= 4; ++d) {
            double alt = kNegInf;
            for (auto& [heads, s] : oracle::ranked_arborescences(ew))
                if (heads[d - 1] != best.heads[d - 1]) {
                    alt = s;
                    break;
                }
            CHECK(ann[d - 1].predicted == best.heads[d - 1]);
            CHECK(ann[d - 1].nu == Catch::Approx(best.score - alt).margin(1e-9));
        }
    }
    SECTION("single word has no alternative head") {
        TreeInstance x = identity_tree(1);
        std::vector<double> w(2, 1.0);
        auto ann = conf_delta(x, w);
        REQUIRE(ann.size() == 1);
        CHECK(std::isinf(ann[0].nu));
    }
}

TEST_CASE("marginal confidence") {
    SECTION("symmetric two-label position") {
        ChainInstance x = identity_chain(1, 2);
        std::vector<double> w(2, 0.0);
        auto ann = conf_gamma(x, w, 1.0);
        CHECK(ann[0].nu == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("matches enumeration marginals of the predicted labels") {
        std::mt19937_64 rng(103);
        ChainInstance x = identity_chain(4, 3);
        std::vector<double> w(12);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (auto& v : w) v = u(rng);
        auto t = build_potentials(x, w);
        auto labels = viterbi(t).first;
        auto ann = conf_gamma(x, w, 0.7);
        for (int p = 0; p < 4; ++p) {
            CHECK(ann[p].predicted == labels[p]);
            CHECK(ann[p].nu ==
                  Catch::Approx(oracle::marginal(t, p, labels[p], 0.7)).margin(1e-9));
        }
    }
    SECTION("large temperature concentrates on the decode") {
        std::mt19937_64 rng(107);
        ChainInstance x = identity_chain(4, 3);
        std::vector<double> w(12);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (auto& v : w) v = u(rng);
        for (const auto& a : conf_gamma(x, w, 100.0)) CHECK(a.nu > 0.99);
    }
    SECTION("trees are rejected") {
        TreeInstance x = identity_tree(2);
        std::vector<double> w(6, 0.0);
        CHECK_THROWS_AS(conf_gamma(x, w, 1.0), UnsupportedMethodError);
    }
}

TEST_CASE("k-best alternatives") {
    std::mt19937_64 rng(109);
    ChainInstance x = identity_chain(3, 2);
    std::vector<double> w(6);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& v : w) v = u(rng);

    SECTION("K=1 is the decode with unit weight") {
        auto alts = build_alternatives_kbest(x, w, 1, false);
        REQUIRE(alts.labelings.size() == 1);
        CHECK(alts.labelings[0] == decode(x, w));
        CHECK(alts.weights[0] == 1.0);
    }
    SECTION("weighted variant clips scores at zero") {
        auto kb = kbest_decode(x, w, 5);
        auto alts = build_alternatives_kbest(x, w, 5, true);
        REQUIRE(alts.weights.size() == kb.size());
        for (std::size_t i = 0; i < kb.size(); ++i) {
            CHECK(alts.labelings[i] == kb[i].first);
            CHECK(alts.weights[i] == std::max(0.0, kb[i].second));
        }
    }
}

TEST_CASE("agreement confidence arithmetic") {
    std::vector<int> pred{1, 0};
    SECTION("three of five uniform alternatives agree") {
        AlternativeSet alts;
        alts.labelings = {{1, 0}, {1, 0}, {1, 0}, {0, 0}, {0, 1}};
        alts.weights.assign(5, 1.0);
        auto nu = agreement_confidence(alts, pred);
        CHECK(nu[0] == Catch::Approx(0.6).margin(1e-12));
        CHECK(nu[1] == Catch::Approx(0.8).margin(1e-12));
    }
    SECTION("full agreement is 1.0") {
        AlternativeSet alts;
        alts.labelings.assign(5, pred);
        alts.weights.assign(5, 1.0);
        for (double v : agreement_confidence(alts, pred)) CHECK(v == 1.0);
    }
    SECTION("weighted agreement") {
        AlternativeSet alts;
        alts.labelings = {{1, 0}, {1, 1}, {0, 0}};
        alts.weights = {2.0, 1.0, 1.0};
        auto nu = agreement_confidence(alts, pred);
        CHECK(nu[0] == Catch::Approx(0.75).margin(1e-12));
    }
    SECTION("all-zero weights are degenerate") {
        AlternativeSet alts;
        alts.labelings = {{1, 0}};
        alts.weights = {0.0};
        CHECK_THROWS_AS(agreement_confidence(alts, pred), DegenerateWeightsError);
    }
}

TEST_CASE("sampled alternatives") {
    std::mt19937_64 rng(113);
    ChainInstance x = identity_chain(3, 2);
    std::vector<double> w(6);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& v : w) v = u(rng);

    SECTION("vanishing scale reproduces the decode") {
        auto alts = build_alternatives_sampled(x, w, {}, 20, 1e-12, SampleMode::fix, 7, 0);
        for (const auto& z : alts.labelings) CHECK(z == decode(x, w));
    }
    SECTION("same seed gives identical sets") {
        auto a = build_alternatives_sampled(x, w, {}, 10, 0.5, SampleMode::fix, 11, 3);
        auto b = build_alternatives_sampled(x, w, {}, 10, 0.5, SampleMode::fix, 11, 3);
        CHECK(a.labelings == b.labelings);
        auto c = build_alternatives_sampled(x, w, {}, 10, 0.5, SampleMode::fix, 12, 3);
        CHECK(a.labelings != c.labelings);
    }
    SECTION("pc mode requires a variance diagonal") {
        CHECK_THROWS_AS(
            build_alternatives_sampled(x, w, {}, 5, 0.5, SampleMode::pc, 1, 0),
            ConfigError);
    }
    SECTION("pc mode with tiny variances reproduces the decode") {
        std::vector<double> sigma(6, 1e-12);
        auto alts = build_alternatives_sampled(x, w, sigma, 20, 1.0, SampleMode::pc, 7, 0);
        for (const auto& z : alts.labelings) CHECK(z == decode(x, w));
    }
    SECTION("empirical agreement matches the Gaussian tail") {
        // one feature, one position: label 1 wins iff the sampled weight > 0
        ChainInstance y(1, 2);
        y.node_feat(0, 1).set(0, 1.0);
        const double mean = 0.6, s = 0.25;
        std::vector<double> mu{mean};
        const int K = 10000;
        auto alts = build_alternatives_sampled(y, mu, {}, K, s, SampleMode::fix, 17, 0);
        auto nu = agreement_confidence(alts, decode(y, mu));
        const double p = normal_cdf(mean / std::sqrt(s));
        const double band = 3.0 * std::sqrt(p * (1.0 - p) / K);
        CHECK(nu[0] == Catch::Approx(p).margin(band));
    }
}

TEST_CASE("sentence confidence") {
    auto ann = [](std::vector<double> nus) {
        std::vector<ConfidenceAnnotation> v;
        for (std::size_t i = 0; i < nus.size(); ++i)
            v.push_back({static_cast<int>(i), 0, nus[i], std::nullopt});
        return v;
    };
    CHECK(sentence_confidence(ann({1.0, 0.4, 0.9})) == 0.4);
    CHECK(sentence_confidence(ann({1.0, 1.0})) == 1.0);
    CHECK(sentence_confidence(ann({0.7})) == 0.7);
    CHECK_THROWS_AS(sentence_confidence({}), ConfigError);
}

TEST_CASE("batch scoring") {
    std::mt19937_64 rng(127);
    std::vector<ChainInstance> batch;
    const int dim = 24;
    for (int i = 0; i < 6; ++i) {
        auto x = random_feature_chain(rng, 4, 3, dim);
        batch.push_back(std::move(x));
    }
    LinearModel model(dim);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : model.mu()) v = u(rng);
    for (auto& x : batch) x.gold = decode(x, model.prediction_weights(false));

    SECTION("correctness flags are filled against gold") {
        ConfidenceConfig cfg;
        cfg.method = ConfidenceMethod::delta;
        auto scored = score_batch(batch, model, cfg, false);
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (const auto& a : scored[i]) {
                REQUIRE(a.correct.has_value());
                CHECK(*a.correct == (a.predicted == batch[i].gold[a.unit]));
            }
    }

    SECTION("agreement methods stay within [0,1] and are seed-deterministic") {
        for (auto method : {ConfidenceMethod::kb, ConfidenceMethod::wkb,
                            ConfidenceMethod::kd_fix}) {
            ConfidenceConfig cfg;
            cfg.method = method;
            cfg.K = 8;
            cfg.s = 0.3;
            cfg.seed = 5;
            auto a = score_batch(batch, model, cfg, false);
            auto b = score_batch(batch, model, cfg, false);
            for (std::size_t i = 0; i < a.size(); ++i)
                for (std::size_t p = 0; p < a[i].size(); ++p) {
                    CHECK(a[i][p].nu >= 0.0);
                    CHECK(a[i][p].nu <= 1.0);
                    CHECK(a[i][p].nu == b[i][p].nu);
                }
        }
    }

    SECTION("kb with K=1 is certain everywhere") {
        ConfidenceConfig cfg;
        cfg.method = ConfidenceMethod::kb;
        cfg.K = 1;
        for (const auto& sent : score_batch(batch, model, cfg, false))
            for (const auto& a : sent) CHECK(a.nu == 1.0);
    }

    SECTION("pc scoring needs a variance model") {
        ConfidenceConfig cfg;
        cfg.method = ConfidenceMethod::kd_pc;
        CHECK_THROWS_AS(score_batch(batch, model, cfg, false), ConfigError);
    }

    SECTION("combo ordering is lexicographic in (agreement, margin)") {
        ConfidenceConfig fix_cfg;
        fix_cfg.method = ConfidenceMethod::kd_fix;
        fix_cfg.K = 20;
        fix_cfg.s = 0.4;
        fix_cfg.seed = 9;
        ConfidenceConfig combo_cfg = fix_cfg;
        combo_cfg.method = ConfidenceMethod::kd_fix_plus_delta;

        auto fix = score_batch(batch, model, fix_cfg, false);
        auto combo = score_batch(batch, model, combo_cfg, false);

        struct Unit {
            double fix_nu, margin, combo_nu;
        };
        std::vector<Unit> units;
        const auto w = model.prediction_weights(false);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto margins = conf_delta(batch[i], w);
            for (std::size_t p = 0; p < fix[i].size(); ++p)
                units.push_back({fix[i][p].nu, margins[p].nu, combo[i][p].nu});
        }
        for (const auto& a : units)
            for (const auto& b : units) {
                if (a.fix_nu > b.fix_nu) CHECK(a.combo_nu > b.combo_nu);
                if (a.fix_nu == b.fix_nu && a.margin > b.margin)
                    CHECK(a.combo_nu > b.combo_nu);
                if (a.fix_nu == b.fix_nu && a.margin == b.margin)
                    CHECK(a.combo_nu == b.combo_nu);
            }
    }
}
