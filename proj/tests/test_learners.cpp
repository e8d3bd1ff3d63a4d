#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "structconf/learners.hpp"

using namespace structconf;

namespace {

ChainInstance random_chain(std::mt19937_64& rng, int n, int L, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> fid(0, dim - 1);
    std::uniform_int_distribution<int> lab(0, L - 1);
    ChainInstance x(n, L);
    for (int p = 0; p < n; ++p)
        for (int y = 0; y < L; ++y) {
            x.node_feat(p, y).set(fid(rng), u(rng));
            x.node_feat(p, y).set(fid(rng), u(rng));
        }
    for (int q = 1; q < n; ++q)
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b) x.trans_feat(q, a, b).set(fid(rng), u(rng));
    for (auto& g : x.gold) g = lab(rng);
    return x;
}

TreeInstance random_tree(std::mt19937_64& rng, int n, int dim,
                         const std::vector<double>& hidden) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> fid(0, dim - 1);
    TreeInstance x(n);
    for (int h = 0; h <= n; ++h)
        for (int d = 1; d <= n; ++d) {
            if (h == d) continue;
            x.edge_feat(h, d).set(fid(rng), u(rng));
            x.edge_feat(h, d).set(fid(rng), u(rng));
        }
    // realizable gold: decode under a hidden weight vector
    x.gold_heads = decode(x, hidden);
    return x;
}

// Two-label single position: node 0 fires feature 0, node 1 fires feature 1.
ChainInstance tiny_chain() {
    ChainInstance x(1, 2);
    x.node_feat(0, 0).set(0, 1.0);
    x.node_feat(0, 1).set(1, 1.0);
    x.gold = {1};
    return x;
}

}  // namespace

TEST_CASE("perceptron hand trace") {
    auto x = tiny_chain();
    LinearModel m(2);

    auto rec = perceptron_update(m, x);
    CHECK(rec.alpha == 1.0);
    CHECK(rec.loss == 1);
    CHECK(m.mu() == std::vector<double>{-1.0, 1.0});
    CHECK(m.avg_mu() == std::vector<double>{-1.0, 1.0});
    CHECK(m.update_count() == 1);

    // now correct: weights untouched, accumulator still advances
    rec = perceptron_update(m, x);
    CHECK(rec.alpha == 0.0);
    CHECK(m.mu() == std::vector<double>{-1.0, 1.0});
    CHECK(m.update_count() == 2);
}

TEST_CASE("pa closed forms") {
    SECTION("uncapped step lands exactly on the loss margin") {
        auto x = tiny_chain();
        LinearModel m(2);
        auto rec = pa_update(m, x, 1.0);
        // l=1, m=0, |g|^2=2 -> alpha = 0.5
        CHECK(rec.alpha == Catch::Approx(0.5).margin(1e-12));
        CHECK(m.mu()[0] == Catch::Approx(-0.5).margin(1e-12));
        CHECK(m.mu()[1] == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("C caps the step") {
        auto x = tiny_chain();
        LinearModel m(2);
        auto rec = pa_update(m, x, 0.1);
        CHECK(rec.alpha == Catch::Approx(0.1).margin(1e-12));
    }
    SECTION("invalid C rejected") {
        auto x = tiny_chain();
        LinearModel m(2);
        CHECK_THROWS_AS(pa_update(m, x, 0.0), ConfigError);
    }
    SECTION("post-update KKT on random instances") {
        std::mt19937_64 rng(61);
        const double C = 10.0;
        for (int trial = 0; trial < 30; ++trial) {
            auto x = random_chain(rng, 4, 3, 12);
            LinearModel m(12);
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (auto& w : m.mu()) w = u(rng);
            auto before = decode(x, m.mu());
            if (before == x.gold) continue;
            const SparseVector g = feature_difference(x, x.gold, before);
            auto rec = pa_update(m, x, C);
            if (rec.alpha > 0.0 && rec.alpha < C) {
                // interior solution: new margin on the old separator equals the loss
                CHECK(g.dot(m.mu()) == Catch::Approx(static_cast<double>(rec.loss)).margin(1e-9));
            }
            CHECK(rec.alpha <= C + 1e-12);
            CHECK(rec.alpha >= 0.0);
        }
    }
}

TEST_CASE("cw worked example") {
    // g = {0: 1}, loss 1, phi = 1 against zero weights and unit variance
    ChainInstance x(1, 2);
    x.node_feat(0, 1).set(0, 1.0);
    x.gold = {1};
    LinearModel m(1, true, 1.0);

    auto rec = cw_update(m, x, 1.0);
    const double root_half = std::sqrt(2.0) / 2.0;
    CHECK(rec.loss == 1);
    CHECK(rec.margin == Catch::Approx(0.0).margin(1e-12));
    CHECK(rec.variance == Catch::Approx(1.0).margin(1e-12));
    CHECK(rec.alpha == Catch::Approx(root_half).margin(1e-9));
    CHECK(rec.beta == Catch::Approx(1.0).margin(1e-9));
    CHECK(m.mu()[0] == Catch::Approx(root_half).margin(1e-9));
    CHECK(m.sigma_diag()[0] == Catch::Approx(0.5).margin(1e-9));
}

TEST_CASE("cw invariants on random instances") {
    std::mt19937_64 rng(67);
    const double phi = 1.0;
    for (int trial = 0; trial < 30; ++trial) {
        auto x = random_chain(rng, 4, 3, 12);
        LinearModel m(12, true, 1.0);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (auto& w : m.mu()) w = u(rng);
        auto before = decode(x, m.mu());
        if (before == x.gold) continue;
        const SparseVector g = feature_difference(x, x.gold, before);
        auto sigma_before = m.sigma_diag();
        auto rec = cw_update(m, x, phi);
        for (std::size_t f = 0; f < sigma_before.size(); ++f) {
            CHECK(m.sigma_diag()[f] > 0.0);
            CHECK(m.sigma_diag()[f] <= sigma_before[f] + 1e-12);
        }
        if (rec.alpha > 0.0) {
            // active constraint: new margin equals phi*loss standard deviations,
            // measured with the pre-diagonalization variance u from the closed form
            const double v = rec.variance;
            const double phi_l = phi * rec.loss;
            const double root_u =
                0.5 * (-rec.alpha * v * phi_l +
                       std::sqrt(rec.alpha * rec.alpha * v * v * phi_l * phi_l + 4.0 * v));
            const double m_new = g.dot(m.mu());
            CHECK(m_new == Catch::Approx(phi_l * root_u).margin(1e-6));
            CHECK(rec.beta == Catch::Approx(rec.alpha * phi_l / root_u).margin(1e-9));
        }
    }
}

TEST_CASE("cw preconditions") {
    auto x = tiny_chain();
    LinearModel without_sigma(2);
    CHECK_THROWS_AS(cw_update(without_sigma, x, 1.0), ConfigError);
    LinearModel m(2, true, 1.0);
    CHECK_THROWS_AS(cw_update(m, x, 0.0), ConfigError);
}

TEST_CASE("nbest pa") {
    SECTION("K=1 matches plain pa") {
        std::mt19937_64 rng(71);
        for (int trial = 0; trial < 10; ++trial) {
            auto x = random_chain(rng, 4, 3, 12);
            LinearModel a(12), b(12);
            pa_update(a, x, 1.0);
            nbest_pa_update(b, x, 1.0, 1);
            CHECK(a.mu() == b.mu());
        }
    }
    SECTION("sequential steps match a manual replay") {
        std::mt19937_64 rng(73);
        auto x = random_chain(rng, 4, 3, 12);
        LinearModel m(12);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (auto& w : m.mu()) w = u(rng);
        const double C = 1.0;

        std::vector<double> mu = m.mu();
        auto preds = kbest_decode(x, mu, 3);
        for (const auto& [pred, s] : preds) {
            if (pred == x.gold) continue;
            const SparseVector g = feature_difference(x, x.gold, pred);
            if (g.empty()) continue;
            const double loss = hamming_loss(x.gold, pred);
            const double alpha =
                std::min(C, std::max(0.0, loss - g.dot(mu)) / g.squared_norm());
            g.add_to(mu, alpha);
        }
        nbest_pa_update(m, x, C, 3);
        REQUIRE(m.mu().size() == mu.size());
        for (std::size_t f = 0; f < mu.size(); ++f)
            CHECK(m.mu()[f] == Catch::Approx(mu[f]).margin(1e-12));
    }
    SECTION("gold inside the k-best list is skipped") {
        auto x = tiny_chain();
        LinearModel m(2);
        auto records = nbest_pa_update(m, x, 1.0, 4);
        CHECK(records.size() == 1);  // only the wrong labeling triggers a step
    }
}

TEST_CASE("train driver") {
    std::mt19937_64 rng(79);

    SECTION("separable chain data is fit by the perceptron") {
        // word identity decides the label; emission features are one-hot
        const int V = 6, L = 3, dim = V * L;
        std::uniform_int_distribution<int> word(0, V - 1);
        std::vector<ChainInstance> data;
        for (int i = 0; i < 40; ++i) {
            ChainInstance x(5, L);
            for (int p = 0; p < 5; ++p) {
                const int w = word(rng);
                for (int y = 0; y < L; ++y) x.node_feat(p, y).set(w * L + y, 1.0);
                x.gold[p] = w % L;
            }
            data.push_back(std::move(x));
        }
        TrainConfig cfg;
        cfg.algorithm = Algorithm::perceptron;
        cfg.epochs = 10;
        auto m = train(data, dim, cfg);
        for (const auto& x : data) CHECK(decode(x, m.mu()) == x.gold);
    }

    SECTION("realizable tree data trains to low error") {
        std::vector<double> hidden(10);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (auto& w : hidden) w = u(rng);
        std::vector<TreeInstance> data;
        for (int i = 0; i < 20; ++i) data.push_back(random_tree(rng, 4, 10, hidden));
        TrainConfig cfg;
        cfg.algorithm = Algorithm::pa;
        cfg.epochs = 10;
        auto m = train(data, 10, cfg);
        int errors = 0, zero_errors = 0;
        LinearModel zero(10);
        for (const auto& x : data) {
            errors += hamming_loss(x.gold_heads, decode(x, m.mu()));
            zero_errors += hamming_loss(x.gold_heads, decode(x, zero.mu()));
        }
        CHECK(errors < zero_errors / 2);
        CHECK(m.update_count() == 200);
    }

    SECTION("runs are deterministic") {
        std::vector<ChainInstance> data;
        std::mt19937_64 r1(83);
        for (int i = 0; i < 8; ++i) data.push_back(random_chain(r1, 4, 3, 12));
        TrainConfig cfg;
        cfg.algorithm = Algorithm::cw;
        cfg.epochs = 3;
        auto a = train(data, 12, cfg);
        auto b = train(data, 12, cfg);
        CHECK(a.mu() == b.mu());
        CHECK(a.sigma_diag() == b.sigma_diag());
        CHECK(a.avg_mu() == b.avg_mu());
    }

    SECTION("average equals the mean of per-step snapshots") {
        std::vector<ChainInstance> data;
        std::mt19937_64 r2(89);
        for (int i = 0; i < 6; ++i) data.push_back(random_chain(r2, 3, 2, 8));
        TrainConfig cfg;
        cfg.algorithm = Algorithm::pa;
        cfg.epochs = 2;
        LinearModel m(8);
        std::vector<double> mean(8, 0.0);
        int steps = 0;
        for (int e = 0; e < cfg.epochs; ++e)
            for (const auto& x : data) {
                train_step(m, x, cfg);
                ++steps;
                for (int f = 0; f < 8; ++f) mean[f] += m.mu()[f];
            }
        for (int f = 0; f < 8; ++f)
            CHECK(m.avg_mu()[f] == Catch::Approx(mean[f] / steps).margin(1e-9));
        CHECK(m.update_count() == steps);
    }

    SECTION("empty dataset rejected") {
        std::vector<ChainInstance> empty;
        CHECK_THROWS_AS(train(empty, 4, TrainConfig{}), ConfigError);
    }
}
