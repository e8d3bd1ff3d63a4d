#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "structconf/evaluation.hpp"

using namespace structconf;

namespace {

std::vector<RankedUnit> make_units(const std::vector<std::pair<double, bool>>& raw) {
    std::vector<RankedUnit> units;
    for (std::size_t i = 0; i < raw.size(); ++i)
        units.push_back({raw[i].first, raw[i].second, static_cast<std::int64_t>(i)});
    return units;
}

}  // namespace

TEST_CASE("average precision") {
    SECTION("perfect ranking scores 1") {
        auto units = make_units({{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}});
        CHECK(average_precision(units) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("error, correct, error") {
        auto units = make_units({{0.1, true}, {0.5, false}, {0.9, true}});
        CHECK(average_precision(units) ==
              Catch::Approx((1.0 + 2.0 / 3.0) / 2.0).margin(1e-12));
    }
    SECTION("no errors is undefined") {
        auto units = make_units({{0.5, false}});
        CHECK_THROWS_AS(average_precision(units), UndefinedMetricError);
    }
    SECTION("ties resolve by stable input order") {
        auto a = make_units({{0.5, true}, {0.5, false}});
        auto b = make_units({{0.5, false}, {0.5, true}});
        CHECK(average_precision(a) == Catch::Approx(1.0).margin(1e-12));
        CHECK(average_precision(b) == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("invariant under strictly monotone transforms") {
        std::mt19937_64 rng(131);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::bernoulli_distribution err(0.3);
        std::vector<RankedUnit> units;
        for (int i = 0; i < 300; ++i) units.push_back({u(rng), err(rng), i});
        const double base = average_precision(units);
        auto cubed = units, affine = units;
        for (auto& x : cubed) x.nu = x.nu * x.nu * x.nu;
        for (auto& x : affine) x.nu = 2.0 * x.nu + 1.0;
        CHECK(average_precision(cubed) == Catch::Approx(base).margin(1e-12));
        CHECK(average_precision(affine) == Catch::Approx(base).margin(1e-12));
    }
    SECTION("random confidence gives AP near the error rate") {
        std::mt19937_64 rng(137);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double rate = 0.25;
        std::bernoulli_distribution err(rate);
        double sum = 0.0;
        const int trials = 50;
        for (int t = 0; t < trials; ++t) {
            std::vector<RankedUnit> units;
            for (int i = 0; i < 400; ++i) units.push_back({u(rng), err(rng), i});
            sum += average_precision(units);
        }
        CHECK(sum / trials == Catch::Approx(rate).margin(0.02));
    }
}

TEST_CASE("precision recall curve") {
    SECTION("perfect ranking has precision 1 at every decile") {
        auto units = make_units({{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}});
        auto curve = precision_recall_curve(units);
        REQUIRE(curve.size() == 10);
        for (const auto& [recall, precision] : curve) CHECK(precision == 1.0);
    }
    SECTION("inverted ranking bottoms out at the error rate") {
        std::vector<RankedUnit> units;
        const int N = 40, E = 8;
        for (int i = 0; i < N; ++i)
            units.push_back({i < N - E ? 0.1 : 0.9, i >= N - E, i});
        auto curve = precision_recall_curve(units);
        REQUIRE(!curve.empty());
        CHECK(curve.back().first == 1.0);
        CHECK(curve.back().second ==
              Catch::Approx(static_cast<double>(E) / N).margin(1e-12));
    }
    SECTION("matches a direct recount oracle") {
        std::mt19937_64 rng(139);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::bernoulli_distribution err(0.2);
        std::vector<RankedUnit> units;
        for (int i = 0; i < 200; ++i) units.push_back({u(rng), err(rng), i});
        auto curve = precision_recall_curve(units);
        auto ranked = sorted_by_confidence(units);
        long E = 0;
        for (const auto& x : ranked) E += x.is_error;
        REQUIRE(curve.size() == 10);
        for (int d = 1; d <= 10; ++d) {
            const long need = (E * d + 9) / 10;  // ceil(E*d/10)
            long seen = 0;
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                if (ranked[r].is_error) ++seen;
                if (seen >= need) {
                    CHECK(curve[d - 1].second ==
                          Catch::Approx(static_cast<double>(seen) / (r + 1))
                              .margin(1e-12));
                    break;
                }
            }
        }
    }
}

TEST_CASE("calibration bins") {
    SECTION("bin centers follow the closed form") {
        auto bins = calibration_bins({});
        REQUIRE(bins.size() == 20);
        for (int j = 1; j <= 20; ++j)
            CHECK(bins[j - 1].center == Catch::Approx(j / 20.0 - 1.0 / 40.0).margin(1e-15));
    }
    SECTION("zero confidence lands in bin 1, full confidence in bin 20") {
        auto bins = calibration_bins({{0.0, false}, {1.0, true}, {1.0, true}});
        CHECK(bins[0].count == 1);
        CHECK(bins[19].count == 2);
        CHECK(bins[19].correct == 2);
    }
    SECTION("counts match a direct histogram") {
        std::mt19937_64 rng(149);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::bernoulli_distribution ok(0.8);
        std::vector<std::pair<double, bool>> scored;
        for (int i = 0; i < 500; ++i) scored.emplace_back(u(rng), ok(rng));
        auto bins = calibration_bins(scored);
        std::vector<long> hist(20, 0);
        long total = 0;
        for (const auto& [nu, c] : scored) {
            int j = nu == 1.0 ? 19 : static_cast<int>(nu * 20.0);
            ++hist[j];
        }
        for (int j = 0; j < 20; ++j) {
            CHECK(bins[j].count == hist[j]);
            total += bins[j].count;
        }
        CHECK(total == 500);
    }
    SECTION("out-of-range confidence rejected") {
        CHECK_THROWS_AS(calibration_bins({{1.5, true}}), UndefinedMetricError);
        CHECK_THROWS_AS(calibration_bins({{-0.1, true}}), UndefinedMetricError);
    }
}

TEST_CASE("calibration rmse") {
    SECTION("all certain and correct") {
        auto bins = calibration_bins({{1.0, true}, {1.0, true}, {1.0, true}});
        CHECK(calibration_rmse(bins) == Catch::Approx(0.025).margin(1e-12));
    }
    SECTION("zero when accuracy matches every populated center") {
        // bin 20 center is 0.975: 39 correct of 40 gives exactly that
        std::vector<std::pair<double, bool>> scored(39, {1.0, true});
        scored.emplace_back(1.0, false);
        CHECK(calibration_rmse(calibration_bins(scored)) ==
              Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("two-bin hand case") {
        std::vector<CalibrationBin> bins(2);
        bins[0] = {1, 0.5, 10, 4};   // |b - c| = 0.1
        bins[1] = {2, 0.88, 30, 27};  // |b - c| = 0.02
        const double expect = std::sqrt((10 * 0.01 + 30 * 0.0004) / 40.0);
        CHECK(calibration_rmse(bins) == Catch::Approx(expect).margin(1e-12));
    }
    SECTION("empty bins rejected") {
        CHECK_THROWS_AS(calibration_rmse(calibration_bins({})), UndefinedMetricError);
    }
}

TEST_CASE("chernoff sample bound") {
    CHECK(chernoff_k(0.05, 0.05, 500000) == 3363);
    CHECK(chernoff_k(0.05, 0.05, 25000) == 2764);
    SECTION("direct formula at large epsilon") {
        const long k = chernoff_k(0.5, 0.1, 100);
        CHECK(k == static_cast<long>(std::ceil(std::log(2000.0) / 0.5)));
    }
    SECTION("monotonicity") {
        CHECK(chernoff_k(0.05, 0.05, 500000) >= chernoff_k(0.06, 0.05, 500000));
        CHECK(chernoff_k(0.05, 0.05, 500000) >= chernoff_k(0.05, 0.06, 500000));
        CHECK(chernoff_k(0.05, 0.05, 500000) >= chernoff_k(0.05, 0.05, 400000));
    }
}

TEST_CASE("bernstein interval width") {
    const long N = 500000;
    const double delta = 0.05;
    const double L = std::log(2.0 * N / delta);
    SECTION("degenerate accuracies collapse to the linear term") {
        CHECK(bernstein_epsilon(0.0, 50, N, delta) ==
              Catch::Approx(2.0 * L / (3.0 * 50)).margin(1e-12));
        CHECK(bernstein_epsilon(1.0, 50, N, delta) ==
              Catch::Approx(2.0 * L / (3.0 * 50)).margin(1e-12));
    }
    SECTION("widest at gamma one half") {
        CHECK(bernstein_epsilon(0.5, 50, N, delta) >=
              bernstein_epsilon(0.95, 50, N, delta));
        CHECK(bernstein_epsilon(0.5, 50, N, delta) >=
              bernstein_epsilon(0.05, 50, N, delta));
    }
    SECTION("direct evaluation at the paper operating point") {
        const double t = 2.0 * L / 3.0;
        const double expect =
            (t + std::sqrt(t * t + 8.0 * 50 * L * 0.25)) / (2.0 * 50);
        CHECK(bernstein_epsilon(0.5, 50, N, delta) ==
              Catch::Approx(expect).margin(1e-12));
    }
}
