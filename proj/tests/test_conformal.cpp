#include "ivcp/conformal.hpp"
#include "ivcp/errors.hpp"
#include "ivcp/sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace ivcp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PredictionRule constant_rule(IntervalUnion set) {
    return PredictionRule({{0.0}}, {std::move(set)}, {1});
}

std::vector<Observation> exact_points(const std::vector<double>& ys) {
    std::vector<Observation> out;
    for (double y : ys) out.push_back({{0.0}, y, y});
    return out;
}

std::vector<double> interior(std::size_t count) {
    std::vector<double> ys;
    for (std::size_t i = 0; i < count; ++i) ys.push_back((i + 0.5) / static_cast<double>(count));
    return ys;
}

} // namespace

TEST_CASE("score examples") {
    CHECK(score(0, 1, IntervalUnion{{0, 1}}) == 0.0);
    CHECK(score(0, 1, IntervalUnion{{-1, 2}}) == -1.0);
    CHECK(score(2.5, 3.5, IntervalUnion{{0, 1}, {3, 4}}) == 0.5);
    CHECK(score(0, 1, IntervalUnion{}) == kInf);
    CHECK(score(5, 6, IntervalUnion::full_line()) < 0);

    const PredictionRule masked({{0.0}}, {IntervalUnion{}}, {0});
    const std::vector<double> x{0.0};
    CHECK_THROWS_AS(score(0, 1, x, masked), UndefinedRuleError);
}

TEST_CASE("score is nonpositive exactly on containment") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3, 3);
    std::uniform_int_distribution<int> k(0, 3), lattice(-6, 6);
    std::bernoulli_distribution snap(0.3);
    for (int it = 0; it < 20000; ++it) {
        std::vector<Interval> raw;
        for (int m = k(rng); m > 0; --m) {
            double a = snap(rng) ? lattice(rng) * 0.5 : u(rng), b = snap(rng) ? lattice(rng) * 0.5 : u(rng);
            raw.push_back({std::min(a, b), std::max(a, b)});
        }
        const IntervalUnion set = normalize_union(raw);
        double a = snap(rng) ? lattice(rng) * 0.5 : u(rng), b = snap(rng) ? lattice(rng) * 0.5 : u(rng);
        if (a > b) std::swap(a, b);
        CHECK((score(a, b, set) <= 0) == contains_bracket(set, a, b));
    }
}

TEST_CASE("endpoint shifts agree with the grown interval") {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> mag(-3, 8);
    std::size_t inexact = 0;
    for (int it = 0; it < 100000; ++it) {
        const double scale = std::pow(10.0, mag(rng));
        const double lo = u(rng) * scale, y = u(rng) * std::pow(10.0, mag(rng));
        if (lo - (lo - y) > y) ++inexact;
        const double w = lower_shift(lo, y);
        CHECK(lo - w <= y);
        CHECK((w <= 0) == (lo <= y));
        const double v = upper_shift(lo, y);
        CHECK(lo + v >= y);
        CHECK((v <= 0) == (y <= lo));
    }
    CHECK(inexact > 0); // the naive difference does misround on this sample
    CHECK(lower_shift(-kInf, 3.0) == -kInf);
    CHECK(upper_shift(kInf, 3.0) == -kInf);
}

TEST_CASE("threshold order statistic") {
    std::vector<double> s19;
    for (int i = 1; i <= 19; ++i) s19.push_back(i);
    CHECK(conformal_rank(19, 0.1) == 18);
    CHECK(conformal_threshold(s19, 0.1) == 18.0);
    std::vector<double> s9;
    for (int i = -4; i <= 4; ++i) s9.push_back(i);
    CHECK(conformal_threshold(s9, 0.5) == 0.0);
    const std::vector<double> s5{1, 2, 3, 4, 5};
    CHECK(conformal_threshold(s5, 0.05) == kInf);
    CHECK_THROWS_AS(conformal_threshold(std::vector<double>{}, 0.1), DataError);
    CHECK_THROWS_AS(conformal_threshold(s5, 1.0), ConfigError);
}

TEST_CASE("inflation") {
    const IntervalUnion set{{0, 1}, {1.5, 2}};
    CHECK(inflate(set, 0.0) == set);
    CHECK(inflate(set, 0.3) == IntervalUnion{{-0.3, 2.3}});
    CHECK(inflate(IntervalUnion{{0, 1}}, -0.6).empty());
    CHECK(inflate(set, -0.3) == IntervalUnion{{0.3, 0.7}});
    CHECK(inflate(set, kInf).is_full_line());

    const PredictionRule rule = constant_rule(set);
    const PredictionRule wide = inflate(rule, 0.3);
    CHECK(wide.stored(0) == IntervalUnion{{-0.3, 2.3}});

    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int it = 0; it < 2000; ++it) {
        const double lo = u(rng), hi = lo + std::abs(u(rng));
        const IntervalUnion big = inflate(set, hi), small = inflate(set, lo);
        // every point of the smaller set lies in the larger one
        for (const auto& c : small) CHECK(contains_bracket(big, c.lo, c.hi));
    }
}

TEST_CASE("split indices") {
    const Split s = split_indices(100, 0.75, 5);
    CHECK(s.train.size() == 75);
    CHECK(s.calibration.size() == 25);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.calibration.begin(), s.calibration.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
    CHECK(split_indices(100, 0.75, 5).train == s.train);
    CHECK(split_indices(100, 0.75, 6).train != s.train);
    CHECK(split_indices(2, 0.99, 1).calibration.size() == 1);
    CHECK(split_indices(10, 0.01, 1).train.size() == 1);
}

TEST_CASE("tiny calibration set yields the whole line") {
    const Dataset data = gen_model_c(10, 4);
    FitSettings settings;
    settings.kernel.bandwidth = std::vector<double>{5.0};
    const ConformalResult res = split_conformal(data, 0.1, 0.75, settings, 9);
    CHECK(res.calibration.n2 == 3);
    CHECK(res.calibration.threshold == kInf);
    const std::vector<double> x{0.3};
    CHECK(res.rule.set_at(x).is_full_line());
}

TEST_CASE("one-cell local calibration equals the global one") {
    const Dataset data = gen_model_a(600, 5);
    FitSettings settings;
    settings.grid = linear_grid(-1.5, 1.5, 13);
    const ConformalResult global = split_conformal(data, 0.1, 0.75, settings, 17);
    const LocalConformalResult local =
        local_split_conformal(data, Partition::single(1), 0.1, 0.75, settings, 17);
    REQUIRE(local.cells.size() == 1);
    CHECK(local.cells[0].threshold == global.calibration.threshold);
    for (double x = -1.5; x <= 1.5; x += 0.1) {
        const std::vector<double> pt{x};
        CHECK(local.rule.set_at(pt) == global.rule.set_at(pt));
    }
}

TEST_CASE("a cell with three calibration points gets an infinite threshold") {
    std::vector<Observation> obs;
    for (int i = 0; i < 40; ++i) obs.push_back({{-1.0 + 0.01 * i}, 0, 1});
    for (int i = 0; i < 3; ++i) obs.push_back({{1.0 + 0.01 * i}, 0, 1});
    const Dataset calib(obs);
    const PredictionRule rule({{-1.0}, {1.0}}, {IntervalUnion{{0, 1}}, IntervalUnion{{0, 1}}}, {1, 1});
    const Partition part = Partition::equal_width(-1.5, 1.5, 2);
    const auto cells = calibrate_local(rule, calib, part, 0.1);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].threshold == 0.0);
    CHECK(cells[1].threshold == kInf);
    const PredictionRule applied = apply_local(rule, part, cells);
    const std::vector<double> left{-1.0}, right{1.0};
    CHECK(applied.set_at(left) == IntervalUnion{{0, 1}});
    CHECK(applied.set_at(right).is_full_line());
}

TEST_CASE("an exact oracle rule needs almost no inflation") {
    // Y ~ U[0, 1] exact outcomes: [0, 0.9] holds 90% of the mass.
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> ys;
        for (int i = 0; i < 2000; ++i) ys.push_back(u(rng));
        const CalibrationResult c = calibrate(constant_rule(IntervalUnion{{0, 0.9}}), Dataset(exact_points(ys)), 0.1);
        worst = std::max(worst, std::abs(c.threshold));
    }
    CHECK(worst < 0.03);
}

TEST_CASE("differential adjustment") {
    const PredictionRule rule = constant_rule(IntervalUnion{{0, 1}});

    SUBCASE("symmetric misses") {
        std::vector<double> ys = interior(1800);
        for (int i = 1; i <= 100; ++i) {
            ys.push_back(-i / 100.0);
            ys.push_back(1 + i / 100.0);
        }
        const auto calib = exact_points(ys);
        const DifferentialResult d = differential_adjust(rule, calib, 0.02);
        CHECK(d.threshold == doctest::Approx(0.81));
        REQUIRE(d.adjustment.size() == 2);
        CHECK(d.adjustment[0] == doctest::Approx(d.threshold).epsilon(0.02));
        CHECK(d.adjustment[1] == doctest::Approx(d.threshold).epsilon(0.02));
    }
    SUBCASE("misses only above") {
        std::vector<double> ys = interior(1800);
        for (int i = 1; i <= 200; ++i) ys.push_back(1 + i / 100.0);
        const DifferentialResult d = differential_adjust(rule, exact_points(ys), 0.05);
        REQUIRE(d.adjustment.size() == 2);
        CHECK(d.adjustment[0] == 0.0);
        CHECK(d.adjustment[1] == doctest::Approx(1.01));
        CHECK(d.rule.stored(0) == IntervalUnion{{0, 2.01}});
    }
    SUBCASE("already covering") {
        const DifferentialResult d = differential_adjust(rule, exact_points(interior(50)), 0.1);
        CHECK(d.threshold < 0);
        for (double w : d.adjustment) CHECK(w == 0.0);
    }
    SUBCASE("random calibration sets keep coverage and never exceed the symmetric norm") {
        std::mt19937_64 rng(24);
        std::normal_distribution<double> z(0.5, 1.0);
        const PredictionRule two = constant_rule(IntervalUnion{{-1, 0}, {1, 2}});
        for (int it = 0; it < 50; ++it) {
            std::vector<Observation> calib;
            for (int i = 0; i < 200; ++i) {
                const double y = z(rng);
                calib.push_back({{0.0}, y - 0.1 * (i % 3), y});
            }
            const DifferentialResult d = differential_adjust(two, calib, 0.1);
            double norm = 0.0;
            for (double w : d.adjustment) {
                CHECK(w >= 0.0);
                norm += w * w;
            }
            CHECK(std::sqrt(norm) <= std::max(d.threshold, 0.0) * std::sqrt(4.0) + 1e-12);
            std::size_t covered = 0;
            for (const auto& o : calib) covered += contains_bracket(d.rule.stored(0), o.y_lo, o.y_hi) ? 1 : 0;
            CHECK(covered >= conformal_rank(calib.size(), 0.1));
        }
    }
}
