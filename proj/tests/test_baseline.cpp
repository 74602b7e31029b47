#include "ivcp/baseline.hpp"
#include "ivcp/errors.hpp"
#include "ivcp/sim.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace ivcp;

namespace {

Dataset exact_xy(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < x.size(); ++i) obs.push_back({{x[i]}, y[i], y[i]});
    return Dataset(std::move(obs));
}

double loss_of(const std::vector<double>& x, const std::vector<double>& y, const QuantileFit& f, double tau) {
    std::vector<double> fitted;
    for (double v : x) fitted.push_back(f(v));
    return pinball_loss(y, fitted, tau);
}

// Smallest loss over every polynomial interpolating degree + 1 observations:
// an optimum of the linear programme sits at such a vertex.
double vertex_floor(const std::vector<double>& x, const std::vector<double>& y, double tau, int degree) {
    const std::size_t n = x.size(), p = static_cast<std::size_t>(degree) + 1;
    std::vector<std::size_t> pick(p);
    for (std::size_t k = 0; k < p; ++k) pick[k] = k;
    double best = INFINITY;
    while (true) {
        Eigen::MatrixXd a(p, p);
        Eigen::VectorXd b(p);
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a(r, c) = std::pow(x[pick[r]], c);
            b(r) = y[pick[r]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.isInvertible()) {
            const Eigen::VectorXd beta = lu.solve(b);
            QuantileFit f;
            f.coefficients.assign(beta.data(), beta.data() + p);
            best = std::min(best, loss_of(x, y, f, tau));
        }
        std::size_t k = p;
        while (k > 0 && pick[k - 1] == n - p + k - 1) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t j = k; j < p; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

} // namespace

TEST_CASE("pinball loss") {
    const std::vector<double> y{1, 2, 3}, q{2, 2, 2};
    CHECK(pinball_loss(y, q, 0.25) == doctest::Approx(0.75 * 1 + 0.25 * 1));
}

TEST_CASE("degree zero gives the order statistic") {
    const Dataset d = exact_xy({0, 0, 0, 0, 0}, {5, 1, 4, 2, 3});
    CHECK(fit_pinball(d, QuantileTarget::lower, 0.5, 0).coefficients[0] == 3.0);
    CHECK(fit_pinball(d, QuantileTarget::lower, 0.2, 0).coefficients[0] == 1.0);
    CHECK(fit_pinball(d, QuantileTarget::lower, 0.21, 0).coefficients[0] == 2.0);
    const Dataset c = exact_xy({0, 1, 2}, {7, 7, 7});
    CHECK(fit_pinball(c, QuantileTarget::upper, 0.9, 0).coefficients[0] == 7.0);
}

TEST_CASE("vertex descent reaches the linear-programme optimum") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ux(-1.5, 1.5), lvl(0.05, 0.95);
    std::normal_distribution<double> z(0, 1);
    for (int it = 0; it < 60; ++it) {
        const int degree = 1 + it % 3;
        const std::size_t n = 8 + static_cast<std::size_t>(it % 5);
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) {
            x.push_back(ux(rng));
            y.push_back(std::sin(2 * x.back()) + z(rng));
        }
        const double tau = lvl(rng);
        const QuantileFit f = fit_pinball(exact_xy(x, y), QuantileTarget::lower, tau, degree);
        CHECK(loss_of(x, y, f, tau) <= vertex_floor(x, y, tau, degree) + 1e-9);
    }
}

TEST_CASE("quantile first-order condition") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> ux(-1.5, 1.5), u(0, 1);
    for (int degree : {1, 2, 3}) {
        for (double tau : {0.05, 0.5, 0.95}) {
            const std::size_t n = 800;
            std::vector<double> x, y;
            for (std::size_t i = 0; i < n; ++i) {
                x.push_back(ux(rng));
                y.push_back(x.back() * x.back() + u(rng) * (1 + x.back() / 2));
            }
            const QuantileFit f = fit_pinball(exact_xy(x, y), QuantileTarget::lower, tau, degree);
            std::size_t below = 0;
            for (std::size_t i = 0; i < n; ++i) below += y[i] < f(x[i]) - 1e-9 ? 1 : 0;
            const double slack = std::max(2.0, degree + 1.0) / n;
            CHECK(static_cast<double>(below) / n <= tau + 1e-12);
            CHECK(static_cast<double>(below) / n >= tau - slack - 1e-12);
        }
    }
}

TEST_CASE("linear quantile of uniform noise") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> ux(-1.5, 1.5), u(0, 1);
    std::vector<double> x, y;
    for (int i = 0; i < 5000; ++i) {
        x.push_back(ux(rng));
        y.push_back(x.back() + u(rng));
    }
    const QuantileFit f = fit_pinball(exact_xy(x, y), QuantileTarget::upper, 0.9, 1);
    CHECK(f.coefficients[0] == doctest::Approx(0.9).epsilon(0.05));
    CHECK(f.coefficients[1] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("degenerate designs are rejected") {
    const Dataset flat = exact_xy({1, 1, 1, 1}, {1, 2, 3, 4});
    CHECK_THROWS_AS(fit_pinball(flat, QuantileTarget::lower, 0.5, 1), DataError);
    const Dataset tiny = exact_xy({0, 1}, {1, 2});
    CHECK_THROWS_AS(fit_pinball(tiny, QuantileTarget::lower, 0.5, 1), DataError);
    CHECK_THROWS_AS(fit_pinball(tiny, QuantileTarget::lower, 1.0, 0), ConfigError);
}

TEST_CASE("noiseless data collapse onto the curve") {
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(-1.5 + 3.0 * i / 49);
        y.push_back(design_f(x.back()));
    }
    const QuantileRule q = quantile_rule(exact_xy(x, y), 0.1, 3);
    for (std::size_t g = 0; g < q.rule.grid().size(); ++g) {
        const double xg = q.rule.grid()[g][0];
        const IntervalUnion& s = q.rule.stored(g);
        REQUIRE(s.size() == 1);
        CHECK(s[0].lo == doctest::Approx(design_f(xg)).epsilon(1e-7));
        CHECK(s[0].hi == doctest::Approx(design_f(xg)).epsilon(1e-7));
    }
}

TEST_CASE("crossing bounds collapse to the midpoint") {
    std::vector<Observation> obs;
    for (int i = 0; i <= 30; ++i) {
        const double x = 0.6 * i / 30;
        obs.push_back({{x}, 2 * x, 0.5 * x + 1});
    }
    const QuantileRule q = quantile_rule(Dataset(obs), 0.1, 1, {{0.0}, {5.0}});
    CHECK(q.crossings == 1);
    const IntervalUnion& far = q.rule.stored(1);
    REQUIRE(far.size() == 1);
    CHECK(far[0].lo == far[0].hi);
    CHECK(far[0].lo == doctest::Approx(0.5 * (q.lower(5.0) + q.upper(5.0))));
    CHECK(q.rule.stored(0)[0].lo < q.rule.stored(0)[0].hi);
}

TEST_CASE("conformalized cubic baseline covers on the skewed design") {
    double sum = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        const RepSeeds s = rep_seeds(34, Model::C, static_cast<std::size_t>(r));
        const auto res = conformalize_quantile_rule(gen_model_c(2500, s.data), 0.1, 3, 0.75, s.split);
        sum += coverage(res.rule, gen_model_c(5000, s.eval));
    }
    const double mean = sum / reps;
    MESSAGE("mean coverage " << mean);
    CHECK(mean >= 0.88);
    CHECK(mean <= 0.93);
}
