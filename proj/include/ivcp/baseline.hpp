#pragma once

#include "ivcp/conformal.hpp"
#include "ivcp/core.hpp"
#include "ivcp/rule.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ivcp {

enum class QuantileTarget { lower, upper };

// Polynomial quantile curve in the single covariate.
struct QuantileFit {
    QuantileTarget target = QuantileTarget::lower;
    double level = 0.5;
    int degree = 0;
    std::vector<double> coefficients; // ascending powers of x

    double operator()(double x) const;
};

// Check loss sum_i rho_level(y_i - q_i).
double pinball_loss(std::span<const double> y, std::span<const double> fitted, double level);

/**
 * Minimizes the check loss of y_lo (lower) or y_hi (upper) over polynomials
 * of the given degree in x. Degree 0 returns the order statistic
 * y_(ceil(level * n)). Higher degrees use exact vertex descent: the optimum
 * interpolates degree + 1 observations, and the search moves between such
 * bases along edges that lower the loss.
 *
 * Requires one covariate, n > degree + 1 and at least degree + 1 distinct
 * covariate values (DataError otherwise).
 */
QuantileFit fit_pinball(const Dataset& data, QuantileTarget target, double level, int degree);

struct QuantileRule {
    PredictionRule rule;
    QuantileFit lower;
    QuantileFit upper;
    std::size_t crossings = 0; // grid points where the bounds crossed
};

// [q_lo(alpha/2), q_hi(1 - alpha/2)] on the grid; crossed bounds collapse to
// their midpoint.
QuantileRule quantile_rule(const Dataset& data, double alpha, int degree, const Grid& grid = default_grid());

struct ConformalQuantileResult {
    QuantileRule fitted;
    PredictionRule rule;
    CalibrationResult calibration;
    Split split;
};

// Split, fit quantile_rule on the training part, inflate by the calibration
// threshold of the interval score.
ConformalQuantileResult conformalize_quantile_rule(const Dataset& data, double alpha, int degree,
                                                   double split_frac, std::uint64_t seed,
                                                   const Grid& grid = default_grid());

} // namespace ivcp
