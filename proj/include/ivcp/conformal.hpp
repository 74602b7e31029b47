#pragma once

#include "ivcp/core.hpp"
#include "ivcp/estimator.hpp"
#include "ivcp/rule.hpp"
#include "ivcp/solver.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ivcp {

// min over components of max(lo - y_lo, y_hi - hi); +inf for the empty set.
// Nonpositive exactly when the bracket lies inside the set.
double score(double y_lo, double y_hi, const IntervalUnion& set);

// Score against rule(x); throws UndefinedRuleError where the rule is masked.
double score(double y_lo, double y_hi, std::span<const double> x, const PredictionRule& rule);

// Rank ceil((1 - alpha)(n2 + 1)) used by the calibration quantile.
std::size_t conformal_rank(std::size_t n2, double alpha);

// k-th smallest score with k = conformal_rank(n2, alpha); +inf when k > n2.
// Throws DataError on an empty list, ConfigError for alpha outside (0, 1).
double conformal_threshold(std::span<const double> scores, double alpha);

// Inflates every stored set by theta (see inflate on sets); the mask,
// provenance and any cell offsets are kept.
PredictionRule inflate(const PredictionRule& rule, double theta);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> calibration;
};

// Seeded random split; floor(frac * n) training points, clamped to [1, n-1].
Split split_indices(std::size_t n, double frac, std::uint64_t seed);

inline constexpr double kDefaultSplitFraction = 0.75;

struct CalibrationResult {
    std::vector<double> scores;
    double threshold = 0.0;
    double alpha = 0.1;
    std::size_t n2 = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> calibration_indices;
};

// 61 equispaced points on [-1.5, 1.5].
Grid default_grid();

struct FitSettings {
    KernelConfig kernel;
    SolverConfig solver;
    bool auto_psi = false; // replace solver.psi by auto_psi(n_train, h)
    Grid grid = default_grid();
    unsigned threads = 1;
};

struct FittedRule {
    PredictionRule rule;
    KernelSpec kernel;
    SolverConfig solver;
};

// Resolves bandwidth and slack on `training`, then solves on the grid.
FittedRule fit_rule(const Dataset& training, const FitSettings& settings);

// Scores of every observation; points where the rule is masked score +inf.
std::vector<double> calibration_scores(const PredictionRule& rule, const Dataset& calibration,
                                       unsigned threads = 1);

CalibrationResult calibrate(const PredictionRule& fitted, const Dataset& calibration, double alpha,
                            unsigned threads = 1);

// One result per cell; cells without calibration points get +inf.
std::vector<CalibrationResult> calibrate_local(const PredictionRule& fitted, const Dataset& calibration,
                                               const Partition& partition, double alpha,
                                               unsigned threads = 1);

// fitted with per-cell offsets taken from the cell thresholds.
PredictionRule apply_local(const PredictionRule& fitted, const Partition& partition,
                           const std::vector<CalibrationResult>& cells);

struct ConformalResult {
    FittedRule fitted;
    PredictionRule rule;
    CalibrationResult calibration;
    Split split;
};

// Fits on the training part of a seeded split at level alpha, scores the
// rest and inflates by the calibration threshold.
ConformalResult split_conformal(const Dataset& data, double alpha, double split_frac,
                                const FitSettings& settings, std::uint64_t seed);

struct LocalConformalResult {
    FittedRule fitted;
    PredictionRule rule;
    std::vector<CalibrationResult> cells;
    Split split;
};

LocalConformalResult local_split_conformal(const Dataset& data, const Partition& partition, double alpha,
                                           double split_frac, const FitSettings& settings,
                                           std::uint64_t seed);

struct DifferentialResult {
    PredictionRule rule;
    // (lower_1, upper_1, ..., lower_M, upper_M): outward shift of each endpoint.
    std::vector<double> adjustment;
    double threshold = 0.0; // symmetric threshold of the same calibration set
};

/**
 * Per-endpoint adjustment: component m of rule(x) becomes
 * [lo_m - w_lower_m, hi_m + w_upper_m]. Looks for a short nonnegative w
 * that still covers at least ceil((1 - alpha)(n2 + 1)) calibration brackets,
 * by coordinate descent started from the symmetric inflation. Each step
 * sets one coordinate to the smallest value keeping the coverage count, so
 * the norm never exceeds that of the symmetric start.
 */
DifferentialResult differential_adjust(const PredictionRule& rule, std::span<const Observation> calibration,
                                       double alpha);

} // namespace ivcp
