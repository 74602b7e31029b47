#pragma once

#include "ivcp/core.hpp"
#include "ivcp/estimator.hpp"
#include "ivcp/rule.hpp"

#include <vector>

namespace ivcp {

struct SolverConfig {
    double alpha = 0.1;       // miscoverage level
    double psi = 0.0;         // slack subtracted from the coverage target
    int max_components = 2;   // M
    double weight_grid = 1e-4;

    // Throws ConfigError unless alpha in (0,1), psi >= 0, 1 - alpha - psi > 0,
    // M >= 1 and weight_grid > 0.
    void validate() const;

    // Required weighted containment 1 - alpha - psi.
    double target() const { return 1.0 - alpha - psi; }
};

// Weighted sums are compared against the target with this absolute slack so
// that exact ties (e.g. k/n == 0.5) are not lost to summation order.
inline constexpr double kFeasibilityTolerance = 1e-10;

struct WeightedBracket {
    double lo = 0.0;
    double hi = 0.0;
    double weight = 0.0;
};

// Localized sample: brackets with nonnegative weights rescaled to sum to one.
class WeightedBrackets {
public:
    explicit WeightedBrackets(std::vector<WeightedBracket> entries);

    // Keeps the observations with positive weight.
    static WeightedBrackets from_weights(const Dataset& data, const WeightVector& w);

    const std::vector<WeightedBracket>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<WeightedBracket> entries_;
};

// Total weight of brackets contained in the set.
double weighted_containment(const WeightedBrackets& wb, const IntervalUnion& set);

/**
 * Shortest interval [t0, t1] whose weighted containment reaches
 * 1 - alpha - psi. Endpoints are drawn from the bracket ends; ties go to the
 * smaller t0. Runs in O(n log n) with a Fenwick tree over upper ends.
 */
Interval min_interval(const WeightedBrackets& wb, const SolverConfig& cfg);

// Same result by direct O(n^2) scan; kept as the reference implementation.
Interval min_interval_reference(const WeightedBrackets& wb, const SolverConfig& cfg);

/**
 * Shortest union of at most M disjoint intervals whose weighted containment
 * reaches 1 - alpha - psi.
 *
 * Dynamic programme over the sorted bracket ends. For every prefix of the
 * line and every component budget it keeps a Pareto frontier of
 * (weight, length) pairs, thinned so that at most one entry survives per
 * weight_grid cell and every entry already meeting the target counts as
 * equal. The last component is attached by a two-pointer search against a
 * suffix frontier of single intervals. The answer is always feasible; its
 * length is optimal up to the weight_grid discretization.
 */
IntervalUnion min_union(const WeightedBrackets& wb, const SolverConfig& cfg);

inline constexpr std::size_t kBruteForceMaxEndpoints = 16;

// Exhaustive search over all unions of at most M intervals with ends at
// bracket endpoints. Test oracle only; throws std::invalid_argument when the
// instance has more than 16 distinct endpoints.
IntervalUnion brute_force_min_union(const WeightedBrackets& wb, const SolverConfig& cfg);

// Slack rate 0.5 * sqrt(log n / (n * prod_j h_j)).
double auto_psi(std::size_t n, const KernelSpec& spec);

/**
 * Solves min_union at every grid point using kernel weights from `data`.
 * Grid points without any positive kernel weight are masked as undefined.
 * Grid points are processed on `threads` workers (0: all cores).
 */
PredictionRule fit_prediction_rule(const Dataset& data, const Grid& grid, const KernelSpec& spec,
                                   const SolverConfig& cfg, unsigned threads = 1);

} // namespace ivcp
