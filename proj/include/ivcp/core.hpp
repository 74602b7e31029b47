#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ivcp {

// Closed interval [lo, hi]; lo == hi is a single point.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

/**
 * Finite union of closed, pairwise disjoint intervals kept in increasing
 * order: intervals()[m].hi < intervals()[m + 1].lo.
 *
 * The whole real line is the single interval (-inf, +inf).
 */
class IntervalUnion {
public:
    IntervalUnion() = default;

    // Equivalent to normalize_union(raw).
    explicit IntervalUnion(std::span<const Interval> raw);
    IntervalUnion(std::initializer_list<Interval> raw);

    static IntervalUnion full_line();

    const std::vector<Interval>& intervals() const { return intervals_; }
    std::size_t size() const { return intervals_.size(); }
    bool empty() const { return intervals_.empty(); }
    bool is_full_line() const;

    auto begin() const { return intervals_.begin(); }
    auto end() const { return intervals_.end(); }
    const Interval& operator[](std::size_t m) const { return intervals_[m]; }

    bool operator==(const IntervalUnion&) const = default;

private:
    friend IntervalUnion normalize_union(std::span<const Interval> raw);

    std::vector<Interval> intervals_;
};

// Sorts, then merges overlapping or touching intervals. Throws
// std::invalid_argument when some interval has lo > hi (or a NaN end).
IntervalUnion normalize_union(std::span<const Interval> raw);

// Lebesgue measure; +inf for unbounded sets.
double volume(const IntervalUnion& set);

// Lebesgue measure of (A \ B) u (B \ A).
double sym_diff_volume(const IntervalUnion& a, const IntervalUnion& b);

// True iff [y_lo, y_hi] lies inside a single component of the set.
bool contains_bracket(const IntervalUnion& set, double y_lo, double y_hi);

bool contains_point(const IntervalUnion& set, double y);

// Component-wise union of two sets, normalized.
IntervalUnion set_union(const IntervalUnion& a, const IntervalUnion& b);

// --------------------------------------------------------------------------

// One observed unit: covariates plus the bracket known to contain the
// latent outcome. Exact outcomes have y_lo == y_hi.
struct Observation {
    std::vector<double> x;
    double y_lo = 0.0;
    double y_hi = 0.0;
};

/**
 * Immutable sample of observations sharing one covariate dimension.
 *
 * An optional latent channel carries the unobserved outcome for simulated
 * data. It is for diagnostics only; no estimator reads it.
 */
class Dataset {
public:
    explicit Dataset(std::vector<Observation> observations,
                     std::vector<double> latent = {});

    std::size_t size() const { return observations_.size(); }
    std::size_t dim() const { return dim_; }

    const Observation& operator[](std::size_t i) const { return observations_[i]; }
    std::span<const Observation> observations() const { return observations_; }

    bool has_latent() const { return !latent_.empty(); }
    std::span<const double> latent() const { return latent_; }

    // Rows in the given order; throws std::out_of_range on a bad index and
    // DataError when the selection is empty.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<Observation> observations_;
    std::vector<double> latent_;
    std::size_t dim_ = 0;
};

} // namespace ivcp
