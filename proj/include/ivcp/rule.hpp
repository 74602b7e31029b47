#pragma once

#include "ivcp/core.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ivcp {

using Point = std::vector<double>;
using Grid = std::vector<Point>;

// Finite reals as JSON numbers, infinities as "inf" / "-inf" (JSON has no
// infinite numbers). NaN becomes null.
inline nlohmann::json json_real(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return nullptr;
    return v > 0 ? "inf" : "-inf";
}

// count equispaced points on [lo, hi] of a single covariate.
Grid linear_grid(double lo, double hi, std::size_t count);

// Axis-aligned box [lo_j, hi_j) in every coordinate; infinite ends allowed.
struct Cell {
    std::vector<double> lo;
    std::vector<double> hi;

    bool contains(std::span<const double> x) const;
};

/**
 * Partition of the covariate space into pairwise disjoint boxes.
 *
 * equal_width() builds K bins on [lo, hi] of one covariate and stretches
 * the two outer bins to infinity so every point falls in exactly one cell.
 */
class Partition {
public:
    Partition() = default;
    explicit Partition(std::vector<Cell> cells);

    static Partition equal_width(double lo, double hi, std::size_t bins);
    static Partition single(std::size_t dim);

    std::size_t size() const { return cells_.size(); }
    const std::vector<Cell>& cells() const { return cells_; }

    // Index of the cell holding x; nullopt when no cell does.
    std::optional<std::size_t> find(std::span<const double> x) const;
    // Like find(), but throws DataError when x is not covered.
    std::size_t cell_of(std::span<const double> x) const;

private:
    std::vector<Cell> cells_;
};

/**
 * A map x -> IntervalUnion, stored on a covariate grid. Queries between grid
 * points use the nearest grid point (Euclidean distance, lower index on
 * ties). Grid points can be masked as undefined.
 *
 * A rule may also carry per-cell offsets: the set returned at x is then the
 * stored set inflated by the offset of the partition cell holding x itself.
 * This is how locally calibrated rules stay exact near cell boundaries.
 */
class PredictionRule {
public:
    PredictionRule() = default;
    PredictionRule(Grid grid, std::vector<IntervalUnion> sets, std::vector<std::uint8_t> defined);

    const Grid& grid() const { return grid_; }
    const std::vector<IntervalUnion>& sets() const { return sets_; }
    const std::vector<std::uint8_t>& defined() const { return defined_; }
    std::size_t dim() const { return grid_.empty() ? 0 : grid_.front().size(); }

    std::size_t nearest(std::span<const double> x) const;
    bool defined_at(std::span<const double> x) const;

    // Throws UndefinedRuleError at masked points.
    IntervalUnion set_at(std::span<const double> x) const;

    // Stored set at grid point g, without any per-cell offset.
    const IntervalUnion& stored(std::size_t g) const { return sets_.at(g); }

    struct CellOffsets {
        Partition partition;
        std::vector<double> offsets; // +inf means the whole line
    };
    const std::optional<CellOffsets>& cell_offsets() const { return cell_offsets_; }
    void set_cell_offsets(CellOffsets offsets);

    // Free-form record of how the rule was produced (configuration, seeds).
    nlohmann::json provenance = nlohmann::json::object();

private:
    Grid grid_;
    std::vector<IntervalUnion> sets_;
    std::vector<std::uint8_t> defined_;
    std::optional<CellOffsets> cell_offsets_;
    bool sorted_1d_ = false;
};

// Each component [lo, hi] becomes [lo - theta, hi + theta]; components that
// turn empty are dropped, overlaps merged. theta = +inf gives the full line.
IntervalUnion inflate(const IntervalUnion& set, double theta);

// Smallest shift w (up to rounding) with lo - w <= y, resp. hi + w >= y, as
// evaluated in floating point. Comparing a shift against these agrees
// exactly with membership in the grown interval; both are <= 0 when the
// point already lies on the inner side.
double lower_shift(double lo, double y);
double upper_shift(double hi, double y);

} // namespace ivcp
