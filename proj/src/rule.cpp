#include "ivcp/rule.hpp"

#include "ivcp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ivcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

Grid linear_grid(double lo, double hi, std::size_t count) {
    if (count == 0 || !(lo <= hi)) throw ConfigError("invalid grid bounds or size");
    Grid g;
    g.reserve(count);
    if (count == 1) {
        g.push_back({0.5 * (lo + hi)});
        return g;
    }
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) {
        g.push_back({k + 1 == count ? hi : lo + step * static_cast<double>(k)});
    }
    return g;
}

bool Cell::contains(std::span<const double> x) const {
    if (x.size() != lo.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!(lo[j] <= x[j] && x[j] < hi[j])) return false;
    }
    return true;
}

Partition::Partition(std::vector<Cell> cells) : cells_(std::move(cells)) {
    if (cells_.empty()) throw ConfigError("partition has no cells");
    const std::size_t d = cells_.front().lo.size();
    for (const auto& c : cells_) {
        if (c.lo.size() != d || c.hi.size() != d) throw ConfigError("partition cells disagree on dimension");
        for (std::size_t j = 0; j < d; ++j) {
            if (!(c.lo[j] < c.hi[j])) throw ConfigError("partition cell with empty extent");
        }
    }
    // Pairwise disjointness of half-open boxes: some coordinate separates them.
    for (std::size_t a = 0; a < cells_.size(); ++a) {
        for (std::size_t b = a + 1; b < cells_.size(); ++b) {
            bool separated = false;
            for (std::size_t j = 0; j < d && !separated; ++j) {
                separated = cells_[a].hi[j] <= cells_[b].lo[j] || cells_[b].hi[j] <= cells_[a].lo[j];
            }
            if (!separated) throw ConfigError("partition cells overlap");
        }
    }
}

Partition Partition::equal_width(double lo, double hi, std::size_t bins) {
    if (bins == 0 || !(lo < hi)) throw ConfigError("invalid equal-width partition");
    std::vector<Cell> cells;
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const double a = k == 0 ? -kInf : lo + width * static_cast<double>(k);
        const double b = k + 1 == bins ? kInf : lo + width * static_cast<double>(k + 1);
        cells.push_back(Cell{{a}, {b}});
    }
    return Partition(std::move(cells));
}

Partition Partition::single(std::size_t dim) {
    return Partition({Cell{std::vector<double>(dim, -kInf), std::vector<double>(dim, kInf)}});
}

std::optional<std::size_t> Partition::find(std::span<const double> x) const {
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        if (cells_[k].contains(x)) return k;
    }
    return std::nullopt;
}

std::size_t Partition::cell_of(std::span<const double> x) const {
    if (auto k = find(x)) return *k;
    throw DataError("point not covered by the partition");
}

// --------------------------------------------------------------------------

PredictionRule::PredictionRule(Grid grid, std::vector<IntervalUnion> sets,
                               std::vector<std::uint8_t> defined)
    : grid_(std::move(grid)), sets_(std::move(sets)), defined_(std::move(defined)) {
    if (grid_.empty()) throw ConfigError("prediction rule needs a nonempty grid");
    if (sets_.size() != grid_.size() || defined_.size() != grid_.size()) {
        throw std::invalid_argument("prediction rule arrays disagree in length");
    }
    const std::size_t d = grid_.front().size();
    for (const auto& p : grid_) {
        if (p.size() != d) throw ConfigError("grid points disagree on dimension");
    }
    sorted_1d_ = d == 1 && std::is_sorted(grid_.begin(), grid_.end(),
                                          [](const Point& a, const Point& b) { return a[0] < b[0]; });
}

std::size_t PredictionRule::nearest(std::span<const double> x) const {
    if (x.size() != dim()) throw std::invalid_argument("query dimension does not match the rule grid");
    if (sorted_1d_) {
        auto it = std::lower_bound(grid_.begin(), grid_.end(), x[0],
                                   [](const Point& p, double v) { return p[0] < v; });
        if (it == grid_.begin()) return 0;
        if (it == grid_.end()) return grid_.size() - 1;
        const auto hi = static_cast<std::size_t>(it - grid_.begin());
        const std::size_t lo = hi - 1;
        return (x[0] - grid_[lo][0]) <= (grid_[hi][0] - x[0]) ? lo : hi;
    }
    std::size_t best = 0;
    double best_d = kInf;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double t = x[j] - grid_[g][j];
            d2 += t * t;
        }
        if (d2 < best_d) {
            best_d = d2;
            best = g;
        }
    }
    return best;
}

bool PredictionRule::defined_at(std::span<const double> x) const {
    return defined_[nearest(x)] != 0;
}

IntervalUnion PredictionRule::set_at(std::span<const double> x) const {
    const std::size_t g = nearest(x);
    if (!defined_[g]) throw UndefinedRuleError("prediction rule is undefined near the query point");
    if (!cell_offsets_) return sets_[g];
    const std::size_t k = cell_offsets_->partition.cell_of(x);
    return inflate(sets_[g], cell_offsets_->offsets[k]);
}

void PredictionRule::set_cell_offsets(CellOffsets offsets) {
    if (offsets.offsets.size() != offsets.partition.size()) {
        throw std::invalid_argument("one offset per partition cell is required");
    }
    cell_offsets_ = std::move(offsets);
}

IntervalUnion inflate(const IntervalUnion& set, double theta) {
    if (theta == kInf) return IntervalUnion::full_line();
    if (theta == 0.0 || set.is_full_line()) return set;
    std::vector<Interval> grown;
    grown.reserve(set.size());
    for (const auto& iv : set) {
        const double lo = iv.lo - theta;
        const double hi = iv.hi + theta;
        if (lo <= hi) grown.push_back({lo, hi});
    }
    return normalize_union(grown);
}

double lower_shift(double lo, double y) {
    double w = lo - y;
    if (!(lo - w > y)) return w;
    for (double step = std::nextafter(w, kInf) - w; lo - w > y; step *= 2.0) w += step;
    return lo <= y ? std::min(w, 0.0) : w;
}

double upper_shift(double hi, double y) {
    double w = y - hi;
    if (!(hi + w < y)) return w;
    for (double step = std::nextafter(w, kInf) - w; hi + w < y; step *= 2.0) w += step;
    return y <= hi ? std::min(w, 0.0) : w;
}

} // namespace ivcp
