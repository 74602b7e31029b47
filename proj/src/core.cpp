#include "ivcp/core.hpp"

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

IntervalUnion::IntervalUnion(std::span<const Interval> raw)
    : IntervalUnion(normalize_union(raw)) {}

IntervalUnion::IntervalUnion(std::initializer_list<Interval> raw)
    : IntervalUnion(std::span<const Interval>(raw.begin(), raw.size())) {}

IntervalUnion IntervalUnion::full_line() {
    IntervalUnion u;
    u.intervals_.push_back({-kInf, kInf});
    return u;
}

bool IntervalUnion::is_full_line() const {
    return intervals_.size() == 1 && intervals_[0].lo == -kInf && intervals_[0].hi == kInf;
}

IntervalUnion normalize_union(std::span<const Interval> raw) {
    std::vector<Interval> sorted(raw.begin(), raw.end());
    for (const auto& iv : sorted) {
        if (!(iv.lo <= iv.hi)) {
            throw std::invalid_argument("malformed interval [" + std::to_string(iv.lo) + ", " +
                                        std::to_string(iv.hi) + "]");
        }
    }
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) {
        return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });

    IntervalUnion out;
    auto& merged = out.intervals_;
    for (const auto& iv : sorted) {
        if (!merged.empty() && iv.lo <= merged.back().hi) {
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        } else {
            merged.push_back(iv);
        }
    }
    return out;
}

double volume(const IntervalUnion& set) {
    double total = 0.0;
    for (const auto& iv : set) total += iv.length();
    return total;
}

double sym_diff_volume(const IntervalUnion& a, const IntervalUnion& b) {
    // Sweep over all endpoints; each elementary segment contributes its
    // length when exactly one of the sets covers it.
    std::vector<double> cuts;
    cuts.reserve(2 * (a.size() + b.size()));
    for (const auto& iv : a) { cuts.push_back(iv.lo); cuts.push_back(iv.hi); }
    for (const auto& iv : b) { cuts.push_back(iv.lo); cuts.push_back(iv.hi); }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto covers = [](const IntervalUnion& s, double lo, double hi) {
        // Segments never straddle an endpoint, so testing containment of the
        // whole segment is enough.
        return contains_bracket(s, lo, hi);
    };

    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k];
        const double hi = cuts[k + 1];
        if (covers(a, lo, hi) != covers(b, lo, hi)) total += hi - lo;
    }
    return total;
}

bool contains_bracket(const IntervalUnion& set, double y_lo, double y_hi) {
    if (!(y_lo <= y_hi)) {
        throw std::invalid_argument("bracket with y_lo > y_hi");
    }
    const auto& ivs = set.intervals();
    // Last component whose left end is <= y_lo.
    auto it = std::upper_bound(ivs.begin(), ivs.end(), y_lo,
                               [](double v, const Interval& iv) { return v < iv.lo; });
    if (it == ivs.begin()) return false;
    --it;
    return y_hi <= it->hi;
}

bool contains_point(const IntervalUnion& set, double y) {
    return contains_bracket(set, y, y);
}

IntervalUnion set_union(const IntervalUnion& a, const IntervalUnion& b) {
    std::vector<Interval> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return normalize_union(all);
}

// --------------------------------------------------------------------------

Dataset::Dataset(std::vector<Observation> observations, std::vector<double> latent)
    : observations_(std::move(observations)), latent_(std::move(latent)) {
    if (observations_.empty()) throw DataError("dataset is empty");
    dim_ = observations_.front().x.size();
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const auto& o = observations_[i];
        if (o.x.size() != dim_) {
            throw DataError("observation " + std::to_string(i) + " has dimension " +
                            std::to_string(o.x.size()) + ", expected " + std::to_string(dim_));
        }
        if (!(o.y_lo <= o.y_hi) || !std::isfinite(o.y_lo) || !std::isfinite(o.y_hi)) {
            throw DataError("observation " + std::to_string(i) + " has an invalid bracket");
        }
    }
    if (!latent_.empty() && latent_.size() != observations_.size()) {
        throw DataError("latent channel length does not match the observations");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Observation> rows;
    std::vector<double> lat;
    rows.reserve(indices.size());
    for (std::size_t i : indices) {
        rows.push_back(observations_.at(i));
        if (has_latent()) lat.push_back(latent_[i]);
    }
    return Dataset(std::move(rows), std::move(lat));
}

} // namespace ivcp
