#include "ivcp/solver.hpp"

#include "ivcp/errors.hpp"
#include "ivcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace ivcp {

void SolverConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(psi >= 0.0) || !std::isfinite(psi)) throw ConfigError("psi must be finite and >= 0");
    if (!(target() > 0.0)) throw ConfigError("1 - alpha - psi must be positive");
    if (max_components < 1) throw ConfigError("max_components must be >= 1");
    if (!(weight_grid > 0.0) || !std::isfinite(weight_grid))
        throw ConfigError("weight_grid must be finite and > 0");
}

WeightedBrackets::WeightedBrackets(std::vector<WeightedBracket> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw DataError("weighted brackets are empty");
    double total = 0.0;
    for (const auto& e : entries_) {
        if (!std::isfinite(e.lo) || !std::isfinite(e.hi) || e.lo > e.hi)
            throw DataError("weighted bracket must be finite with lo <= hi");
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
            throw DataError("bracket weight must be finite and >= 0");
        total += e.weight;
    }
    if (!(total > 0.0)) throw DataError("bracket weights sum to zero");
    for (auto& e : entries_) e.weight /= total;
}

WeightedBrackets WeightedBrackets::from_weights(const Dataset& data, const WeightVector& w) {
    if (w.empty_neighborhood) throw EmptyNeighborhoodError("no observation has positive weight");
    if (w.weights.size() != data.size()) throw std::invalid_argument("weight vector length mismatch");
    std::vector<WeightedBracket> out;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (w.weights[i] > 0.0) out.push_back({data[i].y_lo, data[i].y_hi, w.weights[i]});
    return WeightedBrackets(std::move(out));
}

double weighted_containment(const WeightedBrackets& wb, const IntervalUnion& set) {
    double s = 0.0;
    for (const auto& e : wb.entries())
        if (contains_bracket(set, e.lo, e.hi)) s += e.weight;
    return s;
}

namespace {

// Distinct brackets with summed weights, sorted by (lo, hi).
std::vector<WeightedBracket> aggregate(const WeightedBrackets& wb) {
    std::vector<WeightedBracket> v = wb.entries();
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return std::tie(a.lo, a.hi) < std::tie(b.lo, b.hi);
    });
    std::vector<WeightedBracket> out;
    for (const auto& e : v) {
        if (e.weight <= 0.0) continue;
        if (!out.empty() && out.back().lo == e.lo && out.back().hi == e.hi)
            out.back().weight += e.weight;
        else
            out.push_back(e);
    }
    return out;
}

std::vector<double> distinct_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

int index_of(const std::vector<double>& sorted, double x) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0) {
        while ((std::size_t{1} << (log_ + 1)) <= n) ++log_;
    }
    void add(std::size_t i, double v) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
    }
    // Smallest index r with prefix sum over [0, r] >= target; size() if none.
    std::size_t lower_bound(double target) const {
        std::size_t pos = 0;
        double acc = 0.0;
        for (std::size_t step = std::size_t{1} << log_; step > 0; step >>= 1) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && acc + tree_[next] < target) {
                pos = next;
                acc += tree_[next];
            }
        }
        return pos;
    }

private:
    std::vector<double> tree_;
    std::size_t log_ = 0;
};

} // namespace

Interval min_interval(const WeightedBrackets& wb, const SolverConfig& cfg) {
    cfg.validate();
    const auto brackets = aggregate(wb);
    const double need = cfg.target() - kFeasibilityTolerance;

    std::vector<double> uvals;
    uvals.reserve(brackets.size());
    for (const auto& b : brackets) uvals.push_back(b.hi);
    uvals = distinct_sorted(std::move(uvals));

    Fenwick fw(uvals.size());
    double remaining = 0.0;
    for (const auto& b : brackets) {
        fw.add(static_cast<std::size_t>(index_of(uvals, b.hi)), b.weight);
        remaining += b.weight;
    }

    // brackets are sorted by lo, so each distinct lo starts a run.
    Interval best{0.0, 0.0};
    double best_len = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < brackets.size()) {
        const double a = brackets[i].lo;
        if (remaining < need) break;
        const std::size_t r = fw.lower_bound(need);
        if (r < uvals.size()) {
            const double len = uvals[r] - a;
            if (len < best_len) {
                best_len = len;
                best = {a, uvals[r]};
            }
        }
        for (; i < brackets.size() && brackets[i].lo == a; ++i) {
            fw.add(static_cast<std::size_t>(index_of(uvals, brackets[i].hi)), -brackets[i].weight);
            remaining -= brackets[i].weight;
        }
    }
    if (!std::isfinite(best_len)) throw std::logic_error("no feasible interval found");
    return best;
}

Interval min_interval_reference(const WeightedBrackets& wb, const SolverConfig& cfg) {
    cfg.validate();
    const auto& e = wb.entries();
    std::vector<double> los, his;
    for (const auto& b : e) {
        los.push_back(b.lo);
        his.push_back(b.hi);
    }
    los = distinct_sorted(std::move(los));
    his = distinct_sorted(std::move(his));
    const double need = cfg.target() - kFeasibilityTolerance;

    Interval best{0.0, 0.0};
    double best_len = std::numeric_limits<double>::infinity();
    for (double a : los) {
        for (double b : his) {
            if (b < a) continue;
            double w = 0.0;
            for (const auto& br : e)
                if (br.lo >= a && br.hi <= b) w += br.weight;
            if (w >= need && b - a < best_len) {
                best_len = b - a;
                best = {a, b};
            }
        }
    }
    if (!std::isfinite(best_len)) throw std::logic_error("no feasible interval found");
    return best;
}

namespace {

// Frontier entry: union with weight w and total length len. New candidates
// carry their last component (a, s) and the parent node; existing ones only
// reference their node (a < 0).
struct Cand {
    double w;
    double len;
    std::int32_t node;
    std::int32_t a;
    std::int32_t s;
};

struct Node {
    std::int32_t a;
    std::int32_t s;
    std::int32_t parent;
};

class UnionDp {
public:
    UnionDp(const std::vector<WeightedBracket>& brackets, const SolverConfig& cfg)
        : tau_(cfg.target()), need_(cfg.target() - kFeasibilityTolerance), grid_(cfg.weight_grid),
          m_(cfg.max_components) {
        std::vector<double> all;
        for (const auto& b : brackets) {
            all.push_back(b.lo);
            all.push_back(b.hi);
        }
        pos_ = distinct_sorted(std::move(all));
        k_ = static_cast<int>(pos_.size());
        is_l_.assign(k_, 0);
        is_u_.assign(k_, 0);
        for (const auto& b : brackets) {
            const int l = index_of(pos_, b.lo), u = index_of(pos_, b.hi);
            li_.push_back(l);
            ui_.push_back(u);
            w_.push_back(b.weight);
            is_l_[l] = 1;
            is_u_[u] = 1;
        }
        // rem_[p]: weight of brackets with lo at or after position p.
        rem_.assign(k_ + 1, 0.0);
        std::vector<double> by_lo(k_, 0.0);
        for (std::size_t b = 0; b < w_.size(); ++b) by_lo[li_[b]] += w_[b];
        for (int p = k_ - 1; p >= 0; --p) rem_[p] = rem_[p + 1] + by_lo[p];
        by_hi_order_.resize(w_.size());
        std::iota(by_hi_order_.begin(), by_hi_order_.end(), 0);
        std::stable_sort(by_hi_order_.begin(), by_hi_order_.end(),
                         [&](std::size_t x, std::size_t y) { return ui_[x] < ui_[y]; });
    }

    IntervalUnion solve(double incumbent) {
        incumbent_ = incumbent;
        // Prefix frontiers indexed by s + 1; entry 0 is "before the first position".
        std::vector<std::vector<Cand>> prev(k_ + 1, std::vector<Cand>{{0.0, 0.0, -1, -1, -1}});
        for (int m = 1; m < m_; ++m) prev = next_layer(prev);
        return final_layer(prev);
    }

private:
    bool feasible(double w) const { return w >= need_; }
    double capped(double w) const { return feasible(w) ? tau_ : w; }
    std::int64_t bucket(double w) const {
        return feasible(w) ? std::numeric_limits<std::int64_t>::max()
                           : static_cast<std::int64_t>(std::floor(w / grid_));
    }
    // Weight of brackets with lo >= position p.
    double weight_from(int p) const { return p >= k_ ? 0.0 : rem_[p]; }

    // Pareto thinning; returns entries by ascending weight and length.
    // Entries above the incumbent length or unable to reach the target with
    // the weight still available (`reachable`) are dropped.
    void thin(std::vector<Cand>& v, double reachable) const {
        std::vector<Cand> keep;
        keep.reserve(v.size());
        for (const auto& c : v)
            if (c.len <= incumbent_ && c.w + reachable >= need_) keep.push_back(c);
        std::stable_sort(keep.begin(), keep.end(), [&](const Cand& x, const Cand& y) {
            const double cx = capped(x.w), cy = capped(y.w);
            if (cx != cy) return cx > cy;
            return x.len < y.len;
        });
        v.clear();
        double best_len = std::numeric_limits<double>::infinity();
        for (const auto& c : keep) {
            if (c.len >= best_len) continue;
            best_len = c.len;
            if (!v.empty() && bucket(v.back().w) == bucket(c.w))
                v.back() = c;
            else
                v.push_back(c);
        }
        std::reverse(v.begin(), v.end());
    }

    void materialize(std::vector<Cand>& v) {
        for (auto& c : v) {
            if (c.a < 0) continue;
            nodes_.push_back({c.a, c.s, c.node});
            c.node = static_cast<std::int32_t>(nodes_.size() - 1);
            c.a = -1;
        }
    }

    // W(a, s) for all a, as suffix sums over lo of brackets with hi <= s.
    template <class Visit>
    void sweep_columns(Visit&& visit) const {
        std::vector<double> by_lo(k_, 0.0), suffix(k_ + 1, 0.0);
        std::size_t next = 0;
        for (int s = 0; s < k_; ++s) {
            bool changed = false;
            while (next < by_hi_order_.size() && ui_[by_hi_order_[next]] == s) {
                by_lo[li_[by_hi_order_[next]]] += w_[by_hi_order_[next]];
                ++next;
                changed = true;
            }
            if (!changed) continue;
            for (int p = s; p >= 0; --p) suffix[p] = suffix[p + 1] + by_lo[p];
            visit(s, suffix);
        }
    }

    std::vector<std::vector<Cand>> next_layer(const std::vector<std::vector<Cand>>& prev) {
        std::vector<std::vector<Cand>> cur(k_ + 1);
        cur[0] = prev[0];
        std::vector<std::vector<Cand>> fresh(k_);
        sweep_columns([&](int s, const std::vector<double>& suffix) {
            auto& out = fresh[s];
            for (int a = 0; a <= s; ++a) {
                if (!is_l_[a] || suffix[a] <= 0.0) continue;
                // only start a component where its weight differs from a + 1
                if (a < s && suffix[a] == suffix[a + 1]) continue;
                const double clen = pos_[s] - pos_[a];
                for (const auto& e : prev[a]) out.push_back({e.w + suffix[a], e.len + clen, e.node, a, s});
            }
        });
        for (int s = 0; s < k_; ++s) {
            std::vector<Cand> v = std::move(fresh[s]);
            v.insert(v.end(), cur[s].begin(), cur[s].end());
            v.insert(v.end(), prev[s + 1].begin(), prev[s + 1].end());
            thin(v, weight_from(s + 1));
            materialize(v);
            cur[s + 1] = std::move(v);
        }
        return cur;
    }

    IntervalUnion final_layer(const std::vector<std::vector<Cand>>& prev) {
        double best_len = std::numeric_limits<double>::infinity();
        std::int32_t best_head = -1, best_tail = -1;
        bool found = false;

        for (const auto& e : prev[k_]) {
            if (feasible(e.w) && e.len <= best_len) {
                best_len = e.len;
                best_head = e.node;
                best_tail = -1;
                found = true;
            }
        }

        // Suffix frontier of single components starting at or after a.
        std::vector<Cand> suffix_front;
        for (int a = k_ - 1; a >= 0; --a) {
            if (!is_l_[a]) continue;
            std::vector<Cand> v;
            double w = 0.0;
            for (std::size_t idx : by_hi_order_) {
                if (li_[idx] < a) continue;
                w += w_[idx];
                const int s = ui_[idx];
                if (!v.empty() && v.back().s == s)
                    v.back().w = w;
                else
                    v.push_back({w, pos_[s] - pos_[a], -1, a, s});
            }
            v.insert(v.end(), suffix_front.begin(), suffix_front.end());
            thin(v, 1.0);
            materialize(v);
            suffix_front = std::move(v);

            for (const auto& e1 : prev[a]) {
                const double want = need_ - e1.w;
                auto it = std::lower_bound(suffix_front.begin(), suffix_front.end(), want,
                                           [&](const Cand& c, double x) { return capped(c.w) < x; });
                if (it == suffix_front.end()) continue;
                const double total = e1.len + it->len;
                if (total <= best_len) {
                    best_len = total;
                    best_head = e1.node;
                    best_tail = it->node;
                    found = true;
                }
            }
        }
        if (!found) return {};

        std::vector<Interval> comps;
        if (best_tail >= 0) comps.push_back({pos_[nodes_[best_tail].a], pos_[nodes_[best_tail].s]});
        for (std::int32_t n = best_head; n >= 0; n = nodes_[n].parent)
            comps.push_back({pos_[nodes_[n].a], pos_[nodes_[n].s]});
        return IntervalUnion(std::span<const Interval>(comps));
    }

    double tau_;
    double need_;
    double grid_;
    int m_;
    double incumbent_ = std::numeric_limits<double>::infinity();
    std::vector<double> pos_;
    int k_ = 0;
    std::vector<std::uint8_t> is_l_, is_u_;
    std::vector<int> li_, ui_;
    std::vector<double> w_;
    std::vector<double> rem_;
    std::vector<std::size_t> by_hi_order_;
    std::vector<Node> nodes_;
};

} // namespace

IntervalUnion min_union(const WeightedBrackets& wb, const SolverConfig& cfg) {
    cfg.validate();
    const Interval single = min_interval(wb, cfg);
    const auto brackets = aggregate(wb);
    UnionDp dp(brackets, cfg);
    IntervalUnion out = dp.solve(single.length());
    if (out.empty()) return IntervalUnion{single};
    return out;
}

IntervalUnion brute_force_min_union(const WeightedBrackets& wb, const SolverConfig& cfg) {
    cfg.validate();
    std::vector<double> all;
    for (const auto& e : wb.entries()) {
        all.push_back(e.lo);
        all.push_back(e.hi);
    }
    const auto pos = distinct_sorted(std::move(all));
    if (pos.size() > kBruteForceMaxEndpoints)
        throw std::invalid_argument("brute force limited to 16 distinct endpoints");
    const double need = cfg.target() - kFeasibilityTolerance;
    const int k = static_cast<int>(pos.size());

    IntervalUnion best;
    double best_vol = std::numeric_limits<double>::infinity();
    bool found = false;
    std::vector<Interval> chosen;

    auto lex_less = [](const IntervalUnion& x, const IntervalUnion& y) {
        return std::lexicographical_compare(
            x.begin(), x.end(), y.begin(), y.end(),
            [](const Interval& p, const Interval& q) { return std::tie(p.lo, p.hi) < std::tie(q.lo, q.hi); });
    };

    std::function<void(int)> extend = [&](int first) {
        if (!chosen.empty()) {
            IntervalUnion u{std::span<const Interval>(chosen)};
            if (weighted_containment(wb, u) >= need) {
                const double v = volume(u);
                if (!found || v < best_vol || (v == best_vol && lex_less(u, best))) {
                    best = u;
                    best_vol = v;
                    found = true;
                }
            }
        }
        if (static_cast<int>(chosen.size()) == cfg.max_components) return;
        for (int i = first; i < k; ++i) {
            for (int j = i; j < k; ++j) {
                chosen.push_back({pos[i], pos[j]});
                extend(j + 1);
                chosen.pop_back();
            }
        }
    };
    extend(0);
    if (!found) throw std::logic_error("no feasible union found");
    return best;
}

double auto_psi(std::size_t n, const KernelSpec& spec) {
    if (n < 2) throw ConfigError("auto psi needs at least two observations");
    double prod_h = 1.0;
    for (double h : spec.bandwidth) prod_h *= h;
    const double nd = static_cast<double>(n);
    return 0.5 * std::sqrt(std::log(nd) / (nd * prod_h));
}

PredictionRule fit_prediction_rule(const Dataset& data, const Grid& grid, const KernelSpec& spec,
                                   const SolverConfig& cfg, unsigned threads) {
    cfg.validate();
    spec.validate();
    if (grid.empty()) throw ConfigError("grid is empty");
    for (const auto& g : grid)
        if (g.size() != data.dim()) throw ConfigError("grid point dimension does not match data");

    std::vector<IntervalUnion> sets(grid.size());
    std::vector<std::uint8_t> defined(grid.size(), 0);
    parallel_for(grid.size(), threads, [&](std::size_t g) {
        const WeightVector w = weights_at(data, grid[g], spec);
        if (w.empty_neighborhood) return;
        sets[g] = min_union(WeightedBrackets::from_weights(data, w), cfg);
        defined[g] = 1;
    });
    return PredictionRule(grid, std::move(sets), std::move(defined));
}

} // namespace ivcp
