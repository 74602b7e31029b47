#include "ivcp/conformal.hpp"

#include "ivcp/errors.hpp"
#include "ivcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ivcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double score(double y_lo, double y_hi, const IntervalUnion& set) {
    double best = kInf;
    for (const auto& iv : set) best = std::min(best, std::max(lower_shift(iv.lo, y_lo), upper_shift(iv.hi, y_hi)));
    return best;
}

double score(double y_lo, double y_hi, std::span<const double> x, const PredictionRule& rule) {
    return score(y_lo, y_hi, rule.set_at(x));
}

std::size_t conformal_rank(std::size_t n2, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    // guard against (1 - alpha)(n2 + 1) landing a hair above an integer
    const double r = (1.0 - alpha) * static_cast<double>(n2 + 1);
    return static_cast<std::size_t>(std::ceil(r - 1e-9));
}

double conformal_threshold(std::span<const double> scores, double alpha) {
    if (scores.empty()) throw DataError("no calibration scores");
    const std::size_t k = conformal_rank(scores.size(), alpha);
    if (k > scores.size()) return kInf;
    std::vector<double> s(scores.begin(), scores.end());
    const std::size_t idx = k == 0 ? 0 : k - 1;
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(idx), s.end());
    return s[idx];
}

PredictionRule inflate(const PredictionRule& rule, double theta) {
    std::vector<IntervalUnion> sets;
    sets.reserve(rule.sets().size());
    for (const auto& s : rule.sets()) sets.push_back(inflate(s, theta));
    PredictionRule out(rule.grid(), std::move(sets), rule.defined());
    if (rule.cell_offsets()) out.set_cell_offsets(*rule.cell_offsets());
    out.provenance = rule.provenance;
    return out;
}

Split split_indices(std::size_t n, double frac, std::uint64_t seed) {
    if (n < 2) throw DataError("splitting needs at least two observations");
    if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto n1 = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
    n1 = std::clamp<std::size_t>(n1, 1, n - 1);
    Split s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n1));
    s.calibration.assign(perm.begin() + static_cast<std::ptrdiff_t>(n1), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.calibration.begin(), s.calibration.end());
    return s;
}

Grid default_grid() { return linear_grid(-1.5, 1.5, 61); }

FittedRule fit_rule(const Dataset& training, const FitSettings& settings) {
    FittedRule f;
    f.kernel = settings.kernel.resolve(training);
    f.solver = settings.solver;
    if (settings.auto_psi) f.solver.psi = auto_psi(training.size(), f.kernel);
    f.solver.validate();
    f.rule = fit_prediction_rule(training, settings.grid, f.kernel, f.solver, settings.threads);
    f.rule.provenance["kernel"] = to_string(f.kernel.family);
    f.rule.provenance["bandwidth"] = f.kernel.bandwidth;
    f.rule.provenance["alpha"] = f.solver.alpha;
    f.rule.provenance["psi"] = f.solver.psi;
    f.rule.provenance["max_components"] = f.solver.max_components;
    f.rule.provenance["weight_grid"] = f.solver.weight_grid;
    f.rule.provenance["n_train"] = training.size();
    return f;
}

std::vector<double> calibration_scores(const PredictionRule& rule, const Dataset& calibration,
                                       unsigned threads) {
    std::vector<double> s(calibration.size());
    parallel_for(calibration.size(), threads, [&](std::size_t i) {
        const auto& o = calibration[i];
        s[i] = rule.defined_at(o.x) ? score(o.y_lo, o.y_hi, rule.set_at(o.x)) : kInf;
    });
    return s;
}

CalibrationResult calibrate(const PredictionRule& fitted, const Dataset& calibration, double alpha,
                            unsigned threads) {
    CalibrationResult r;
    r.alpha = alpha;
    r.scores = calibration_scores(fitted, calibration, threads);
    r.n2 = r.scores.size();
    r.threshold = conformal_threshold(r.scores, alpha);
    return r;
}

std::vector<CalibrationResult> calibrate_local(const PredictionRule& fitted, const Dataset& calibration,
                                               const Partition& partition, double alpha,
                                               unsigned threads) {
    const auto scores = calibration_scores(fitted, calibration, threads);
    std::vector<CalibrationResult> cells(partition.size());
    for (auto& c : cells) c.alpha = alpha;
    for (std::size_t i = 0; i < calibration.size(); ++i) {
        auto& c = cells[partition.cell_of(calibration[i].x)];
        c.scores.push_back(scores[i]);
        c.calibration_indices.push_back(i);
    }
    for (auto& c : cells) {
        c.n2 = c.scores.size();
        c.threshold = c.scores.empty() ? kInf : conformal_threshold(c.scores, alpha);
    }
    return cells;
}

PredictionRule apply_local(const PredictionRule& fitted, const Partition& partition,
                           const std::vector<CalibrationResult>& cells) {
    if (cells.size() != partition.size()) throw std::invalid_argument("one calibration per cell is required");
    PredictionRule out = fitted;
    PredictionRule::CellOffsets offsets{partition, {}};
    for (const auto& c : cells) offsets.offsets.push_back(c.threshold);
    out.set_cell_offsets(std::move(offsets));
    return out;
}

namespace {

void remap_indices(CalibrationResult& r, const Split& split, std::uint64_t seed) {
    r.seed = seed;
    for (auto& i : r.calibration_indices) i = split.calibration[i];
}

} // namespace

ConformalResult split_conformal(const Dataset& data, double alpha, double split_frac,
                                const FitSettings& settings, std::uint64_t seed) {
    ConformalResult out;
    out.split = split_indices(data.size(), split_frac, seed);
    FitSettings s = settings;
    s.solver.alpha = alpha;
    out.fitted = fit_rule(data.subset(out.split.train), s);
    out.calibration = calibrate(out.fitted.rule, data.subset(out.split.calibration), alpha, s.threads);
    out.calibration.seed = seed;
    out.calibration.calibration_indices = out.split.calibration;
    out.rule = inflate(out.fitted.rule, out.calibration.threshold);
    out.rule.provenance["threshold"] = json_real(out.calibration.threshold);
    out.rule.provenance["split_seed"] = seed;
    return out;
}

LocalConformalResult local_split_conformal(const Dataset& data, const Partition& partition, double alpha,
                                           double split_frac, const FitSettings& settings,
                                           std::uint64_t seed) {
    LocalConformalResult out;
    out.split = split_indices(data.size(), split_frac, seed);
    FitSettings s = settings;
    s.solver.alpha = alpha;
    out.fitted = fit_rule(data.subset(out.split.train), s);
    out.cells = calibrate_local(out.fitted.rule, data.subset(out.split.calibration), partition, alpha,
                                s.threads);
    for (auto& c : out.cells) remap_indices(c, out.split, seed);
    out.rule = apply_local(out.fitted.rule, partition, out.cells);
    out.rule.provenance["split_seed"] = seed;
    return out;
}

DifferentialResult differential_adjust(const PredictionRule& rule, std::span<const Observation> calibration,
                                       double alpha) {
    if (calibration.empty()) throw DataError("no calibration observations");
    if (rule.cell_offsets()) throw std::invalid_argument("differential adjustment needs a rule without cell offsets");
    const std::size_t n2 = calibration.size();

    std::size_t m_max = 0;
    for (std::size_t g = 0; g < rule.sets().size(); ++g)
        if (rule.defined()[g]) m_max = std::max(m_max, rule.stored(g).size());

    // req[i][2m], req[i][2m+1]: outward shifts of component m's ends needed
    // to contain bracket i; empty when the rule is masked at x_i.
    std::vector<std::vector<double>> req(n2);
    std::vector<double> scores(n2, kInf);
    for (std::size_t i = 0; i < n2; ++i) {
        const auto& o = calibration[i];
        if (!rule.defined_at(o.x)) continue;
        const auto& set = rule.stored(rule.nearest(o.x));
        scores[i] = score(o.y_lo, o.y_hi, set);
        for (const auto& iv : set) {
            req[i].push_back(lower_shift(iv.lo, o.y_lo));
            req[i].push_back(upper_shift(iv.hi, o.y_hi));
        }
    }

    DifferentialResult out;
    out.threshold = conformal_threshold(scores, alpha);
    const std::size_t k = conformal_rank(n2, alpha);
    if (k > n2 || m_max == 0) {
        out.adjustment.assign(2 * m_max, kInf);
        out.rule = inflate(rule, kInf);
        return out;
    }

    std::vector<double> w(2 * m_max, std::max(out.threshold, 0.0));
    auto covered_by = [&](std::size_t i, std::size_t m) {
        return 2 * m + 1 < req[i].size() && req[i][2 * m] <= w[2 * m] && req[i][2 * m + 1] <= w[2 * m + 1];
    };

    std::vector<double> candidates;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool changed = false;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const std::size_t m = j / 2, other = j ^ 1;
            std::size_t always = 0;
            candidates.clear();
            for (std::size_t i = 0; i < n2; ++i) {
                bool elsewhere = false;
                for (std::size_t mm = 0; mm < m_max && !elsewhere; ++mm)
                    if (mm != m && covered_by(i, mm)) elsewhere = true;
                if (elsewhere) {
                    ++always;
                } else if (2 * m + 1 < req[i].size() && req[i][other] <= w[other]) {
                    candidates.push_back(req[i][j]);
                }
            }
            double next = 0.0;
            if (always < k) {
                const std::size_t need = k - always;
                std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(need - 1),
                                 candidates.end());
                next = std::max(candidates[need - 1], 0.0);
            }
            if (next != w[j]) {
                w[j] = next;
                changed = true;
            }
        }
        if (!changed) break;
    }

    std::vector<IntervalUnion> sets;
    sets.reserve(rule.sets().size());
    for (const auto& set : rule.sets()) {
        std::vector<Interval> grown;
        for (std::size_t m = 0; m < set.size(); ++m)
            grown.push_back({set[m].lo - w[2 * m], set[m].hi + w[2 * m + 1]});
        sets.push_back(normalize_union(grown));
    }
    out.rule = PredictionRule(rule.grid(), std::move(sets), rule.defined());
    out.rule.provenance = rule.provenance;
    out.rule.provenance["adjustment"] = w;
    out.adjustment = std::move(w);
    return out;
}

} // namespace ivcp
