#include "ivcp/baseline.hpp"

#include "ivcp/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ivcp {

double QuantileFit::operator()(double x) const {
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * x + *it;
    return v;
}

double pinball_loss(std::span<const double> y, std::span<const double> fitted, double level) {
    if (y.size() != fitted.size()) throw std::invalid_argument("pinball loss: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - fitted[i];
        s += r >= 0.0 ? level * r : (level - 1.0) * r;
    }
    return s;
}

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Vertex descent for min_beta sum_i rho_tau(y_i - z_i . beta) with z_i the
// scaled monomials of x_i.
class VertexDescent {
public:
    VertexDescent(Matrix z, Vector y, double tau) : z_(std::move(z)), y_(std::move(y)), tau_(tau) {}

    Vector solve(std::vector<Eigen::Index> basis) {
        const Eigen::Index n = z_.rows(), p = z_.cols();
        basis_ = std::move(basis);
        std::vector<std::uint8_t> in_basis(static_cast<std::size_t>(n), 0);
        for (auto b : basis_) in_basis[static_cast<std::size_t>(b)] = 1;
        factor();

        const std::size_t max_steps = 50 * static_cast<std::size_t>(n) + 100;
        for (std::size_t step = 0; step < max_steps; ++step) {
            const Vector r = y_ - z_ * beta_;
            const double scale = r.cwiseAbs().sum() / static_cast<double>(n) + 1.0;

            // Look for the first edge (basis slot, sign) with negative slope.
            Eigen::Index leave = -1;
            Vector dir;
            Vector u;
            double slope = 0.0;
            for (Eigen::Index b = 0; b < p && leave < 0; ++b) {
                const Vector col = inv_.col(b);
                const Vector zc = z_ * col;
                for (double sigma : {1.0, -1.0}) {
                    double s = sigma > 0 ? 1.0 - tau_ : tau_;
                    for (Eigen::Index i = 0; i < n; ++i) {
                        if (in_basis[static_cast<std::size_t>(i)]) continue;
                        const double ui = sigma * zc(i);
                        if (r(i) > 0.0 || (r(i) == 0.0 && ui < 0.0))
                            s -= tau_ * ui;
                        else
                            s += (1.0 - tau_) * ui;
                    }
                    if (s < -1e-12 * scale) {
                        leave = b;
                        dir = sigma * col;
                        u = sigma * zc;
                        slope = s;
                        break;
                    }
                }
            }
            if (leave < 0) break;

            // Exact line search: walk the breakpoints until the slope turns nonnegative.
            std::vector<std::pair<double, Eigen::Index>> breaks;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (in_basis[static_cast<std::size_t>(i)] || u(i) == 0.0) continue;
                const double t = r(i) / u(i);
                if (t > 0.0) breaks.emplace_back(t, i);
            }
            std::sort(breaks.begin(), breaks.end());
            Eigen::Index enter = -1;
            for (const auto& [t, i] : breaks) {
                slope += std::abs(u(i));
                if (slope >= 0.0) {
                    enter = i;
                    break;
                }
            }
            if (enter < 0) break; // unbounded direction cannot occur for tau in (0,1)

            in_basis[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leave)])] = 0;
            in_basis[static_cast<std::size_t>(enter)] = 1;
            basis_[static_cast<std::size_t>(leave)] = enter;
            factor();
        }
        return beta_;
    }

private:
    void factor() {
        const Eigen::Index p = z_.cols();
        Matrix zb(p, p);
        Vector yb(p);
        for (Eigen::Index k = 0; k < p; ++k) {
            zb.row(k) = z_.row(basis_[static_cast<std::size_t>(k)]);
            yb(k) = y_(basis_[static_cast<std::size_t>(k)]);
        }
        Eigen::PartialPivLU<Matrix> lu(zb);
        inv_ = lu.inverse();
        beta_ = lu.solve(yb);
    }

    Matrix z_;
    Vector y_;
    double tau_;
    std::vector<Eigen::Index> basis_;
    Matrix inv_;
    Vector beta_;
};

double binomial(int n, int k) {
    double c = 1.0;
    for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    return c;
}

} // namespace

QuantileFit fit_pinball(const Dataset& data, QuantileTarget target, double level, int degree) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("quantile level must lie in (0, 1)");
    if (degree < 0) throw ConfigError("polynomial degree must be >= 0");
    const std::size_t n = data.size();
    const auto p = static_cast<std::size_t>(degree) + 1;

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = target == QuantileTarget::lower ? data[i].y_lo : data[i].y_hi;

    QuantileFit fit;
    fit.target = target;
    fit.level = level;
    fit.degree = degree;

    if (degree == 0) {
        const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-12));
        std::vector<double> s = y;
        const std::size_t idx = std::clamp<std::size_t>(k, 1, n) - 1;
        std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(idx), s.end());
        fit.coefficients = {s[idx]};
        return fit;
    }

    if (data.dim() != 1) throw DataError("polynomial quantile fit needs exactly one covariate");
    if (n <= p) throw DataError("too few observations for the polynomial degree");

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = data[i].x[0];
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<std::size_t> distinct; // first index of each distinct x
    for (std::size_t i : order)
        if (distinct.empty() || x[distinct.back()] != x[i]) distinct.push_back(i);
    if (distinct.size() < p) throw DataError("degenerate design: too few distinct covariate values");

    double centre = 0.0;
    for (double v : x) centre += v;
    centre /= static_cast<double>(n);
    double spread = 0.0;
    for (double v : x) spread = std::max(spread, std::abs(v - centre));

    const auto pi = static_cast<Eigen::Index>(p);
    Matrix z(static_cast<Eigen::Index>(n), pi);
    Vector yy(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (x[i] - centre) / spread;
        double pw = 1.0;
        for (Eigen::Index k = 0; k < pi; ++k, pw *= t) z(static_cast<Eigen::Index>(i), k) = pw;
        yy(static_cast<Eigen::Index>(i)) = y[i];
    }

    // Start from points spread evenly over the distinct covariate values.
    std::vector<Eigen::Index> basis;
    for (std::size_t k = 0; k < p; ++k) {
        const std::size_t pos = k * (distinct.size() - 1) / (p - 1);
        basis.push_back(static_cast<Eigen::Index>(distinct[pos]));
    }
    const Vector a = VertexDescent(std::move(z), std::move(yy), level).solve(std::move(basis));

    // sum_k a_k ((x - c)/s)^k expanded in powers of x.
    fit.coefficients.assign(p, 0.0);
    for (int k = 0; k <= degree; ++k) {
        const double ak = a(k) / std::pow(spread, k);
        for (int j = 0; j <= k; ++j)
            fit.coefficients[static_cast<std::size_t>(j)] += ak * binomial(k, j) * std::pow(-centre, k - j);
    }
    return fit;
}

QuantileRule quantile_rule(const Dataset& data, double alpha, int degree, const Grid& grid) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (grid.empty()) throw ConfigError("grid is empty");
    QuantileRule out;
    out.lower = fit_pinball(data, QuantileTarget::lower, alpha / 2.0, degree);
    out.upper = fit_pinball(data, QuantileTarget::upper, 1.0 - alpha / 2.0, degree);
    std::vector<IntervalUnion> sets;
    sets.reserve(grid.size());
    for (const auto& g : grid) {
        const double xg = g.empty() ? 0.0 : g[0];
        double lo = out.lower(xg), hi = out.upper(xg);
        if (hi < lo) {
            lo = hi = 0.5 * (lo + hi);
            ++out.crossings;
        }
        sets.push_back(IntervalUnion{Interval{lo, hi}});
    }
    out.rule = PredictionRule(grid, std::move(sets), std::vector<std::uint8_t>(grid.size(), 1));
    out.rule.provenance["method"] = "quantile";
    out.rule.provenance["degree"] = degree;
    out.rule.provenance["alpha"] = alpha;
    out.rule.provenance["lower_coefficients"] = out.lower.coefficients;
    out.rule.provenance["upper_coefficients"] = out.upper.coefficients;
    out.rule.provenance["crossings"] = out.crossings;
    return out;
}

ConformalQuantileResult conformalize_quantile_rule(const Dataset& data, double alpha, int degree,
                                                   double split_frac, std::uint64_t seed, const Grid& grid) {
    ConformalQuantileResult out;
    out.split = split_indices(data.size(), split_frac, seed);
    out.fitted = quantile_rule(data.subset(out.split.train), alpha, degree, grid);
    out.calibration = calibrate(out.fitted.rule, data.subset(out.split.calibration), alpha);
    out.calibration.seed = seed;
    out.calibration.calibration_indices = out.split.calibration;
    out.rule = inflate(out.fitted.rule, out.calibration.threshold);
    out.rule.provenance["threshold"] = json_real(out.calibration.threshold);
    out.rule.provenance["split_seed"] = seed;
    return out;
}

} // namespace ivcp
