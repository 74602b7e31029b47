#include "ivcp/estimator.hpp"

#include "ivcp/errors.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ivcp {

namespace {

constexpr double kGaussianCut = 3.0;

// 1 / (Phi(3) - Phi(-3)) / sqrt(2 pi)
double truncated_gaussian_scale() {
    static const double scale =
        1.0 / (std::erf(kGaussianCut / std::sqrt(2.0)) * std::sqrt(2.0 * M_PI));
    return scale;
}

} // namespace

std::string to_string(KernelFamily family) {
    switch (family) {
    case KernelFamily::epanechnikov: return "epanechnikov";
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::gaussian_truncated: return "gaussian-truncated";
    }
    return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "epanechnikov") return KernelFamily::epanechnikov;
    if (name == "uniform") return KernelFamily::uniform;
    if (name == "gaussian-truncated") return KernelFamily::gaussian_truncated;
    throw ConfigError("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
    if (bandwidth.empty()) throw ConfigError("kernel bandwidth is empty");
    for (double h : bandwidth) {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kernel bandwidth must be positive");
    }
}

double kernel_profile(KernelFamily family, double t) {
    const double a = std::abs(t);
    switch (family) {
    case KernelFamily::epanechnikov:
        return a <= 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
    case KernelFamily::uniform:
        return a <= 1.0 ? 0.5 : 0.0;
    case KernelFamily::gaussian_truncated:
        return a <= kGaussianCut ? truncated_gaussian_scale() * std::exp(-0.5 * t * t) : 0.0;
    }
    return 0.0;
}

double kernel_value(const KernelSpec& spec, std::span<const double> u) {
    if (u.size() != spec.bandwidth.size()) {
        throw std::invalid_argument("kernel argument has dimension " + std::to_string(u.size()) +
                                    ", expected " + std::to_string(spec.bandwidth.size()));
    }
    double k = 1.0;
    for (double t : u) {
        k *= kernel_profile(spec.family, t);
        if (k == 0.0) break;
    }
    return k;
}

WeightVector weights_at(const Dataset& data, std::span<const double> x, const KernelSpec& spec) {
    if (x.size() != data.dim() || spec.bandwidth.size() != data.dim()) {
        throw std::invalid_argument("query point, bandwidth and data dimensions disagree");
    }
    WeightVector out;
    out.weights.resize(data.size());
    std::vector<double> u(data.dim());
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& xi = data[i].x;
        for (std::size_t j = 0; j < u.size(); ++j) u[j] = (x[j] - xi[j]) / spec.bandwidth[j];
        const double k = kernel_value(spec, u);
        out.weights[i] = k;
        total += k;
    }
    if (total > 0.0) {
        for (double& w : out.weights) w /= total;
    } else {
        out.empty_neighborhood = true;
        std::fill(out.weights.begin(), out.weights.end(), 0.0);
    }
    return out;
}

double containment_prob(const Dataset& data, const IntervalUnion& set, const WeightVector& w) {
    if (w.empty_neighborhood) throw EmptyNeighborhoodError("no observation near the query point");
    if (w.weights.size() != data.size()) throw std::invalid_argument("weight vector size mismatch");
    double p = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (w.weights[i] > 0.0 && contains_bracket(set, data[i].y_lo, data[i].y_hi)) {
            p += w.weights[i];
        }
    }
    return std::min(p, 1.0);
}

double containment_prob(const Dataset& data, const IntervalUnion& set,
                        std::span<const double> x, const KernelSpec& spec) {
    return containment_prob(data, set, weights_at(data, x, spec));
}

KernelSpec default_bandwidth(const Dataset& data, double constant, KernelFamily family) {
    const std::size_t n = data.size();
    if (n < 2) throw DataError("rule-of-thumb bandwidth needs at least two observations");
    if (!(constant > 0.0)) throw ConfigError("bandwidth constant must be positive");
    const std::size_t d = data.dim();
    KernelSpec spec;
    spec.family = family;
    spec.bandwidth.assign(d, 1.0);
    const double rate = std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(d)));
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& o : data.observations()) mean += o.x[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& o : data.observations()) ss += (o.x[j] - mean) * (o.x[j] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd > 0.0) spec.bandwidth[j] = constant * sd * rate;
    }
    return spec;
}

KernelSpec KernelConfig::resolve(const Dataset& training) const {
    if (bandwidth) {
        KernelSpec spec{family, *bandwidth};
        spec.validate();
        if (spec.bandwidth.size() != training.dim()) {
            throw ConfigError("bandwidth has " + std::to_string(spec.bandwidth.size()) +
                              " entries but the data has " + std::to_string(training.dim()) +
                              " covariates");
        }
        return spec;
    }
    return default_bandwidth(training, rule_constant, family);
}

} // namespace ivcp
