#pragma once

#include "ivcp/core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivcp {

enum class KernelFamily { epanechnikov, uniform, gaussian_truncated };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Product kernel with one bandwidth per covariate.
struct KernelSpec {
    KernelFamily family = KernelFamily::epanechnikov;
    std::vector<double> bandwidth;

    // Throws ConfigError unless every bandwidth is finite and > 0.
    void validate() const;
};

// Univariate profile K0, normalized to integrate to one:
//   epanechnikov        0.75 (1 - t^2) on |t| <= 1
//   uniform             0.5 on |t| <= 1
//   gaussian_truncated  standard normal density restricted to |t| <= 3
double kernel_profile(KernelFamily family, double t);

// prod_j K0(u_j); throws std::invalid_argument on a dimension mismatch.
double kernel_value(const KernelSpec& spec, std::span<const double> u);

struct WeightVector {
    std::vector<double> weights;
    // Set when every kernel value is zero; weights are then all zero.
    bool empty_neighborhood = false;
};

// Normalized kernel weights K((x - X_i)/h) / sum_j K((x - X_j)/h).
WeightVector weights_at(const Dataset& data, std::span<const double> x, const KernelSpec& spec);

// Kernel estimate of P([Y_lo, Y_hi] inside C | X = x). Throws
// EmptyNeighborhoodError when no observation has positive weight at x.
double containment_prob(const Dataset& data, const IntervalUnion& set,
                        std::span<const double> x, const KernelSpec& spec);

// Same quantity from precomputed weights.
double containment_prob(const Dataset& data, const IntervalUnion& set, const WeightVector& w);

inline constexpr double kDefaultBandwidthConstant = 1.5;

// h_j = c * sd(X_j) * n^(-1/(4+d)); a covariate with zero spread gets h_j = 1.
// Requires n >= 2.
KernelSpec default_bandwidth(const Dataset& data, double constant = kDefaultBandwidthConstant,
                             KernelFamily family = KernelFamily::epanechnikov);

// Kernel choice that may defer the bandwidth to the training data.
struct KernelConfig {
    KernelFamily family = KernelFamily::epanechnikov;
    std::optional<std::vector<double>> bandwidth; // empty: rule of thumb
    double rule_constant = kDefaultBandwidthConstant;

    KernelSpec resolve(const Dataset& training) const;
};

} // namespace ivcp
