#pragma once

#include "ivcp/conformal.hpp"
#include "ivcp/sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ivcp {

// Equal-width bins of the first covariate; the outer bins extend to infinity.
struct PartitionSpec {
    double lo = -1.5;
    double hi = 1.5;
    std::size_t bins = 5;

    Partition build() const { return Partition::equal_width(lo, hi, bins); }
};

struct GridSpec {
    double lo = -1.5;
    double hi = 1.5;
    std::size_t points = 61;

    Grid build() const { return linear_grid(lo, hi, points); }
};

/**
 * Everything a command needs, parsed from a JSON file. Every key is
 * optional; unknown keys are rejected so typos surface as ConfigError.
 *
 * {
 *   "alpha": 0.1, "split_frac": 0.75, "seed": 20240601, "threads": 1,
 *   "kernel": {"family": "epanechnikov", "bandwidth": null, "rule_constant": 1.5},
 *   "solver": {"psi": 0 | "auto", "max_components": 2, "weight_grid": 1e-4},
 *   "grid": {"lo": -1.5, "hi": 1.5, "points": 61},
 *   "partition": {"lo": -1.5, "hi": 1.5, "bins": 5},
 *   "experiment": {"models": ["A","B","C"], "methods": ["conformal","local","q2","q3"],
 *                  "reps": 100, "n": 2500, "n_eval": 5000},
 *   "bracket_map": {...}
 * }
 */
struct RunConfig {
    double alpha = 0.1;
    double split_frac = kDefaultSplitFraction;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    KernelConfig kernel;
    SolverConfig solver;
    bool auto_psi = false;
    GridSpec grid;
    PartitionSpec partition;
    std::vector<Model> models{Model::A, Model::B, Model::C};
    std::vector<std::string> methods{"conformal", "local", "q2", "q3"};
    std::size_t reps = 100;
    std::size_t n = 2500;
    std::size_t n_eval = kDefaultEvalSize;
    nlohmann::json bracket_map; // null when absent

    void validate() const;

    FitSettings fit_settings() const;
    ExperimentConfig experiment() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

} // namespace ivcp
