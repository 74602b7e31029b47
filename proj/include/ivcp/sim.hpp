#pragma once

#include "ivcp/conformal.hpp"
#include "ivcp/core.hpp"
#include "ivcp/rule.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ivcp {

enum class Model { A, B, C, example1 };

std::string to_string(Model model);
Model model_from_string(const std::string& name); // "A", "B", "C", "example1"

struct ModelSpec {
    Model model = Model::A;
    std::size_t n = 2500;
    std::uint64_t seed = 0;
    double alpha = 0.1;
};

// Stream derivation: splitmix64 applied to the mixed inputs.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Location, spread and noise-scale curves of the simulation designs.
double design_f(double x);
double design_g(double x);
double design_variance(double x);

// Covariate ~ U[-1.5, 1.5]; latent outcome a two-component normal mixture
// N(f +- g, variance); brackets [y - |e1|, y + |e2|].
Dataset gen_model_a(std::size_t n, std::uint64_t seed);
// Model A outcomes; 20% of rows become [floor(y), floor(y) + 1], the rest exact.
Dataset gen_model_b(std::size_t n, std::uint64_t seed);
// y = f(x) + chi-square(1.5) noise, censored as in model B.
Dataset gen_model_c(std::size_t n, std::uint64_t seed);
// Constant covariate 0; brackets (0, 1) or (0, 2) with equal probability.
Dataset gen_example1(std::size_t n, std::uint64_t seed);

Dataset generate(Model model, std::size_t n, std::uint64_t seed);

// Brackets replaced by their midpoints (zero-width).
Dataset impute_midpoint(const Dataset& data);

// Fraction of brackets inside rule(x); masked points count as misses.
double coverage(const PredictionRule& rule, const Dataset& eval);
// Fraction of latent outcomes inside rule(x); needs the latent channel.
double latent_coverage(const PredictionRule& rule, const Dataset& eval);
// Bracket coverage per equal-width bin of the first covariate on [lo, hi];
// NaN for bins without evaluation points.
std::vector<double> binned_coverage(const PredictionRule& rule, const Dataset& eval, double lo, double hi,
                                    std::size_t bins);

inline constexpr std::size_t kDefaultEvalSize = 5000;

// Fresh n_eval-point sample from the model, then coverage().
double coverage(const PredictionRule& rule, const ModelSpec& model, std::size_t n_eval, std::uint64_t seed);

// Trapezoid rule over a sorted one-dimensional grid of volume(rule(x));
// masked points contribute zero.
double integrated_volume(const PredictionRule& rule, const Grid& x_grid);

// Method names: conformal, local, q2, q3 (any qN), differential, raw
// (uncalibrated fit), imputed (fit and calibrate on midpoints).
struct ExperimentConfig {
    std::vector<Model> models{Model::A, Model::B, Model::C};
    std::vector<std::string> methods{"conformal", "local", "q2", "q3"};
    std::size_t reps = 100;
    std::size_t n = 2500;
    double alpha = 0.1;
    double split_frac = kDefaultSplitFraction;
    std::uint64_t seed = 20240601;
    std::size_t n_eval = kDefaultEvalSize;
    std::size_t local_bins = 5;
    double support_lo = -1.5;
    double support_hi = 1.5;
    FitSettings fit;
    Grid volume_grid = default_grid();
    unsigned threads = 1; // repetitions run in parallel

    void validate() const;
};

struct RepSeeds {
    std::uint64_t data = 0;
    std::uint64_t split = 0;
    std::uint64_t eval = 0;
};

// Seeds of one (model, rep) cell; independent of the method list.
RepSeeds rep_seeds(std::uint64_t master, Model model, std::size_t rep);

struct MethodRecord {
    Model model = Model::A;
    std::size_t rep = 0;
    std::string method;
    RepSeeds seeds;
    double coverage = 0.0;
    double latent_coverage = 0.0;
    double volume = 0.0;
    double threshold = 0.0;
    std::vector<double> bin_coverage;
};

struct MethodSummary {
    Model model = Model::A;
    std::string method;
    std::size_t reps = 0;
    double coverage_mean = 0.0;
    double coverage_sd = 0.0;
    double latent_coverage_mean = 0.0;
    double volume_mean = 0.0;
    double volume_sd = 0.0;
    std::vector<double> bin_coverage_mean;
    double seconds = 0.0; // wall time spent in this method, fits included
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<MethodRecord> records; // ordered by model, rep, method
    std::vector<MethodSummary> summaries;
};

// Runs every (model, rep) cell: generate, split, fit once for the
// kernel-based methods, calibrate each method and evaluate on a fresh sample.
ExperimentReport run_experiment(const ExperimentConfig& config);

// One row per model x rep x method; deterministic given the configuration.
void write_report_csv(const ExperimentReport& report, std::ostream& out);
// Long format: model, rep, method, metric, bin, value.
void write_report_long_csv(const ExperimentReport& report, std::ostream& out);
nlohmann::json report_summary_json(const ExperimentReport& report);

} // namespace ivcp
