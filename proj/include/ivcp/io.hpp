#pragma once

#include "ivcp/baseline.hpp"
#include "ivcp/conformal.hpp"
#include "ivcp/core.hpp"
#include "ivcp/estimator.hpp"
#include "ivcp/rule.hpp"
#include "ivcp/solver.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ivcp {

// Shortest decimal form that reads back to the same double; "inf", "-inf"
// and "nan" for non-finite values.
std::string format_double(double v);
// Inverse of format_double; throws DataError on malformed text.
double parse_double(const std::string& text);

// Maps survey band codes to brackets. An open-ended band (no upper bound)
// is closed at top_code.
struct BracketMap {
    struct Band {
        std::string code;
        double lower = 0.0;
        std::optional<double> upper;
    };
    std::vector<Band> bands;
    std::optional<double> top_code;

    // Throws ConfigError unless bounds are ordered, bands do not overlap, codes
    // are unique and every band ends up finite.
    void validate() const;
    Interval bracket(const std::string& code) const; // DataError for unknown codes
};

BracketMap bracket_map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BracketMap& map);

/**
 * Reads a header-led CSV. Outcome columns are y_lower and y_upper, or
 * band_code together with a BracketMap; an optional y_latent column fills the
 * diagnostics channel; every other column is a covariate, in file order.
 * Errors name the offending row (1-based, header excluded).
 */
Dataset read_csv(std::istream& in, const std::optional<BracketMap>& map = std::nullopt);
Dataset read_csv(const std::filesystem::path& path, const std::optional<BracketMap>& map = std::nullopt);

// Covariates x1..xd, y_lower, y_upper and y_latent when present.
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Covariate-only CSV (every column is a covariate).
Grid read_covariates(std::istream& in);
Grid read_covariates(const std::filesystem::path& path);

nlohmann::json to_json(const IntervalUnion& set);
IntervalUnion union_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Partition& partition);
Partition partition_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PredictionRule& rule);
PredictionRule rule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CalibrationResult& result, bool include_scores = false);
CalibrationResult calibration_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QuantileFit& fit);
QuantileFit quantile_fit_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

} // namespace ivcp
