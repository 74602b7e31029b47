#include "ivcp/baseline.hpp"
#include "ivcp/config.hpp"
#include "ivcp/conformal.hpp"
#include "ivcp/errors.hpp"
#include "ivcp/io.hpp"
#include "ivcp/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ivcp;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : run_config_from_json(read_json(c.config_path));
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

std::optional<BracketMap> load_bracket_map(const RunConfig& cfg, const std::string& path) {
    if (!path.empty()) return bracket_map_from_json(read_json(path));
    if (!cfg.bracket_map.is_null()) return bracket_map_from_json(cfg.bracket_map);
    return std::nullopt;
}

fs::path prepare_out(const Common& c) {
    fs::path out(c.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory '" + out.string() + "'");
    return out;
}

void write_manifest(const fs::path& out, const std::string& command, const std::vector<std::string>& args,
                    const RunConfig& cfg, const json& seeds, const std::vector<std::string>& outputs) {
    json m = {{"command", command},
              {"arguments", args},
              {"config", to_json(cfg)},
              {"seeds", seeds},
              {"outputs", outputs},
              {"versions", {{"ivcp", kVersion}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}}}};
    write_json(m, out / "manifest.json");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimal-volume prediction sets for interval-censored outcomes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "run configuration (JSON)");
        sub->add_option("--out", common.out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", common.seed, "override the configured seed");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "draw a dataset from a simulation model");
    std::string sim_model = "A";
    std::size_t sim_n = 2500;
    add_common(sim);
    sim->add_option("--model", sim_model, "A, B, C or example1")->capture_default_str();
    sim->add_option("--n", sim_n, "sample size")->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "fit the minimal-volume rule on the training split");
    std::string data_path, map_path;
    bool no_split = false;
    std::optional<std::uint64_t> split_seed;
    add_common(fit);
    fit->add_option("--data", data_path, "input CSV")->required();
    fit->add_option("--bracket-map", map_path, "band-code mapping (JSON)");
    fit->add_flag("--no-split", no_split, "fit on all rows");
    fit->add_option("--split-seed", split_seed, "split seed (default: the run seed)");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "conformalize a fitted rule on the calibration split");
    std::string rule_path;
    bool local = false, differential = false, keep_scores = false;
    add_common(cal);
    cal->add_option("--data", data_path, "input CSV")->required();
    cal->add_option("--rule", rule_path, "fitted rule (JSON)")->required();
    cal->add_option("--bracket-map", map_path, "band-code mapping (JSON)");
    cal->add_option("--split-seed", split_seed, "split seed (default: the run seed)");
    cal->add_flag("--local", local, "one threshold per partition cell");
    cal->add_flag("--differential", differential, "per-endpoint adjustment");
    cal->add_flag("--scores", keep_scores, "store calibration scores");

    // predict
    auto* pred = app.add_subcommand("predict", "evaluate a rule at covariate rows");
    std::string cov_path;
    add_common(pred);
    pred->add_option("--rule", rule_path, "rule (JSON)")->required();
    pred->add_option("--covariates", cov_path, "covariate CSV")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "coverage and volume of a rule on labeled data");
    add_common(eval);
    eval->add_option("--rule", rule_path, "rule (JSON)")->required();
    eval->add_option("--data", data_path, "labeled CSV")->required();
    eval->add_option("--bracket-map", map_path, "band-code mapping (JSON)");

    // report
    auto* rep = app.add_subcommand("report", "run the Monte Carlo experiment");
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const RunConfig cfg = load_config(common);
        const fs::path out = prepare_out(common);

        if (sim->parsed()) {
            const Dataset data = generate(model_from_string(sim_model), sim_n, cfg.seed);
            write_csv(data, out / "data.csv");
            write_manifest(out, "simulate", args, cfg, {{"data", cfg.seed}}, {"data.csv"});
        } else if (fit->parsed()) {
            const Dataset data = read_csv(fs::path(data_path), load_bracket_map(cfg, map_path));
            const std::uint64_t s = split_seed.value_or(cfg.seed);
            Dataset train = data;
            json seeds = json::object();
            if (!no_split) {
                train = data.subset(split_indices(data.size(), cfg.split_frac, s).train);
                seeds["split"] = s;
            }
            const FittedRule f = fit_rule(train, cfg.fit_settings());
            write_json(to_json(f.rule), out / "rule.json");
            write_manifest(out, "fit", args, cfg, seeds, {"rule.json"});
        } else if (cal->parsed()) {
            const Dataset data = read_csv(fs::path(data_path), load_bracket_map(cfg, map_path));
            const std::uint64_t s = split_seed.value_or(cfg.seed);
            const Split split = split_indices(data.size(), cfg.split_frac, s);
            const Dataset calib = data.subset(split.calibration);
            const PredictionRule fitted = rule_from_json(read_json(rule_path));
            json calibration;
            PredictionRule rule;
            if (local) {
                const Partition partition = cfg.partition.build();
                auto cells = calibrate_local(fitted, calib, partition, cfg.alpha, cfg.threads);
                calibration = json::array();
                for (auto& c : cells) {
                    c.seed = s;
                    for (auto& i : c.calibration_indices) i = split.calibration[i];
                    calibration.push_back(to_json(c, keep_scores));
                }
                rule = apply_local(fitted, partition, cells);
            } else if (differential) {
                auto res = differential_adjust(fitted, calib.observations(), cfg.alpha);
                calibration = {{"threshold", json_real(res.threshold)}, {"adjustment", json::array()}};
                for (double w : res.adjustment) calibration["adjustment"].push_back(json_real(w));
                rule = std::move(res.rule);
            } else {
                CalibrationResult c = calibrate(fitted, calib, cfg.alpha, cfg.threads);
                c.seed = s;
                c.calibration_indices = split.calibration;
                calibration = to_json(c, keep_scores);
                rule = inflate(fitted, c.threshold);
                rule.provenance["threshold"] = json_real(c.threshold);
            }
            rule.provenance["split_seed"] = s;
            write_json(to_json(rule), out / "conformal_rule.json");
            write_json(calibration, out / "calibration.json");
            write_manifest(out, "calibrate", args, cfg, {{"split", s}}, {"conformal_rule.json", "calibration.json"});
        } else if (pred->parsed()) {
            const PredictionRule rule = rule_from_json(read_json(rule_path));
            const Grid rows = read_covariates(fs::path(cov_path));
            json predictions = json::array();
            for (const auto& x : rows) {
                if (x.size() != rule.dim()) throw DataError("covariate row has the wrong dimension");
                predictions.push_back(rule.defined_at(x) ? to_json(rule.set_at(x)) : json());
            }
            write_json(predictions, out / "predictions.json");
            std::cout << predictions.dump() << '\n';
            write_manifest(out, "predict", args, cfg, json::object(), {"predictions.json"});
        } else if (eval->parsed()) {
            const PredictionRule rule = rule_from_json(read_json(rule_path));
            const Dataset data = read_csv(fs::path(data_path), load_bracket_map(cfg, map_path));
            json result = {{"n", data.size()}, {"coverage", coverage(rule, data)}};
            if (data.has_latent()) result["latent_coverage"] = latent_coverage(rule, data);
            if (rule.dim() == 1) result["volume"] = json_real(integrated_volume(rule, cfg.grid.build()));
            write_json(result, out / "evaluation.json");
            std::cout << result.dump() << '\n';
            write_manifest(out, "evaluate", args, cfg, json::object(), {"evaluation.json"});
        } else if (rep->parsed()) {
            const ExperimentReport report = run_experiment(cfg.experiment());
            {
                std::ofstream f(out / "report.csv");
                write_report_csv(report, f);
            }
            {
                std::ofstream f(out / "report_long.csv");
                write_report_long_csv(report, f);
            }
            write_json(report_summary_json(report), out / "summary.json");
            write_manifest(out, "report", args, cfg, {{"master", cfg.seed}},
                           {"report.csv", "report_long.csv", "summary.json"});
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const EmptyNeighborhoodError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const UndefinedRuleError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
