#include "ivcp/sim.hpp"

#include "ivcp/baseline.hpp"
#include "ivcp/errors.hpp"
#include "ivcp/io.hpp"
#include "ivcp/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cctype>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

namespace ivcp {

std::string to_string(Model model) {
    switch (model) {
    case Model::A: return "A";
    case Model::B: return "B";
    case Model::C: return "C";
    case Model::example1: return "example1";
    }
    return "?";
}

Model model_from_string(const std::string& name) {
    if (name == "A" || name == "a") return Model::A;
    if (name == "B" || name == "b") return Model::B;
    if (name == "C" || name == "c") return Model::C;
    if (name == "example1") return Model::example1;
    throw ConfigError("unknown model '" + name + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

double design_f(double x) { return 2.0 * (x - 1.0) * (x - 1.0) * (x + 1.0); }

double design_g(double x) { return x >= -0.5 ? 4.0 * std::sqrt(x + 0.5) : 0.0; }

double design_variance(double x) { return 0.25 + std::abs(x); }

namespace {

double mixture_outcome(double x, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> z(0.0, 1.0);
    const double centre = coin(rng) ? design_f(x) + design_g(x) : design_f(x) - design_g(x);
    return centre + std::sqrt(design_variance(x)) * z(rng);
}

// 20% of outcomes become unit-width integer brackets, the rest are exact.
Observation fixed_censoring(double x, double y, std::mt19937_64& rng) {
    std::bernoulli_distribution censored(0.2);
    if (censored(rng)) {
        const double lo = std::floor(y);
        return {{x}, lo, lo + 1.0};
    }
    return {{x}, y, y};
}

} // namespace

Dataset gen_model_a(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.5, 1.5);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Observation> obs;
    std::vector<double> latent;
    obs.reserve(n);
    latent.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ux(rng);
        const double y = mixture_outcome(x, rng);
        const double e1 = std::abs(z(rng)), e2 = std::abs(z(rng));
        obs.push_back({{x}, y - e1, y + e2});
        latent.push_back(y);
    }
    return Dataset(std::move(obs), std::move(latent));
}

Dataset gen_model_b(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.5, 1.5);
    std::vector<Observation> obs;
    std::vector<double> latent;
    obs.reserve(n);
    latent.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ux(rng);
        const double y = mixture_outcome(x, rng);
        obs.push_back(fixed_censoring(x, y, rng));
        latent.push_back(y);
    }
    return Dataset(std::move(obs), std::move(latent));
}

Dataset gen_model_c(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.5, 1.5);
    std::gamma_distribution<double> chi2(0.75, 2.0); // chi-square with 1.5 df
    std::vector<Observation> obs;
    std::vector<double> latent;
    obs.reserve(n);
    latent.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ux(rng);
        const double y = design_f(x) + chi2(rng);
        obs.push_back(fixed_censoring(x, y, rng));
        latent.push_back(y);
    }
    return Dataset(std::move(obs), std::move(latent));
}

Dataset gen_example1(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution wide(0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Observation> obs;
    std::vector<double> latent;
    obs.reserve(n);
    latent.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = wide(rng) ? 2.0 : 1.0;
        obs.push_back({{0.0}, 0.0, hi});
        latent.push_back(hi * u(rng));
    }
    return Dataset(std::move(obs), std::move(latent));
}

Dataset generate(Model model, std::size_t n, std::uint64_t seed) {
    switch (model) {
    case Model::A: return gen_model_a(n, seed);
    case Model::B: return gen_model_b(n, seed);
    case Model::C: return gen_model_c(n, seed);
    case Model::example1: return gen_example1(n, seed);
    }
    throw ConfigError("unknown model");
}

Dataset impute_midpoint(const Dataset& data) {
    std::vector<Observation> obs(data.observations().begin(), data.observations().end());
    for (auto& o : obs) o.y_lo = o.y_hi = 0.5 * (o.y_lo + o.y_hi);
    return Dataset(std::move(obs), std::vector<double>(data.latent().begin(), data.latent().end()));
}

double coverage(const PredictionRule& rule, const Dataset& eval) {
    std::size_t hit = 0;
    for (const auto& o : eval.observations())
        if (rule.defined_at(o.x) && contains_bracket(rule.set_at(o.x), o.y_lo, o.y_hi)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(eval.size());
}

double latent_coverage(const PredictionRule& rule, const Dataset& eval) {
    if (!eval.has_latent()) throw DataError("evaluation data has no latent outcomes");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < eval.size(); ++i)
        if (rule.defined_at(eval[i].x) && contains_point(rule.set_at(eval[i].x), eval.latent()[i])) ++hit;
    return static_cast<double>(hit) / static_cast<double>(eval.size());
}

std::vector<double> binned_coverage(const PredictionRule& rule, const Dataset& eval, double lo, double hi,
                                    std::size_t bins) {
    const Partition partition = Partition::equal_width(lo, hi, bins);
    std::vector<std::size_t> hit(bins, 0), total(bins, 0);
    for (const auto& o : eval.observations()) {
        const std::size_t k = partition.cell_of(std::span<const double>(o.x).first(1));
        ++total[k];
        if (rule.defined_at(o.x) && contains_bracket(rule.set_at(o.x), o.y_lo, o.y_hi)) ++hit[k];
    }
    std::vector<double> out(bins);
    for (std::size_t k = 0; k < bins; ++k)
        out[k] = total[k] == 0 ? std::numeric_limits<double>::quiet_NaN()
                               : static_cast<double>(hit[k]) / static_cast<double>(total[k]);
    return out;
}

double coverage(const PredictionRule& rule, const ModelSpec& model, std::size_t n_eval, std::uint64_t seed) {
    return coverage(rule, generate(model.model, n_eval, seed));
}

double integrated_volume(const PredictionRule& rule, const Grid& x_grid) {
    if (x_grid.empty()) throw ConfigError("volume grid is empty");
    if (x_grid.front().size() != 1) throw ConfigError("integrated volume needs a one-dimensional grid");
    auto vol = [&](const Point& x) { return rule.defined_at(x) ? volume(rule.set_at(x)) : 0.0; };
    double total = 0.0;
    double prev = vol(x_grid.front());
    for (std::size_t k = 1; k < x_grid.size(); ++k) {
        const double cur = vol(x_grid[k]);
        total += 0.5 * (prev + cur) * (x_grid[k][0] - x_grid[k - 1][0]);
        prev = cur;
    }
    return total;
}

void ExperimentConfig::validate() const {
    if (models.empty()) throw ConfigError("no models selected");
    if (methods.empty()) throw ConfigError("no methods selected");
    if (reps == 0) throw ConfigError("reps must be >= 1");
    if (n < 4) throw ConfigError("sample size must be >= 4");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(split_frac > 0.0 && split_frac < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    if (n_eval == 0) throw ConfigError("n_eval must be >= 1");
    if (local_bins == 0) throw ConfigError("local_bins must be >= 1");
    if (!(support_lo < support_hi)) throw ConfigError("support bounds must be ordered");
    for (const auto& m : methods) {
        if (m == "conformal" || m == "local" || m == "differential" || m == "raw" || m == "imputed") continue;
        if (m.size() >= 2 && m[0] == 'q' && std::all_of(m.begin() + 1, m.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; })) continue;
        throw ConfigError("unknown method '" + m + "'");
    }
    SolverConfig s = fit.solver;
    s.alpha = alpha;
    s.validate();
}

RepSeeds rep_seeds(std::uint64_t master, Model model, std::size_t rep) {
    const std::uint64_t base = derive_seed(master, static_cast<std::uint64_t>(model) + 1, rep);
    return {derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
}

bool uses_kernel_fit(const std::string& m) {
    return m == "conformal" || m == "local" || m == "differential" || m == "raw";
}

struct CellOutput {
    std::vector<MethodRecord> records;
    std::vector<double> seconds;
};

CellOutput run_cell(const ExperimentConfig& cfg, Model model, std::size_t rep) {
    const RepSeeds seeds = rep_seeds(cfg.seed, model, rep);
    const Dataset data = generate(model, cfg.n, seeds.data);
    const Dataset eval = generate(model, cfg.n_eval, seeds.eval);
    const Split split = split_indices(data.size(), cfg.split_frac, seeds.split);
    const Dataset train = data.subset(split.train);
    const Dataset calib = data.subset(split.calibration);

    FitSettings fs = cfg.fit;
    fs.solver.alpha = cfg.alpha;
    fs.threads = 1;

    std::optional<FittedRule> fitted;
    double fit_seconds = 0.0;
    if (std::any_of(cfg.methods.begin(), cfg.methods.end(), uses_kernel_fit)) {
        const auto t = Clock::now();
        fitted = fit_rule(train, fs);
        fit_seconds = seconds_since(t);
    }

    CellOutput out;
    for (const auto& m : cfg.methods) {
        const auto t = Clock::now();
        PredictionRule rule;
        double threshold = 0.0;
        if (m == "conformal") {
            const auto cal = calibrate(fitted->rule, calib, cfg.alpha);
            threshold = cal.threshold;
            rule = inflate(fitted->rule, threshold);
        } else if (m == "local") {
            const Partition partition = Partition::equal_width(cfg.support_lo, cfg.support_hi, cfg.local_bins);
            const auto cells = calibrate_local(fitted->rule, calib, partition, cfg.alpha);
            threshold = -std::numeric_limits<double>::infinity();
            for (const auto& c : cells) threshold = std::max(threshold, c.threshold);
            rule = apply_local(fitted->rule, partition, cells);
        } else if (m == "differential") {
            auto res = differential_adjust(fitted->rule, calib.observations(), cfg.alpha);
            threshold = res.threshold;
            rule = std::move(res.rule);
        } else if (m == "raw") {
            rule = fitted->rule;
        } else if (m == "imputed") {
            const FittedRule f = fit_rule(impute_midpoint(train), fs);
            const auto cal = calibrate(f.rule, impute_midpoint(calib), cfg.alpha);
            threshold = cal.threshold;
            rule = inflate(f.rule, threshold);
        } else {
            const int degree = std::stoi(m.substr(1));
            const QuantileRule q = quantile_rule(train, cfg.alpha, degree, fs.grid);
            const auto cal = calibrate(q.rule, calib, cfg.alpha);
            threshold = cal.threshold;
            rule = inflate(q.rule, threshold);
        }
        MethodRecord r;
        r.model = model;
        r.rep = rep;
        r.method = m;
        r.seeds = seeds;
        r.threshold = threshold;
        r.coverage = coverage(rule, eval);
        r.latent_coverage = latent_coverage(rule, eval);
        r.volume = integrated_volume(rule, cfg.volume_grid);
        r.bin_coverage = binned_coverage(rule, eval, cfg.support_lo, cfg.support_hi, cfg.local_bins);
        out.records.push_back(std::move(r));
        out.seconds.push_back(seconds_since(t) + (uses_kernel_fit(m) ? fit_seconds : 0.0));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::size_t cells = config.models.size() * config.reps;
    std::vector<CellOutput> outputs(cells);
    parallel_for(cells, config.threads, [&](std::size_t c) {
        outputs[c] = run_cell(config, config.models[c / config.reps], c % config.reps);
    });

    ExperimentReport report;
    report.config = config;
    for (const auto& o : outputs)
        report.records.insert(report.records.end(), o.records.begin(), o.records.end());

    const std::size_t nm = config.methods.size();
    for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
        for (std::size_t k = 0; k < nm; ++k) {
            MethodSummary s;
            s.model = config.models[mi];
            s.method = config.methods[k];
            s.reps = config.reps;
            std::vector<double> cov, lat, vol;
            std::vector<std::vector<double>> bins(config.local_bins);
            for (std::size_t rep = 0; rep < config.reps; ++rep) {
                const auto& o = outputs[mi * config.reps + rep];
                const auto& r = o.records[k];
                cov.push_back(r.coverage);
                lat.push_back(r.latent_coverage);
                vol.push_back(r.volume);
                for (std::size_t b = 0; b < config.local_bins; ++b)
                    if (!std::isnan(r.bin_coverage[b])) bins[b].push_back(r.bin_coverage[b]);
                s.seconds += o.seconds[k];
            }
            s.coverage_mean = mean_of(cov);
            s.coverage_sd = sd_of(cov);
            s.latent_coverage_mean = mean_of(lat);
            s.volume_mean = mean_of(vol);
            s.volume_sd = sd_of(vol);
            for (const auto& b : bins)
                s.bin_coverage_mean.push_back(b.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(b));
            report.summaries.push_back(std::move(s));
        }
    }
    return report;
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
    out << "model,rep,method,data_seed,split_seed,eval_seed,coverage,latent_coverage,volume,threshold\n";
    for (const auto& r : report.records) {
        out << to_string(r.model) << ',' << r.rep << ',' << r.method << ',' << r.seeds.data << ','
            << r.seeds.split << ',' << r.seeds.eval << ',' << format_double(r.coverage) << ','
            << format_double(r.latent_coverage) << ',' << format_double(r.volume) << ','
            << format_double(r.threshold) << '\n';
    }
}

void write_report_long_csv(const ExperimentReport& report, std::ostream& out) {
    out << "model,rep,method,metric,bin,value\n";
    for (const auto& r : report.records) {
        const std::string head = to_string(r.model) + ',' + std::to_string(r.rep) + ',' + r.method + ',';
        out << head << "coverage,," << format_double(r.coverage) << '\n';
        out << head << "latent_coverage,," << format_double(r.latent_coverage) << '\n';
        out << head << "volume,," << format_double(r.volume) << '\n';
        out << head << "threshold,," << format_double(r.threshold) << '\n';
        for (std::size_t b = 0; b < r.bin_coverage.size(); ++b)
            out << head << "bin_coverage," << b << ',' << format_double(r.bin_coverage[b]) << '\n';
    }
}

nlohmann::json report_summary_json(const ExperimentReport& report) {
    const auto& c = report.config;
    nlohmann::json j;
    nlohmann::json models = nlohmann::json::array();
    for (auto m : c.models) models.push_back(to_string(m));
    j["config"] = {{"models", models},
                   {"methods", c.methods},
                   {"reps", c.reps},
                   {"n", c.n},
                   {"alpha", c.alpha},
                   {"split_frac", c.split_frac},
                   {"seed", c.seed},
                   {"n_eval", c.n_eval},
                   {"local_bins", c.local_bins},
                   {"support", {c.support_lo, c.support_hi}},
                   {"volume_grid_points", c.volume_grid.size()}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : report.summaries) {
        nlohmann::json bins = nlohmann::json::array();
        for (double b : s.bin_coverage_mean) bins.push_back(std::isnan(b) ? nlohmann::json() : nlohmann::json(b));
        rows.push_back({{"model", to_string(s.model)},
                        {"method", s.method},
                        {"reps", s.reps},
                        {"coverage_mean", s.coverage_mean},
                        {"coverage_sd", s.coverage_sd},
                        {"latent_coverage_mean", s.latent_coverage_mean},
                        {"volume_mean", s.volume_mean},
                        {"volume_sd", s.volume_sd},
                        {"bin_coverage_mean", bins},
                        {"seconds", s.seconds}});
    }
    j["summaries"] = rows;
    return j;
}

} // namespace ivcp
