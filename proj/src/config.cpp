#include "ivcp/config.hpp"

#include "ivcp/errors.hpp"
#include "ivcp/io.hpp"

#include <set>

namespace ivcp {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

} // namespace

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(split_frac > 0.0 && split_frac < 1.0)) throw ConfigError("split_frac must lie in (0, 1)");
    if (kernel.bandwidth) KernelSpec{kernel.family, *kernel.bandwidth}.validate();
    if (!(kernel.rule_constant > 0.0)) throw ConfigError("rule_constant must be > 0");
    SolverConfig s = solver;
    s.alpha = alpha;
    s.validate();
    if (grid.points == 0 || !(grid.lo <= grid.hi)) throw ConfigError("invalid grid");
    if (partition.bins == 0 || !(partition.lo < partition.hi)) throw ConfigError("invalid partition");
    experiment().validate();
    if (!bracket_map.is_null()) bracket_map_from_json(bracket_map);
}

FitSettings RunConfig::fit_settings() const {
    FitSettings f;
    f.kernel = kernel;
    f.solver = solver;
    f.solver.alpha = alpha;
    f.auto_psi = auto_psi;
    f.grid = grid.build();
    f.threads = threads;
    return f;
}

ExperimentConfig RunConfig::experiment() const {
    ExperimentConfig e;
    e.models = models;
    e.methods = methods;
    e.reps = reps;
    e.n = n;
    e.alpha = alpha;
    e.split_frac = split_frac;
    e.seed = seed;
    e.n_eval = n_eval;
    e.local_bins = partition.bins;
    e.support_lo = partition.lo;
    e.support_hi = partition.hi;
    e.fit = fit_settings();
    e.fit.threads = 1;
    e.volume_grid = grid.build();
    e.threads = threads;
    return e;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    try {
        reject_unknown(j,
                       {"alpha", "split_frac", "seed", "threads", "kernel", "solver", "grid", "partition",
                        "experiment", "bracket_map"},
                       "run config");
        c.alpha = j.value("alpha", c.alpha);
        c.split_frac = j.value("split_frac", c.split_frac);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        if (j.contains("kernel")) {
            const auto& k = j.at("kernel");
            reject_unknown(k, {"family", "bandwidth", "rule_constant"}, "kernel");
            if (k.contains("family")) c.kernel.family = kernel_family_from_string(k.at("family").get<std::string>());
            if (k.contains("bandwidth") && !k.at("bandwidth").is_null())
                c.kernel.bandwidth = k.at("bandwidth").get<std::vector<double>>();
            c.kernel.rule_constant = k.value("rule_constant", c.kernel.rule_constant);
        }
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            reject_unknown(s, {"psi", "max_components", "weight_grid"}, "solver");
            if (s.contains("psi")) {
                if (s.at("psi").is_string()) {
                    if (s.at("psi").get<std::string>() != "auto") throw ConfigError("psi must be a number or \"auto\"");
                    c.auto_psi = true;
                } else {
                    c.solver.psi = s.at("psi").get<double>();
                }
            }
            c.solver.max_components = s.value("max_components", c.solver.max_components);
            c.solver.weight_grid = s.value("weight_grid", c.solver.weight_grid);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            reject_unknown(g, {"lo", "hi", "points"}, "grid");
            c.grid.lo = g.value("lo", c.grid.lo);
            c.grid.hi = g.value("hi", c.grid.hi);
            c.grid.points = g.value("points", c.grid.points);
        }
        if (j.contains("partition")) {
            const auto& p = j.at("partition");
            reject_unknown(p, {"lo", "hi", "bins"}, "partition");
            c.partition.lo = p.value("lo", c.partition.lo);
            c.partition.hi = p.value("hi", c.partition.hi);
            c.partition.bins = p.value("bins", c.partition.bins);
        }
        if (j.contains("experiment")) {
            const auto& e = j.at("experiment");
            reject_unknown(e, {"models", "methods", "reps", "n", "n_eval"}, "experiment");
            if (e.contains("models")) {
                c.models.clear();
                for (const auto& m : e.at("models")) c.models.push_back(model_from_string(m.get<std::string>()));
            }
            if (e.contains("methods")) c.methods = e.at("methods").get<std::vector<std::string>>();
            c.reps = e.value("reps", c.reps);
            c.n = e.value("n", c.n);
            c.n_eval = e.value("n_eval", c.n_eval);
        }
        if (j.contains("bracket_map")) c.bracket_map = j.at("bracket_map");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    json models = json::array();
    for (auto m : c.models) models.push_back(to_string(m));
    return {{"alpha", c.alpha},
            {"split_frac", c.split_frac},
            {"seed", c.seed},
            {"threads", c.threads},
            {"kernel",
             {{"family", to_string(c.kernel.family)},
              {"bandwidth", c.kernel.bandwidth ? json(*c.kernel.bandwidth) : json()},
              {"rule_constant", c.kernel.rule_constant}}},
            {"solver",
             {{"psi", c.auto_psi ? json("auto") : json(c.solver.psi)},
              {"max_components", c.solver.max_components},
              {"weight_grid", c.solver.weight_grid}}},
            {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"points", c.grid.points}}},
            {"partition", {{"lo", c.partition.lo}, {"hi", c.partition.hi}, {"bins", c.partition.bins}}},
            {"experiment",
             {{"models", models}, {"methods", c.methods}, {"reps", c.reps}, {"n", c.n}, {"n_eval", c.n_eval}}},
            {"bracket_map", c.bracket_map}};
}

} // namespace ivcp
