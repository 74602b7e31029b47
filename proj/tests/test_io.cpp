#include "ivcp/config.hpp"
#include "ivcp/errors.hpp"
#include "ivcp/io.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace ivcp;
using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BracketMap income_bands() {
    return bracket_map_from_json(json::parse(R"({
        "bands": [
            {"code": "<15000", "lower": 0, "upper": 15000},
            {"code": "15000-30000", "lower": 15000, "upper": 30000},
            {"code": "30000-60000", "lower": 30000, "upper": 60000},
            {"code": ">60000", "lower": 60000}
        ],
        "top_code": 400000
    })"));
}

} // namespace

TEST_CASE("doubles round trip through text") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(kInf) == "inf");
    CHECK(parse_double("-inf") == -kInf);
    CHECK(std::isnan(parse_double("nan")));
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_double(""), DataError);
}

TEST_CASE("band codes map to brackets") {
    const BracketMap map = income_bands();
    CHECK(map.bracket(">60000") == Interval{60000, 400000});
    CHECK(map.bracket("15000-30000") == Interval{15000, 30000});
    CHECK_THROWS_AS(map.bracket("unknown"), DataError);
    CHECK(bracket_map_from_json(to_json(map)).bracket(">60000") == Interval{60000, 400000});

    BracketMap open = map;
    open.top_code.reset();
    CHECK_THROWS_AS(open.validate(), ConfigError);
    BracketMap overlap = map;
    overlap.bands[1].lower = 10000;
    CHECK_THROWS_AS(overlap.validate(), ConfigError);
}

TEST_CASE("csv ingestion") {
    std::istringstream exact("age,y_lower,y_upper\n12,50000,50000\n30,1,2\n");
    const Dataset d = read_csv(exact);
    REQUIRE(d.size() == 2);
    CHECK(d.dim() == 1);
    CHECK(d[0].x[0] == 12);
    CHECK(d[0].y_lo == d[0].y_hi);
    CHECK_FALSE(d.has_latent());

    std::istringstream banded("x1,x2,band_code\n1,2,>60000\n3,4,15000-30000\n");
    const Dataset b = read_csv(banded, income_bands());
    CHECK(b.dim() == 2);
    CHECK(b[0].y_hi == 400000);
    CHECK(b[1].y_lo == 15000);

    std::istringstream reversed("x,y_lower,y_upper\n1,0,1\n2,5,4\n");
    try {
        read_csv(reversed);
        FAIL("reversed bracket accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    std::istringstream unknown("x,band_code\n1,??\n");
    CHECK_THROWS_AS(read_csv(unknown, income_bands()), DataError);
    std::istringstream no_map("x,band_code\n1,>60000\n");
    CHECK_THROWS_AS(read_csv(no_map), ConfigError);
    std::istringstream ragged("x,y_lower,y_upper\n1,0\n");
    CHECK_THROWS_AS(read_csv(ragged), DataError);
    std::istringstream garbage("x,y_lower,y_upper\n1,a,2\n");
    CHECK_THROWS_AS(read_csv(garbage), DataError);
}

TEST_CASE("datasets round trip through csv") {
    const Dataset d({{{0.125, -3.0}, 1.0 / 3.0, 2.0}, {{1e-9, 4.0}, 5.0, 5.0}}, {1.5, 5.0});
    std::stringstream buf;
    write_csv(d, buf);
    const Dataset back = read_csv(buf);
    REQUIRE(back.size() == 2);
    CHECK(back.has_latent());
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].x == d[i].x);
        CHECK(back[i].y_lo == d[i].y_lo);
        CHECK(back[i].y_hi == d[i].y_hi);
        CHECK(back.latent()[i] == d.latent()[i]);
    }
    std::istringstream cov("x1\n0.5\n-1\n");
    const Grid g = read_covariates(cov);
    REQUIRE(g.size() == 2);
    CHECK(g[1][0] == -1.0);
}

TEST_CASE("rules and calibration results round trip through json") {
    PredictionRule rule({{-1.0}, {0.0}, {1.0}},
                        {IntervalUnion{{0, 1}, {2, 3}}, IntervalUnion::full_line(), IntervalUnion{}}, {1, 1, 0});
    rule.provenance["threshold"] = json_real(kInf);
    rule.set_cell_offsets({Partition::equal_width(-1.5, 1.5, 2), {0.25, kInf}});
    const PredictionRule back = rule_from_json(json::parse(to_json(rule).dump()));
    CHECK(back.grid() == rule.grid());
    CHECK(back.sets() == rule.sets());
    CHECK(back.defined() == rule.defined());
    CHECK(back.provenance == rule.provenance);
    REQUIRE(back.cell_offsets().has_value());
    CHECK(back.cell_offsets()->offsets[1] == kInf);
    const std::vector<double> x{0.2};
    CHECK(back.set_at(x) == rule.set_at(x));

    CalibrationResult c;
    c.scores = {-1, 0.5, kInf};
    c.threshold = kInf;
    c.alpha = 0.2;
    c.n2 = 3;
    c.seed = 99;
    c.calibration_indices = {4, 7, 9};
    const CalibrationResult cb = calibration_from_json(json::parse(to_json(c, true).dump()));
    CHECK(cb.scores == c.scores);
    CHECK(cb.threshold == kInf);
    CHECK(cb.n2 == 3);
    CHECK(cb.seed == 99);
    CHECK(cb.calibration_indices == c.calibration_indices);
    CHECK(calibration_from_json(to_json(c)).scores.empty());

    QuantileFit q;
    q.level = 0.95;
    q.degree = 2;
    q.coefficients = {1, -0.5, 0.25};
    const QuantileFit qb = quantile_fit_from_json(to_json(q));
    CHECK(qb.coefficients == q.coefficients);
    CHECK(qb.level == 0.95);
}

TEST_CASE("run configuration") {
    const RunConfig cfg = run_config_from_json(json::parse(R"({
        "alpha": 0.2, "seed": 7,
        "kernel": {"family": "uniform", "bandwidth": [0.3]},
        "solver": {"psi": "auto", "max_components": 3},
        "experiment": {"models": ["B"], "methods": ["conformal", "q3"], "reps": 4}
    })"));
    CHECK(cfg.alpha == 0.2);
    CHECK(cfg.auto_psi);
    CHECK(cfg.solver.max_components == 3);
    CHECK(cfg.kernel.family == KernelFamily::uniform);
    CHECK(cfg.models == std::vector<Model>{Model::B});
    const ExperimentConfig e = cfg.experiment();
    CHECK(e.reps == 4);
    CHECK(e.fit.auto_psi);
    const RunConfig back = run_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));

    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"alpah": 0.1})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"solver": {"psi": "lots"}})")), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::parse(R"({"alpha": 1.5})")).validate(), ConfigError);
}
