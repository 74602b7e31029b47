#include "ivcp/io.hpp"

#include "ivcp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace ivcp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
using json = nlohmann::json;
} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    if (text == "inf" || text == "+inf" || text == "Inf") return kInf;
    if (text == "-inf" || text == "-Inf") return -kInf;
    if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || first == last)
        throw DataError("not a number: '" + text + "'");
    return v;
}

namespace {

double real_from(const json& j, double if_null) {
    if (j.is_null()) return if_null;
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_double(j.get<std::string>());
    throw DataError("expected a number in JSON");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(b, e - b + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

void BracketMap::validate() const {
    if (bands.empty()) throw ConfigError("bracket map has no bands");
    std::set<std::string> codes;
    std::vector<Interval> spans;
    for (const auto& b : bands) {
        if (!codes.insert(b.code).second) throw ConfigError("duplicate band code '" + b.code + "'");
        const double hi = b.upper ? *b.upper : (top_code ? *top_code : kInf);
        if (!std::isfinite(b.lower) || !std::isfinite(hi))
            throw ConfigError("band '" + b.code + "' is open-ended and no top code is set");
        if (!(b.lower <= hi)) throw ConfigError("band '" + b.code + "' has lower > upper");
        spans.push_back({b.lower, hi});
    }
    std::sort(spans.begin(), spans.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t k = 1; k < spans.size(); ++k)
        if (spans[k].lo < spans[k - 1].hi) throw ConfigError("bracket map bands overlap");
}

Interval BracketMap::bracket(const std::string& code) const {
    for (const auto& b : bands) {
        if (b.code != code) continue;
        const double hi = b.upper ? *b.upper : (top_code ? *top_code : kInf);
        return {b.lower, hi};
    }
    throw DataError("unknown band code '" + code + "'");
}

BracketMap bracket_map_from_json(const json& j) {
    try {
        BracketMap m;
        for (const auto& b : j.at("bands")) {
            BracketMap::Band band;
            band.code = b.at("code").is_string() ? b.at("code").get<std::string>() : b.at("code").dump();
            band.lower = real_from(b.at("lower"), -kInf);
            if (b.contains("upper") && !b.at("upper").is_null()) band.upper = real_from(b.at("upper"), kInf);
            m.bands.push_back(std::move(band));
        }
        if (j.contains("top_code") && !j.at("top_code").is_null()) m.top_code = real_from(j.at("top_code"), kInf);
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed bracket map: ") + e.what());
    }
}

json to_json(const BracketMap& map) {
    json bands = json::array();
    for (const auto& b : map.bands)
        bands.push_back({{"code", b.code}, {"lower", b.lower}, {"upper", b.upper ? json(*b.upper) : json()}});
    return {{"bands", bands}, {"top_code", map.top_code ? json(*map.top_code) : json()}};
}

Dataset read_csv(std::istream& in, const std::optional<BracketMap>& map) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV is empty");
    const auto header = split_fields(line);
    int lo_col = -1, hi_col = -1, band_col = -1, latent_col = -1;
    std::vector<std::size_t> x_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h == "y_lower") lo_col = static_cast<int>(c);
        else if (h == "y_upper") hi_col = static_cast<int>(c);
        else if (h == "band_code") band_col = static_cast<int>(c);
        else if (h == "y_latent") latent_col = static_cast<int>(c);
        else x_cols.push_back(c);
    }
    const bool bracket_columns = lo_col >= 0 && hi_col >= 0;
    if (!bracket_columns && band_col < 0) throw DataError("CSV needs y_lower and y_upper, or band_code");
    if (!bracket_columns && !map) throw ConfigError("band_code column requires a bracket map");

    std::vector<Observation> obs;
    std::vector<double> latent;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto f = split_fields(line);
        const std::string where = "row " + std::to_string(row);
        if (f.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
        try {
            Observation o;
            for (auto c : x_cols) o.x.push_back(parse_double(f[c]));
            if (bracket_columns) {
                o.y_lo = parse_double(f[static_cast<std::size_t>(lo_col)]);
                o.y_hi = parse_double(f[static_cast<std::size_t>(hi_col)]);
            } else {
                const Interval b = map->bracket(f[static_cast<std::size_t>(band_col)]);
                o.y_lo = b.lo;
                o.y_hi = b.hi;
            }
            if (!std::isfinite(o.y_lo) || !std::isfinite(o.y_hi)) throw DataError("non-finite bracket");
            if (o.y_lo > o.y_hi) throw DataError("y_lower > y_upper");
            for (double v : o.x)
                if (!std::isfinite(v)) throw DataError("non-finite covariate");
            if (latent_col >= 0) latent.push_back(parse_double(f[static_cast<std::size_t>(latent_col)]));
            obs.push_back(std::move(o));
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    if (obs.empty()) throw DataError("CSV has no data rows");
    return Dataset(std::move(obs), std::move(latent));
}

Dataset read_csv(const std::filesystem::path& path, const std::optional<BracketMap>& map) {
    auto in = open_in(path);
    return read_csv(in, map);
}

void write_csv(const Dataset& data, std::ostream& out) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j + 1 << ',';
    out << "y_lower,y_upper";
    if (data.has_latent()) out << ",y_latent";
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data[i].x) out << format_double(v) << ',';
        out << format_double(data[i].y_lo) << ',' << format_double(data[i].y_hi);
        if (data.has_latent()) out << ',' << format_double(data.latent()[i]);
        out << '\n';
    }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_csv(data, out);
}

Grid read_covariates(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV is empty");
    const std::size_t width = split_fields(line).size();
    Grid rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto f = split_fields(line);
        if (f.size() != width) throw DataError("row " + std::to_string(row) + ": wrong number of fields");
        Point p;
        try {
            for (const auto& v : f) p.push_back(parse_double(v));
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(row) + ": " + e.what());
        }
        rows.push_back(std::move(p));
    }
    return rows;
}

Grid read_covariates(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_covariates(in);
}

json to_json(const IntervalUnion& set) {
    json a = json::array();
    for (const auto& iv : set) a.push_back(json::array({json_real(iv.lo), json_real(iv.hi)}));
    return a;
}

IntervalUnion union_from_json(const json& j) {
    if (!j.is_array()) throw DataError("interval union must be a JSON array");
    std::vector<Interval> raw;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) throw DataError("interval must be a [lo, hi] pair");
        raw.push_back({real_from(p[0], -kInf), real_from(p[1], kInf)});
    }
    try {
        return normalize_union(raw);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

json to_json(const KernelSpec& spec) {
    return {{"family", to_string(spec.family)}, {"bandwidth", spec.bandwidth}};
}

KernelSpec kernel_spec_from_json(const json& j) {
    try {
        KernelSpec s;
        s.family = kernel_family_from_string(j.at("family").get<std::string>());
        s.bandwidth = j.at("bandwidth").get<std::vector<double>>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed kernel spec: ") + e.what());
    }
}

json to_json(const SolverConfig& cfg) {
    return {{"alpha", cfg.alpha},
            {"psi", cfg.psi},
            {"max_components", cfg.max_components},
            {"weight_grid", cfg.weight_grid}};
}

SolverConfig solver_config_from_json(const json& j) {
    try {
        SolverConfig c;
        c.alpha = j.value("alpha", c.alpha);
        c.psi = j.value("psi", c.psi);
        c.max_components = j.value("max_components", c.max_components);
        c.weight_grid = j.value("weight_grid", c.weight_grid);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed solver config: ") + e.what());
    }
}

json to_json(const Partition& partition) {
    json cells = json::array();
    for (const auto& c : partition.cells()) {
        json lo = json::array(), hi = json::array();
        for (double v : c.lo) lo.push_back(json_real(v));
        for (double v : c.hi) hi.push_back(json_real(v));
        cells.push_back({{"lo", lo}, {"hi", hi}});
    }
    return cells;
}

Partition partition_from_json(const json& j) {
    std::vector<Cell> cells;
    for (const auto& c : j) {
        Cell cell;
        for (const auto& v : c.at("lo")) cell.lo.push_back(real_from(v, -kInf));
        for (const auto& v : c.at("hi")) cell.hi.push_back(real_from(v, kInf));
        cells.push_back(std::move(cell));
    }
    return Partition(std::move(cells));
}

json to_json(const PredictionRule& rule) {
    json grid = json::array(), sets = json::array(), defined = json::array();
    for (const auto& g : rule.grid()) grid.push_back(g);
    for (const auto& s : rule.sets()) sets.push_back(to_json(s));
    for (auto d : rule.defined()) defined.push_back(d != 0);
    json j = {{"grid", grid}, {"sets", sets}, {"defined", defined}, {"provenance", rule.provenance}};
    if (const auto& off = rule.cell_offsets()) {
        json offsets = json::array();
        for (double v : off->offsets) offsets.push_back(json_real(v));
        j["cell_offsets"] = {{"partition", to_json(off->partition)}, {"offsets", offsets}};
    }
    return j;
}

PredictionRule rule_from_json(const json& j) {
    try {
        Grid grid;
        for (const auto& g : j.at("grid")) grid.push_back(g.get<Point>());
        std::vector<IntervalUnion> sets;
        for (const auto& s : j.at("sets")) sets.push_back(union_from_json(s));
        std::vector<std::uint8_t> defined;
        for (const auto& d : j.at("defined")) defined.push_back(d.get<bool>() ? 1 : 0);
        PredictionRule rule(std::move(grid), std::move(sets), std::move(defined));
        if (j.contains("provenance")) rule.provenance = j.at("provenance");
        if (j.contains("cell_offsets")) {
            PredictionRule::CellOffsets off;
            off.partition = partition_from_json(j.at("cell_offsets").at("partition"));
            for (const auto& v : j.at("cell_offsets").at("offsets")) off.offsets.push_back(real_from(v, kInf));
            rule.set_cell_offsets(std::move(off));
        }
        return rule;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed prediction rule: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed prediction rule: ") + e.what());
    }
}

json to_json(const CalibrationResult& r, bool include_scores) {
    json j = {{"threshold", json_real(r.threshold)},
              {"alpha", r.alpha},
              {"n2", r.n2},
              {"seed", r.seed},
              {"calibration_indices", r.calibration_indices}};
    if (include_scores) {
        json s = json::array();
        for (double v : r.scores) s.push_back(json_real(v));
        j["scores"] = s;
    }
    return j;
}

CalibrationResult calibration_from_json(const json& j) {
    try {
        CalibrationResult r;
        r.threshold = real_from(j.at("threshold"), kInf);
        r.alpha = j.at("alpha").get<double>();
        r.n2 = j.at("n2").get<std::size_t>();
        r.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("calibration_indices"))
            r.calibration_indices = j.at("calibration_indices").get<std::vector<std::size_t>>();
        if (j.contains("scores"))
            for (const auto& v : j.at("scores")) r.scores.push_back(real_from(v, kInf));
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed calibration result: ") + e.what());
    }
}

json to_json(const QuantileFit& fit) {
    return {{"target", fit.target == QuantileTarget::lower ? "lower" : "upper"},
            {"level", fit.level},
            {"degree", fit.degree},
            {"coefficients", fit.coefficients}};
}

QuantileFit quantile_fit_from_json(const json& j) {
    try {
        QuantileFit f;
        const auto t = j.at("target").get<std::string>();
        if (t != "lower" && t != "upper") throw DataError("quantile target must be lower or upper");
        f.target = t == "lower" ? QuantileTarget::lower : QuantileTarget::upper;
        f.level = j.at("level").get<double>();
        f.degree = j.at("degree").get<int>();
        f.coefficients = j.at("coefficients").get<std::vector<double>>();
        return f;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed quantile fit: ") + e.what());
    }
}

json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

void write_json(const json& j, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace ivcp
