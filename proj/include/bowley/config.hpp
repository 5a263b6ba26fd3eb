#pragma once

// Strict JSON run configuration. Unknown keys and type mismatches are
// rejected with the dotted path of the offending field.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bowley/dataio.hpp"
#include "bowley/errors.hpp"
#include "bowley/game.hpp"
#include "bowley/oracle.hpp"
#include "bowley/vpbgd.hpp"

namespace bowley {

enum class DataSource { Synthetic, Scenarios, Records, Inline };

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    std::uint64_t seed = 1;
    std::size_t n = 200;
    double basis_risk = 0.0;
    std::size_t rows = 6;
    std::string scenarios;  // scenarios.csv
    std::string yields;     // yields.csv
    std::string weather;    // weather.csv (optional with records)
    double price = 1.0;
    std::vector<double> losses;
    std::vector<double> probs;
};

struct GridSpec {
    double lo = 0.0, hi = 0.0;
    std::size_t n = 1;
    std::vector<double> values() const { return uniform_grid(lo, hi, n); }
};

struct OracleConfig {
    GridSpec thetas{0.0, 5.0, 501};
    GridSpec rhos{1.0, 4.0, 31};
    GridSpec knot_values{0.0, 2.0, 21};
    std::size_t deductible_points = 0;

    OracleGrids grids() const { return {thetas.values(), rhos.values(), knot_values.values(), deductible_points}; }
};

struct SweepConfig {
    std::string parameter;  // dotted path into the config, e.g. "farmer.lambda"
    std::vector<nlohmann::json> values;
};

struct RunConfig {
    GameConfig game;
    SolverConfig solver;
    DataConfig data;
    OracleConfig oracle;
    std::optional<SweepConfig> sweep;
    std::string out_dir = "out";
    nlohmann::json raw;  // as parsed, for echoing into reports
};

namespace detail {

class Fields {
public:
    Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key, double def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
        return v.get<double>();
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
        auto s = string(key, def);
        for (const auto& a : allowed)
            if (s == a) return s;
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(at(key), "must be one of " + list + " (got '" + s + "')");
    }

    std::vector<double> numbers(const std::string& key) {
        if (!take(key)) return {};
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<std::size_t> sizes(const std::string& key, std::vector<std::size_t> def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(at(key), "expected an array of positive integers");
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_unsigned() || v[i].get<std::uint64_t>() == 0)
                throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a positive integer");
            out.push_back(v[i].get<std::size_t>());
        }
        return out;
    }

    const nlohmann::json* raw(const std::string& key) {
        if (!take(key)) return nullptr;
        return &j_.at(key);
    }

    std::optional<Fields> object(const std::string& key) {
        if (!take(key)) return std::nullopt;
        return Fields(j_.at(key), at(key));
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(at(k), "unknown key");
    }

private:
    bool take(const std::string& key) {
        if (!j_.contains(key)) return false;
        used_.insert(key);
        return true;
    }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

inline GridSpec parse_grid(Fields& f, const std::string& key, GridSpec def) {
    auto g = f.object(key);
    if (!g) return def;
    GridSpec out{g->number("lo", def.lo), g->number("hi", def.hi), g->unsigned_int("n", def.n)};
    g->finish();
    require(out.n >= 1, g->at("n"), "must be >= 1");
    require(out.hi >= out.lo, g->at("hi"), "must be >= lo");
    return out;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Parses a run configuration. Relative data paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    using detail::require;
    RunConfig rc;
    rc.raw = j;
    detail::Fields root(j, "");

    const auto problem = root.choice("problem", "P1", {"P1", "P2", "P3"});
    rc.game.problem = problem == "P1" ? Problem::P1 : problem == "P2" ? Problem::P2 : Problem::P3;
    rc.game.mode = root.choice("mode", "indemnity", {"index", "indemnity"}) == "index" ? Mode::Index : Mode::Indemnity;

    if (auto f = root.object("farmer")) {
        const auto kind = f->choice("kind", "cvar", {"cvar", "convex_combo"});
        const double alpha = f->number("alpha", 0.8);
        require(alpha >= 0.0 && alpha < 1.0, f->at("alpha"), "must lie in [0, 1)");
        if (kind == "cvar") {
            rc.game.farmer = FarmerPreference::cvar(alpha);
        } else {
            const double lambda = f->number("lambda", 0.5);
            require(lambda >= 0.0 && lambda <= 1.0, f->at("lambda"), "must lie in [0, 1]");
            rc.game.farmer = FarmerPreference::convex_combo(lambda, alpha);
        }
        f->finish();
    }
    if (auto f = root.object("cost")) {
        rc.game.cost.mu = f->number("mu", rc.game.cost.mu);
        require(rc.game.cost.mu >= 0.0, f->at("mu"), "must be >= 0");
        f->finish();
    }
    if (auto f = root.object("leader")) {
        rc.game.init.theta = f->number("theta", rc.game.init.theta);
        require(rc.game.init.theta >= 0.0, f->at("theta"), "must be >= 0");
        rc.game.init.rho = f->number("rho", rc.game.init.rho);
        require(rc.game.init.rho >= 1.0, f->at("rho"), "must be >= 1");
        rc.game.init.knots = f->unsigned_int("knots", rc.game.init.knots);
        require(rc.game.init.knots >= 1, f->at("knots"), "must be >= 1");
        f->finish();
    }
    if (auto f = root.object("model")) {
        auto& m = rc.game.model;
        m.kind = f->choice("architecture", "mlp", {"mlp", "cnn"}) == "cnn" ? Architecture::Cnn : Architecture::Mlp;
        m.hidden = f->sizes("hidden", m.hidden);
        m.conv = f->sizes("conv", m.conv);
        auto kernel = f->sizes("kernel", {m.kernel_h, m.kernel_w});
        require(kernel.size() == 2, f->at("kernel"), "expected [height, width]");
        m.kernel_h = kernel[0];
        m.kernel_w = kernel[1];
        auto pool = f->sizes("pool", {m.pool_h, m.pool_w});
        require(pool.size() == 2, f->at("pool"), "expected [height, width]");
        m.pool_h = pool[0];
        m.pool_w = pool[1];
        f->finish();
    }
    if (auto f = root.object("solver")) {
        auto& s = rc.solver;
        s.alpha0 = f->number("alpha0", s.alpha0);
        require(s.alpha0 > 0.0, f->at("alpha0"), "must be > 0");
        s.decay = f->number("decay", s.decay);
        require(s.decay > 0.0 && s.decay < 1.0, f->at("decay"), "must lie in (0, 1)");
        s.gamma = f->number("gamma", s.gamma);
        require(s.gamma > 0.0, f->at("gamma"), "must be > 0");
        s.inner_iters = f->unsigned_int("inner_iters", s.inner_iters);
        require(s.inner_iters >= 1, f->at("inner_iters"), "must be >= 1");
        s.outer_iters = f->unsigned_int("outer_iters", s.outer_iters);
        require(s.outer_iters >= 1, f->at("outer_iters"), "must be >= 1");
        if (f->has("beta")) {
            s.beta = f->number("beta", 0.0);
            require(*s.beta > 0.0, f->at("beta"), "must be > 0");
        }
        s.seed = f->unsigned_int("seed", s.seed);
        s.tolerance = f->number("tolerance", s.tolerance);
        require(s.tolerance >= 0.0, f->at("tolerance"), "must be >= 0");
        s.leader_step_scale = f->number("leader_step_scale", s.leader_step_scale);
        require(s.leader_step_scale > 0.0, f->at("leader_step_scale"), "must be > 0");
        s.leader_clip = f->number("leader_clip", s.leader_clip);
        require(s.leader_clip > 0.0, f->at("leader_clip"), "must be > 0");
        if (f->has("rho_max")) {
            s.rho_max = f->number("rho_max", 0.0);
            require(s.rho_max >= 1.0, f->at("rho_max"), "must be >= 1");
        }
        s.rescale_losses = f->boolean("rescale_losses", s.rescale_losses);
        f->finish();
    }
    if (auto f = root.object("data")) {
        auto& d = rc.data;
        const auto src = f->choice("source", "synthetic", {"synthetic", "scenarios", "records", "inline"});
        if (src == "synthetic") {
            d.source = DataSource::Synthetic;
            d.seed = f->unsigned_int("seed", d.seed);
            d.n = f->unsigned_int("n", d.n);
            require(d.n >= 2, f->at("n"), "must be >= 2");
            d.basis_risk = f->number("basis_risk", d.basis_risk);
            require(d.basis_risk >= 0.0, f->at("basis_risk"), "must be >= 0");
            d.rows = f->unsigned_int("rows", d.rows);
            require(d.rows >= 1, f->at("rows"), "must be >= 1");
        } else if (src == "scenarios") {
            d.source = DataSource::Scenarios;
            d.scenarios = detail::resolve_path(f->string("path", ""), base_dir);
            require(!d.scenarios.empty(), f->at("path"), "required for source 'scenarios'");
        } else if (src == "records") {
            d.source = DataSource::Records;
            d.yields = detail::resolve_path(f->string("yields", ""), base_dir);
            require(!d.yields.empty(), f->at("yields"), "required for source 'records'");
            d.weather = detail::resolve_path(f->string("weather", ""), base_dir);
            d.price = f->number("price", d.price);
            require(d.price > 0.0, f->at("price"), "must be > 0");
        } else {
            d.source = DataSource::Inline;
            d.losses = f->numbers("losses");
            require(!d.losses.empty(), f->at("losses"), "required for source 'inline'");
            d.probs = f->numbers("probs");
            require(d.probs.empty() || d.probs.size() == d.losses.size(), f->at("probs"),
                    "must match the length of losses");
        }
        f->finish();
    }
    if (auto f = root.object("oracle")) {
        auto& o = rc.oracle;
        o.thetas = detail::parse_grid(*f, "thetas", o.thetas);
        o.rhos = detail::parse_grid(*f, "rhos", o.rhos);
        require(o.rhos.lo >= 1.0, f->at("rhos.lo"), "must be >= 1");
        o.knot_values = detail::parse_grid(*f, "knot_values", o.knot_values);
        o.deductible_points = f->unsigned_int("deductible_points", o.deductible_points);
        f->finish();
    }
    if (auto f = root.object("sweep")) {
        SweepConfig sw;
        sw.parameter = f->string("parameter", "");
        require(!sw.parameter.empty(), f->at("parameter"), "required");
        const auto* vals = f->raw("values");
        require(vals && vals->is_array() && !vals->empty(), f->at("values"), "expected a non-empty array");
        sw.values.assign(vals->begin(), vals->end());
        f->finish();
        rc.sweep = std::move(sw);
    }
    if (auto f = root.object("output")) {
        rc.out_dir = detail::resolve_path(f->string("dir", rc.out_dir), base_dir);
        f->finish();
    }
    root.finish();

    try {
        rc.game.validate();
    } catch (const DomainError& e) {
        throw ConfigError("<game>", e.what());
    }
    try {
        rc.solver.validate();
    } catch (const DomainError& e) {
        throw ConfigError("solver", e.what());
    }
    if (rc.game.mode == Mode::Index && rc.data.source == DataSource::Inline)
        throw ConfigError("mode", "index mode needs weather data (inline data has none)");
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
        }
    }
    return parse_run_config(j, std::filesystem::path(path).parent_path());
}

/// Returns a copy of `j` with the dotted `path` set to `value`.
inline nlohmann::json with_value(nlohmann::json j, const std::string& path, const nlohmann::json& value) {
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError(path, "malformed parameter path");
        if (!node->is_object()) throw ConfigError(path, "path crosses a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return j;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

/// Materialises the configured scenario set.
inline ScenarioSet load_scenarios(const DataConfig& d) {
    switch (d.source) {
        case DataSource::Synthetic: return synth_generate(d.seed, d.n, d.basis_risk, d.rows);
        case DataSource::Scenarios: return read_scenarios_csv(d.scenarios);
        case DataSource::Records: {
            const auto yields = read_yields_csv(d.yields);
            const auto weather = d.weather.empty() ? std::vector<WeatherRecord>{} : read_weather_csv(d.weather);
            return build_scenarios(yields, weather, d.price);
        }
        case DataSource::Inline: {
            if (d.probs.empty()) return ScenarioSet::from_losses(d.losses);
            ScenarioSet s;
            s.losses = d.losses;
            s.probs = d.probs;
            for (std::size_t k = 0; k < s.losses.size(); ++k) s.ids.push_back(std::to_string(k));
            s.validate();
            return s;
        }
    }
    throw DomainError("unknown data source");
}

}  // namespace bowley
