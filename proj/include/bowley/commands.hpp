#pragma once

// Command implementations behind the command-line tool. Each returns a
// process exit code:
//   0 ok, 1 IO or verification failure, 2 configuration or input error,
//   3 divergence (partial report written), 4 refused (enumeration bound).

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "bowley/checkpoint.hpp"
#include "bowley/config.hpp"
#include "bowley/dataio.hpp"
#include "bowley/oracle.hpp"
#include "bowley/report_io.hpp"
#include "bowley/vpbgd.hpp"

namespace bowley::commands {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDiverged = 3, kRefused = 4 };

inline constexpr const char* kEnvOut = "BOWLEY_OUT";
inline constexpr const char* kEnvSeed = "BOWLEY_SEED";

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    // gen-data only
    std::optional<std::size_t> n;
    std::optional<double> basis_risk;
    std::optional<std::size_t> rows;
};

namespace detail {

/// Flag, then environment, then config file.
inline std::string out_dir(const Options& o, const RunConfig& rc) {
    if (o.out) return *o.out;
    if (const char* e = std::getenv(kEnvOut); e && *e) return e;
    return rc.out_dir;
}

inline std::optional<std::uint64_t> seed_override(const Options& o) {
    if (o.seed) return o.seed;
    if (const char* e = std::getenv(kEnvSeed); e && *e) {
        char* end = nullptr;
        const auto v = std::strtoull(e, &end, 10);
        if (*end != '\0') throw ConfigError(kEnvSeed, "expected an unsigned integer");
        return v;
    }
    return std::nullopt;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const RefusedError& e) {
        err << "refused: " << e.what() << '\n';
        return kRefused;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << '\n';
        return kFailure;
    } catch (const DomainError& e) {
        err << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ShapeError& e) {
        err << "input error: " << e.what() << '\n';
        return kConfigError;
    }
}

struct SolveOutcome {
    EquilibriumReport report;
    bool diverged = false;
    std::string message;
};

inline SolveOutcome run_solve(const RunConfig& rc, const ScenarioSet& s, const std::string& dir) {
    ensure_dir(dir);
    SolveOutcome out;
    PayoffModel trained;
    try {
        out.report = solve(rc.game, rc.solver, s, &trained);
        save_json(payoff_model_to_json(trained), join(dir, "model.json"));
    } catch (const DivergenceError& e) {
        out.report = e.partial();
        out.diverged = true;
        out.message = e.what();
    }
    save_json(report_to_json(out.report, rc.raw), join(dir, "report.json"));
    write_curves_csv(out.report, join(dir, "curves.csv"));
    write_payoff_csv(out.report, join(dir, "payoff.csv"));
    return out;
}

inline RunConfig load(const Options& o) {
    auto rc = load_run_config(o.config);
    if (auto seed = seed_override(o)) rc.solver.seed = *seed;
    return rc;
}

}  // namespace detail

inline int gen_data(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        auto rc = load_run_config(o.config);
        auto& d = rc.data;
        if (o.n || o.basis_risk || o.rows) {
            if (d.source != DataSource::Synthetic)
                throw ConfigError("data.source", "--n/--basis-risk/--rows need synthetic data");
        }
        if (auto seed = detail::seed_override(o)) d.seed = *seed;
        if (o.n) d.n = *o.n;
        if (o.basis_risk) d.basis_risk = *o.basis_risk;
        if (o.rows) d.rows = *o.rows;
        if (d.n < 2) throw ConfigError("n", "must be >= 2");
        if (d.rows < 1) throw ConfigError("rows", "must be >= 1");
        if (!(d.basis_risk >= 0.0)) throw ConfigError("basis_risk", "must be >= 0");
        const auto s = load_scenarios(d);
        const auto dir = detail::out_dir(o, rc);
        detail::ensure_dir(dir);
        const auto path = detail::join(dir, "scenarios.csv");
        write_scenarios_csv(s, path);
        log << "wrote " << s.size() << " scenarios to " << path << '\n';
        return int(kOk);
    });
}

inline int solve_cmd(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const auto rc = detail::load(o);
        const auto s = load_scenarios(rc.data);
        const auto dir = detail::out_dir(o, rc);
        const auto res = detail::run_solve(rc, s, dir);
        if (res.diverged) {
            err << "diverged: " << res.message << " (partial report in " << dir << ")\n";
            return int(kDiverged);
        }
        log << to_string(rc.game.problem) << ' ' << to_string(rc.game.mode) << ": profit "
            << format_double(res.report.insurer_profit) << ", farmer risk " << format_double(res.report.farmer_risk)
            << ", theta " << format_double(res.report.theta) << " -> " << dir << '\n';
        return int(kOk);
    });
}

inline int oracle_cmd(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const auto rc = detail::load(o);
        if (rc.game.mode != Mode::Indemnity) throw ConfigError("mode", "the oracle needs indemnity mode");
        const auto s = load_scenarios(rc.data);
        const auto r = problem_oracle(rc.game.problem, rc.game.farmer, rc.game.cost, s, rc.oracle.grids());
        const auto dir = detail::out_dir(o, rc);
        detail::ensure_dir(dir);
        save_json(oracle_to_json(r, s, rc.game.farmer, rc.game.cost, rc.raw), detail::join(dir, "oracle.json"));
        log << to_string(rc.game.problem) << " oracle: profit " << format_double(r.insurer_profit) << " over "
            << r.leader_points << " leader points -> " << dir << '\n';
        return int(kOk);
    });
}

inline int sweep_cmd(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const auto base = detail::load(o);
        if (!base.sweep) throw ConfigError("sweep", "required for the sweep command");
        const auto dir = detail::out_dir(o, base);
        detail::ensure_dir(dir);
        const auto config_dir = std::filesystem::path(o.config).parent_path();

        std::ofstream summary(detail::join(dir, "sweep.csv"));
        if (!summary) throw IoError("cannot write " + detail::join(dir, "sweep.csv"));
        summary << "run,value,theta,rho,insurer_profit,farmer_risk,premium,expected_payoff,complete\n";
        int code = kOk;
        for (std::size_t i = 0; i < base.sweep->values.size(); ++i) {
            const auto& value = base.sweep->values[i];
            auto raw = with_value(base.raw, base.sweep->parameter, value);
            raw.erase("sweep");
            auto rc = parse_run_config(raw, config_dir);
            rc.solver.seed = base.solver.seed;
            const auto s = load_scenarios(rc.data);
            const auto sub = detail::join(dir, "run" + std::to_string(i));
            const auto res = detail::run_solve(rc, s, sub);
            const auto& r = res.report;
            auto cell = value.dump();
            if (cell.find(',') != std::string::npos || cell.find('"') != std::string::npos) {
                std::string quoted = "\"";
                for (char c : cell) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
                cell = quoted + "\"";
            }
            summary << i << ',' << cell << ',' << format_double(r.theta) << ',' << format_double(r.rho) << ','
                    << format_double(r.insurer_profit) << ',' << format_double(r.farmer_risk) << ','
                    << format_double(r.premium) << ',' << format_double(r.expected_payoff) << ','
                    << (r.complete ? 1 : 0) << '\n';
            log << base.sweep->parameter << '=' << value.dump() << ": profit " << format_double(r.insurer_profit)
                << ", theta " << format_double(r.theta) << '\n';
            if (res.diverged) {
                err << "run " << i << " diverged: " << res.message << '\n';
                code = kDiverged;
            }
        }
        return code;
    });
}

/// Re-validates every report.json and oracle.json under the output directory.
inline int verify_cmd(const Options& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const auto rc = detail::load(o);
        const auto dir = detail::out_dir(o, rc);
        if (!std::filesystem::is_directory(dir)) throw IoError("no output directory " + dir);
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && (name == "report.json" || name == "oracle.json"))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no report.json or oracle.json under " + dir);
        bool ok = true;
        for (const auto& f : files) {
            const auto j = load_json(f.string());
            std::string why;
            const bool good = f.filename() == "report.json" ? verify_report_json(j, &why) : verify_oracle_json(j, &why);
            if (good)
                log << "ok   " << f.string() << '\n';
            else
                err << "FAIL " << f.string() << ": " << why << '\n';
            ok = ok && good;
        }
        return ok ? int(kOk) : int(kFailure);
    });
}

}  // namespace bowley::commands
