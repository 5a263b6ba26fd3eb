#pragma once

// Yield/weather records, detrending, loss construction, a synthetic scenario
// generator and the CSV formats.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bowley/errors.hpp"
#include "bowley/payoff.hpp"
#include "bowley/scenario.hpp"

namespace bowley {

struct YieldRecord {
    std::string county;
    int year = 0;
    double yield = 0.0;
};

struct WeatherRecord {
    std::string county;
    int year = 0;
    std::size_t rows = 0;
    std::vector<double> values;  // rows x 12, row-major
};

inline constexpr std::array<std::string_view, 6> kIndexNames{"pcpn", "tmax", "tmin", "dpt", "vpdmax", "vpdmin"};

inline std::string index_name(std::size_t row) {
    return row < kIndexNames.size() ? std::string(kIndexNames[row]) : "idx" + std::to_string(row);
}

inline std::size_t index_row(std::string_view name) {
    for (std::size_t r = 0; r < kIndexNames.size(); ++r)
        if (kIndexNames[r] == name) return r;
    std::string_view digits = name;
    if (digits.substr(0, 3) == "idx") digits.remove_prefix(3);
    std::size_t row = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), row);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
        throw DomainError("unknown weather index '" + std::string(name) + "'");
    return row;
}

// ---------------------------------------------------------------- detrending

struct QuadraticTrend {
    double t0 = 0.0;  // year centring
    double a = 0.0, b = 0.0, c = 0.0;
    double operator()(double year) const {
        const double t = year - t0;
        return a + b * t + c * t * t;
    }
};

struct DetrendResult {
    std::vector<YieldRecord> records;  // yields re-centred to the final-year trend level
    std::vector<double> residuals;
    QuadraticTrend trend;
};

/// Ordinary least-squares quadratic trend in year.
inline DetrendResult detrend(const std::vector<YieldRecord>& series) {
    std::set<int> years;
    for (const auto& r : series) {
        if (!std::isfinite(r.yield)) throw DomainError("detrend: non-finite yield");
        years.insert(r.year);
    }
    if (years.size() < 3) throw DomainError("detrend: need at least 3 distinct years");

    DetrendResult out;
    double mean_year = 0.0;
    for (const auto& r : series) mean_year += r.year;
    mean_year /= double(series.size());
    out.trend.t0 = mean_year;

    // normal equations, 3x3, solved by Gaussian elimination with pivoting
    double m[3][4] = {};
    for (const auto& r : series) {
        const double t = r.year - mean_year;
        const double x[3] = {1.0, t, t * t};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) m[i][j] += x[i] * x[j];
            m[i][3] += x[i] * r.yield;
        }
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int i = col + 1; i < 3; ++i)
            if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
        if (std::abs(m[piv][col]) < 1e-12) throw DomainError("detrend: rank-deficient design");
        std::swap(m[col], m[piv]);
        for (int i = 0; i < 3; ++i) {
            if (i == col) continue;
            const double f = m[i][col] / m[col][col];
            for (int j = col; j < 4; ++j) m[i][j] -= f * m[col][j];
        }
    }
    out.trend.a = m[0][3] / m[0][0];
    out.trend.b = m[1][3] / m[1][1];
    out.trend.c = m[2][3] / m[2][2];

    const double level = out.trend(*years.rbegin());
    for (const auto& r : series) {
        const double res = r.yield - out.trend(r.year);
        out.residuals.push_back(res);
        out.records.push_back({r.county, r.year, res + level});
    }
    return out;
}

/// Shortfall below the best observation, in price units.
inline std::vector<double> to_losses(const std::vector<double>& yields, double price) {
    if (yields.empty()) throw DomainError("to_losses: empty input");
    if (!(price > 0.0)) throw DomainError("to_losses: price must be > 0");
    const double top = *std::max_element(yields.begin(), yields.end());
    std::vector<double> out(yields.size());
    for (std::size_t k = 0; k < yields.size(); ++k) out[k] = (top - yields[k]) * price;
    return out;
}

/**
 * Pools county-years into one equally weighted scenario set: yields are
 * detrended per county, losses are shortfalls below the pooled best yield.
 * With `weather` non-empty only county-years present in both are kept.
 */
inline ScenarioSet build_scenarios(const std::vector<YieldRecord>& yields, const std::vector<WeatherRecord>& weather,
                                   double price = 1.0) {
    std::map<std::string, std::vector<YieldRecord>> by_county;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& r : yields) {
        if (!(r.yield >= 0.0)) throw DomainError("yield " + r.county + "/" + std::to_string(r.year) + " must be >= 0");
        if (!seen.insert({r.county, r.year}).second)
            throw DomainError("duplicate yield record " + r.county + "/" + std::to_string(r.year));
        by_county[r.county].push_back(r);
    }
    std::map<std::pair<std::string, int>, const WeatherRecord*> wx;
    std::size_t rows = 0;
    for (const auto& w : weather) {
        if (rows == 0) rows = w.rows;
        if (w.rows != rows || w.values.size() != rows * kMonths)
            throw DomainError("weather " + w.county + "/" + std::to_string(w.year) + ": inconsistent grid");
        wx[{w.county, w.year}] = &w;
    }

    std::vector<YieldRecord> pooled;
    for (const auto& [county, series] : by_county) {
        auto d = detrend(series);
        pooled.insert(pooled.end(), d.records.begin(), d.records.end());
    }
    if (!weather.empty())
        pooled.erase(std::remove_if(pooled.begin(), pooled.end(),
                                    [&](const YieldRecord& r) { return !wx.count({r.county, r.year}); }),
                     pooled.end());
    if (pooled.empty()) throw DomainError("no county-years with both yield and weather");

    std::vector<double> y;
    for (const auto& r : pooled) y.push_back(r.yield);
    const auto losses = to_losses(y, price);

    ScenarioSet s;
    s.rows = weather.empty() ? 0 : rows;
    for (std::size_t k = 0; k < pooled.size(); ++k) {
        s.ids.push_back(pooled[k].county + "-" + std::to_string(pooled[k].year));
        s.losses.push_back(losses[k]);
        s.probs.push_back(1.0 / double(pooled.size()));
        if (s.rows) s.weather.push_back(wx.at({pooled[k].county, pooled[k].year})->values);
    }
    s.validate();
    return s;
}

// --------------------------------------------------------- synthetic data

/// Per-row climatology (mean, spread) used to scale standard normal draws.
inline std::pair<double, double> synth_climatology(std::size_t row) {
    static constexpr std::array<std::pair<double, double>, 6> table{{
        {90.0, 30.0},  // pcpn, mm
        {27.0, 3.0},   // tmax, C
        {15.0, 3.0},   // tmin, C
        {12.0, 3.0},   // dpt, C
        {20.0, 5.0},   // vpdmax, hPa
        {3.0, 1.0},    // vpdmin, hPa
    }};
    return row < table.size() ? table[row] : std::pair{0.0, 1.0};
}

/**
 * Loss rule f(X) of the synthetic generator, on standardised cells
 * z[r][m] = (X[r][m] - mean_r) / spread_r (months m are 0-based):
 *
 *   f = 5 softplus(-z[P][6] - z[P][7] - 1)        dry July/August
 *     + 4 softplus( z[T][6] + z[V][6] - 1)        hot, high-VPD July
 *     + 2 softplus(-z[P][9] * z[W][9] - 1)        October interaction
 *
 * with P = 0 (pcpn), T = 1, V = 4 (vpdmax), W = 5 (vpdmin); each row
 * index is taken modulo the number of rows.
 */
inline double synth_loss_rule(const std::vector<double>& x, std::size_t rows) {
    if (rows == 0 || x.size() != rows * kMonths) throw ShapeError("synthetic rule: grid must be rows x 12");
    auto z = [&](std::size_t r, std::size_t m) {
        r %= rows;
        const auto [mu, sd] = synth_climatology(r);
        return (x[r * kMonths + m] - mu) / sd;
    };
    return 5.0 * softplus(-z(0, 6) - z(0, 7) - 1.0) + 4.0 * softplus(z(1, 6) + z(4, 6) - 1.0) +
           2.0 * softplus(-z(0, 9) * z(5, 9) - 1.0);
}

/**
 * n equally likely scenarios with weather grids X and losses
 * Y = max(0, f(X) + 2 * basis_risk * eps), eps standard normal and
 * independent of X. basis_risk = 0 makes Y a function of X.
 */
inline ScenarioSet synth_generate(std::uint64_t seed, std::size_t n, double basis_risk, std::size_t rows = 6) {
    if (n < 2) throw DomainError("synthetic data: n must be >= 2");
    if (rows == 0) throw DomainError("synthetic data: rows must be >= 1");
    if (!(basis_risk >= 0.0) || !std::isfinite(basis_risk))
        throw DomainError("synthetic data: basis_risk must be finite and >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ScenarioSet s;
    s.rows = rows;
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> x(rows * kMonths);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto [mu, sd] = synth_climatology(r);
            for (std::size_t m = 0; m < kMonths; ++m) x[r * kMonths + m] = mu + sd * normal(rng);
        }
        const double eps = normal(rng);
        s.losses.push_back(std::max(0.0, synth_loss_rule(x, rows) + 2.0 * basis_risk * eps));
        s.weather.push_back(std::move(x));
        s.ids.push_back("s" + std::to_string(k));
        s.probs.push_back(1.0 / double(n));
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------- CSV

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DomainError(where + ": not a number '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw DomainError(where + ": not an integer '" + s + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (t.header.empty()) throw DomainError(path + ": missing header row");
    return t;
}

inline void require_header(const CsvTable& t, const std::vector<std::string>& expected, const std::string& path) {
    if (t.header.size() < expected.size() || !std::equal(expected.begin(), expected.end(), t.header.begin()))
        throw DomainError(path + ": header must start with " + [&] {
            std::string h;
            for (const auto& e : expected) h += (h.empty() ? "" : ",") + e;
            return h;
        }());
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}
}  // namespace detail

inline std::string weather_column(std::size_t row, std::size_t month) {
    return index_name(row) + "_m" + std::to_string(month + 1);
}

/// scenarios.csv: id, prob, loss, then rows x 12 weather columns.
inline void write_scenarios_csv(const ScenarioSet& s, const std::string& path) {
    s.validate();
    auto out = detail::open_out(path);
    out << "id,prob,loss";
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t m = 0; m < kMonths; ++m) out << ',' << weather_column(r, m);
    out << '\n';
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s.ids[k].find(',') != std::string::npos) throw DomainError("scenario id contains a comma: " + s.ids[k]);
        out << s.ids[k] << ',' << format_double(s.probs[k]) << ',' << format_double(s.losses[k]);
        if (s.rows)
            for (double v : s.weather[k]) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline ScenarioSet read_scenarios_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    detail::require_header(t, {"id", "prob", "loss"}, path);
    const std::size_t extra = t.header.size() - 3;
    if (extra % kMonths != 0) throw DomainError(path + ": weather columns must come in groups of 12");
    ScenarioSet s;
    s.rows = extra / kMonths;
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t m = 0; m < kMonths; ++m)
            if (t.header[3 + r * kMonths + m] != weather_column(r, m))
                throw DomainError(path + ": expected column " + weather_column(r, m));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        s.ids.push_back(row[0]);
        s.probs.push_back(detail::parse_double(row[1], where));
        s.losses.push_back(detail::parse_double(row[2], where));
        if (s.rows) {
            std::vector<double> w(extra);
            for (std::size_t j = 0; j < extra; ++j) w[j] = detail::parse_double(row[3 + j], where);
            s.weather.push_back(std::move(w));
        }
    }
    s.validate();
    return s;
}

inline void write_yields_csv(const std::vector<YieldRecord>& records, const std::string& path) {
    auto out = detail::open_out(path);
    out << "county,year,yield\n";
    for (const auto& r : records) out << r.county << ',' << r.year << ',' << format_double(r.yield) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<YieldRecord> read_yields_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    detail::require_header(t, {"county", "year", "yield"}, path);
    std::vector<YieldRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        YieldRecord r{t.rows[i][0], detail::parse_int(t.rows[i][1], where), detail::parse_double(t.rows[i][2], where)};
        if (!(r.yield >= 0.0)) throw DomainError(where + ": yield must be >= 0");
        out.push_back(std::move(r));
    }
    return out;
}

/// weather.csv holds one line per (county, year, index); lines are grouped
/// back into rows x 12 grids with rows ordered by index.
inline void write_weather_csv(const std::vector<WeatherRecord>& records, const std::string& path) {
    auto out = detail::open_out(path);
    out << "county,year,index";
    for (std::size_t m = 0; m < kMonths; ++m) out << ",m" << (m + 1);
    out << '\n';
    for (const auto& w : records) {
        if (w.values.size() != w.rows * kMonths) throw ShapeError("weather record must be rows x 12");
        for (std::size_t r = 0; r < w.rows; ++r) {
            out << w.county << ',' << w.year << ',' << index_name(r);
            for (std::size_t m = 0; m < kMonths; ++m) out << ',' << format_double(w.values[r * kMonths + m]);
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<WeatherRecord> read_weather_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    std::vector<std::string> expected{"county", "year", "index"};
    for (std::size_t m = 0; m < kMonths; ++m) expected.push_back("m" + std::to_string(m + 1));
    detail::require_header(t, expected, path);
    if (t.header.size() != expected.size()) throw DomainError(path + ": unexpected extra columns");

    std::map<std::pair<std::string, int>, std::map<std::size_t, std::vector<double>>> grid;
    std::vector<std::pair<std::string, int>> order;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        const std::pair key{row[0], detail::parse_int(row[1], where)};
        const std::size_t r = index_row(row[2]);
        std::vector<double> vals(kMonths);
        for (std::size_t m = 0; m < kMonths; ++m) {
            vals[m] = detail::parse_double(row[3 + m], where);
            if (!std::isfinite(vals[m])) throw DomainError(where + ": non-finite weather value");
        }
        if (!grid.count(key)) order.push_back(key);
        if (!grid[key].emplace(r, std::move(vals)).second) throw DomainError(where + ": duplicate index row");
    }
    std::vector<WeatherRecord> out;
    for (const auto& key : order) {
        const auto& rowsmap = grid.at(key);
        WeatherRecord w{key.first, key.second, rowsmap.size(), {}};
        std::size_t expect = 0;
        for (const auto& [r, vals] : rowsmap) {
            if (r != expect++)
                throw DomainError(path + ": " + key.first + "/" + std::to_string(key.second) +
                                  " is missing index rows");
            w.values.insert(w.values.end(), vals.begin(), vals.end());
        }
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace bowley
