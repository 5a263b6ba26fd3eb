#pragma once

// JSON/CSV emitters for solver and oracle results, and their re-validation.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bowley/checkpoint.hpp"
#include "bowley/dataio.hpp"
#include "bowley/oracle.hpp"
#include "bowley/vpbgd.hpp"

namespace bowley {

inline constexpr int kReportVersion = 1;

inline nlohmann::json principle_to_json(const PremiumPrinciple& p) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ExpectedPremium>)
                return {{"kind", "expected"}, {"theta", v.theta}};
            else if constexpr (std::is_same_v<T, PowerDistortionPremium>)
                return {{"kind", "power"}, {"theta", v.theta}, {"rho", v.rho}};
            else
                return {{"kind", "knots"}, {"increments", v.g.increments()}};
        },
        p);
}

inline PremiumPrinciple principle_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "expected") return ExpectedPremium{j.at("theta").get<double>()};
    if (kind == "power") return PowerDistortionPremium{j.at("theta").get<double>(), j.at("rho").get<double>()};
    if (kind == "knots")
        return GeneralDistortionPremium{DistortionFunction::knots(j.at("increments").get<std::vector<double>>())};
    throw DomainError("unknown premium kind '" + kind + "'");
}

inline nlohmann::json report_to_json(const EquilibriumReport& r, const nlohmann::json& config = nullptr) {
    nlohmann::json j;
    j["format"] = "bowley.report";
    j["version"] = kReportVersion;
    j["complete"] = r.complete;
    j["problem"] = to_string(r.problem);
    j["mode"] = to_string(r.mode);
    j["mu"] = r.mu;
    j["leader"] = {{"theta", r.theta}, {"rho", r.rho}, {"increments", r.increments}};
    j["pricing_curve"] = {{"s", r.curve_s}, {"g", r.curve_g}};
    j["insurer_profit"] = r.insurer_profit;
    j["farmer_risk"] = r.farmer_risk;
    j["premium"] = r.premium;
    j["expected_payoff"] = r.expected_payoff;
    j["uninsured_risk"] = r.uninsured_risk;
    j["final_value_gap"] = r.final_value_gap;
    j["loss_scale"] = r.loss_scale;
    j["seed"] = r.seed;
    j["iterations_completed"] = r.iterations_completed;
    j["inner_nonmonotone_steps"] = r.inner_nonmonotone_steps;
    j["curves"] = {{"up_loss", r.up_loss}, {"lp_loss", r.lp_loss}, {"value_gap", r.value_gap}};
    j["trace"] = {{"id", r.ids}, {"prob", r.probs}, {"loss", r.losses}, {"payoff", r.payoffs}};
    j["config"] = config;
    return j;
}

inline EquilibriumReport report_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "bowley.report") throw DomainError("not a report");
        if (j.at("version").get<int>() != kReportVersion) throw DomainError("unsupported report version");
        EquilibriumReport r;
        const auto problem = j.at("problem").get<std::string>();
        if (problem == "P1")
            r.problem = Problem::P1;
        else if (problem == "P2")
            r.problem = Problem::P2;
        else if (problem == "P3")
            r.problem = Problem::P3;
        else
            throw DomainError("unknown problem " + problem);
        r.mode = j.at("mode").get<std::string>() == "index" ? Mode::Index : Mode::Indemnity;
        r.complete = j.at("complete").get<bool>();
        r.mu = j.at("mu").get<double>();
        r.theta = j.at("leader").at("theta").get<double>();
        r.rho = j.at("leader").at("rho").get<double>();
        r.increments = j.at("leader").at("increments").get<std::vector<double>>();
        r.curve_s = j.at("pricing_curve").at("s").get<std::vector<double>>();
        r.curve_g = j.at("pricing_curve").at("g").get<std::vector<double>>();
        r.insurer_profit = j.at("insurer_profit").get<double>();
        r.farmer_risk = j.at("farmer_risk").get<double>();
        r.premium = j.at("premium").get<double>();
        r.expected_payoff = j.at("expected_payoff").get<double>();
        r.uninsured_risk = j.at("uninsured_risk").get<double>();
        r.final_value_gap = j.at("final_value_gap").get<double>();
        r.loss_scale = j.at("loss_scale").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.iterations_completed = j.at("iterations_completed").get<std::size_t>();
        r.inner_nonmonotone_steps = j.at("inner_nonmonotone_steps").get<std::size_t>();
        r.up_loss = j.at("curves").at("up_loss").get<std::vector<double>>();
        r.lp_loss = j.at("curves").at("lp_loss").get<std::vector<double>>();
        r.value_gap = j.at("curves").at("value_gap").get<std::vector<double>>();
        r.ids = j.at("trace").at("id").get<std::vector<std::string>>();
        r.probs = j.at("trace").at("prob").get<std::vector<double>>();
        r.losses = j.at("trace").at("loss").get<std::vector<double>>();
        r.payoffs = j.at("trace").at("payoff").get<std::vector<double>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("malformed report: ") + e.what());
    }
}

inline nlohmann::json farmer_to_json(const FarmerPreference& f) {
    nlohmann::json j{{"kind", to_string(f.g.kind())}, {"alpha", f.g.alpha()}};
    if (f.g.kind() == DistortionKind::ConvexCombo) j["lambda"] = f.g.lambda();
    return j;
}

inline FarmerPreference farmer_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "cvar") return FarmerPreference::cvar(j.at("alpha").get<double>());
    if (kind == "convex_combo")
        return FarmerPreference::convex_combo(j.at("lambda").get<double>(), j.at("alpha").get<double>());
    throw DomainError("unknown farmer kind '" + kind + "'");
}

inline nlohmann::json oracle_to_json(const OracleResult& r, const ScenarioSet& s, const FarmerPreference& farmer,
                                     const CostModel& cost, const nlohmann::json& config = nullptr) {
    nlohmann::json j;
    j["format"] = "bowley.oracle";
    j["version"] = kReportVersion;
    j["problem"] = to_string(r.problem);
    j["principle"] = principle_to_json(r.principle);
    j["deductible"] = r.deductible ? nlohmann::json(*r.deductible) : nlohmann::json(nullptr);
    j["insurer_profit"] = r.insurer_profit;
    j["farmer_risk"] = r.farmer_risk;
    j["premium"] = r.premium;
    j["expected_payoff"] = r.expected_payoff;
    j["uninsured_risk"] = r.uninsured_risk;
    j["leader_points"] = r.leader_points;
    j["follower_evaluations"] = r.follower_evaluations;
    j["mu"] = cost.mu;
    j["farmer"] = farmer_to_json(farmer);
    j["trace"] = {{"id", s.ids}, {"prob", s.probs}, {"loss", s.losses}, {"payoff", r.payoffs}};
    j["config"] = config;
    return j;
}

inline void write_curves_csv(const EquilibriumReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "iter,up_loss,lp_loss\n";
    for (std::size_t k = 0; k < r.up_loss.size(); ++k)
        out << (k + 1) << ',' << format_double(r.up_loss[k]) << ',' << format_double(r.lp_loss[k]) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline void write_payoff_csv(const EquilibriumReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "scenario,Y,I\n";
    for (std::size_t k = 0; k < r.payoffs.size(); ++k)
        out << r.ids[k] << ',' << format_double(r.losses[k]) << ',' << format_double(r.payoffs[k]) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

/// Re-derives premium and profit of a stored report from its leader
/// parameters and payoff trace.
inline bool verify_report_json(const nlohmann::json& j, std::string* why = nullptr, double tol = 1e-9) {
    try {
        const auto r = report_from_json(j);
        return report_consistent(r, tol, why);
    } catch (const std::exception& e) {
        if (why) *why = e.what();
        return false;
    }
}

/// Recomputes profit, premium and farmer risk of a stored oracle result.
inline bool verify_oracle_json(const nlohmann::json& j, std::string* why = nullptr, double tol = 1e-12) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    try {
        if (j.at("format").get<std::string>() != "bowley.oracle") return fail("not an oracle result");
        const auto p = principle_from_json(j.at("principle"));
        const auto farmer = farmer_from_json(j.at("farmer"));
        const CostModel cost{j.at("mu").get<double>()};
        const auto& t = j.at("trace");
        const OutcomeSample losses(t.at("loss").get<std::vector<double>>(), t.at("prob").get<std::vector<double>>());
        const OutcomeSample payoff(t.at("payoff").get<std::vector<double>>(), losses.probs);
        const double profit = insurer_profit(p, cost, payoff);
        if (std::abs(profit - j.at("insurer_profit").get<double>()) > tol) return fail("profit mismatch");
        if (std::abs(premium(p, payoff) - j.at("premium").get<double>()) > tol) return fail("premium mismatch");
        const double risk = lower_objective(farmer, p, losses, payoff);
        if (std::abs(risk - j.at("farmer_risk").get<double>()) > tol) return fail("farmer risk mismatch");
        return true;
    } catch (const std::exception& e) {
        return fail(e.what());
    }
}

}  // namespace bowley
