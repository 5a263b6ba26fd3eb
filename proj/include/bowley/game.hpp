#pragma once

// Bilevel objectives of the insurer-farmer game.
//
//   upper (insurer):  Pi(I) - (1 + mu) E[I]                 (maximised)
//   lower (farmer):   rho_F(Y - I + Pi(I))                   (minimised)
//
// For a farmer distortion with g_f(1) = 1 the premium is a constant shift,
// so the lower objective is evaluated as rho_F(Y - I) + Pi(I).

#include <cmath>
#include <string>
#include <vector>

#include "bowley/choquet.hpp"
#include "bowley/payoff.hpp"
#include "bowley/premium.hpp"
#include "bowley/scenario.hpp"

namespace bowley {

enum class Problem { P1, P2, P3 };
enum class Mode { Index, Indemnity };

inline const char* to_string(Problem p) {
    switch (p) {
        case Problem::P1: return "P1";
        case Problem::P2: return "P2";
        case Problem::P3: return "P3";
    }
    return "?";
}

inline const char* to_string(Mode m) { return m == Mode::Index ? "index" : "indemnity"; }

struct FarmerPreference {
    DistortionFunction g = DistortionFunction::cvar(0.8);

    static FarmerPreference cvar(double alpha) { return {DistortionFunction::cvar(alpha)}; }
    static FarmerPreference convex_combo(double lambda, double alpha) {
        return {DistortionFunction::convex_combo(lambda, alpha)};
    }

    void validate() const {
        if (g.kind() != DistortionKind::CVaR && g.kind() != DistortionKind::ConvexCombo)
            throw DomainError("farmer distortion must be cvar or convex_combo");
    }
};

/// Leader (insurer) decision variables. Which fields are live depends on the problem.
struct LeaderParams {
    double theta = 0.0;
    double rho = 1.0;
    MonotonePricingCurve curve;
};

struct LeaderInit {
    double theta = 0.1;
    double rho = 1.0;
    std::size_t knots = 100;
};

struct GameConfig {
    Problem problem = Problem::P1;
    Mode mode = Mode::Indemnity;
    CostModel cost;
    FarmerPreference farmer;
    LeaderInit init;
    ArchitectureConfig model;

    void validate() const {
        farmer.validate();
        bowley::validate(cost);
        if (!(init.theta >= 0.0)) throw DomainError("leader init: theta must be >= 0");
        if (!(init.rho >= 1.0)) throw DomainError("leader init: rho must be >= 1");
        if (init.knots == 0) throw DomainError("leader init: knots must be >= 1");
    }

    LeaderParams initial_leader() const {
        LeaderParams l;
        l.theta = init.theta;
        l.rho = init.rho;
        if (problem == Problem::P3)
            l.curve = MonotonePricingCurve::from_distortion(DistortionFunction::linear(1.0 + init.theta), init.knots);
        return l;
    }
};

inline PremiumPrinciple make_principle(Problem problem, const LeaderParams& leader) {
    switch (problem) {
        case Problem::P1: return ExpectedPremium{leader.theta};
        case Problem::P2: return PowerDistortionPremium{leader.theta, leader.rho};
        case Problem::P3: return GeneralDistortionPremium{pricing_curve(leader.curve)};
    }
    return ExpectedPremium{leader.theta};
}

/// Flattened gradient of the premium with respect to the live leader parameters.
inline std::vector<double> leader_gradient(Problem problem, const LeaderParams& leader, const PremiumGradients& g) {
    switch (problem) {
        case Problem::P1: return {g.d_theta};
        case Problem::P2: return {g.d_theta, g.d_rho};
        case Problem::P3: {
            auto jac = leader.curve.jacobian_diagonal();
            std::vector<double> out(jac.size());
            for (std::size_t j = 0; j < jac.size(); ++j) out[j] = g.d_increments[j] * jac[j];
            return out;
        }
    }
    return {};
}

/// Farmer risk rho_F(Y - I + Pi(I)).
inline double lower_objective(const FarmerPreference& farmer, const PremiumPrinciple& p, const OutcomeSample& losses,
                              const OutcomeSample& payoff) {
    const double pi = premium(p, payoff);
    std::vector<double> retained(losses.size());
    for (std::size_t k = 0; k < retained.size(); ++k) retained[k] = losses.values[k] - payoff.values[k];
    return choquet(farmer.g, OutcomeSample(std::move(retained), losses.probs)) + pi;
}

inline double upper_objective(const CostModel& cost, const PremiumPrinciple& p, const OutcomeSample& payoff) {
    return insurer_profit(p, cost, payoff);
}

inline double lower_objective(const GameConfig& cfg, const PremiumPrinciple& p, PayoffModel& model,
                              const ScenarioSet& s) {
    return lower_objective(cfg.farmer, p, s.loss_sample(), payoff_batch(model, s));
}

inline double upper_objective(const GameConfig& cfg, const PremiumPrinciple& p, PayoffModel& model,
                              const ScenarioSet& s) {
    return upper_objective(cfg.cost, p, payoff_batch(model, s));
}

/// -UP(I) + gamma (LP(I) - LP(I_hat)), with I_hat the refined follower.
inline double combined_objective(const GameConfig& cfg, const PremiumPrinciple& p, const OutcomeSample& losses,
                                 const OutcomeSample& payoff, const OutcomeSample& refined, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("combined objective: gamma must be > 0");
    return -upper_objective(cfg.cost, p, payoff) +
           gamma * (lower_objective(cfg.farmer, p, losses, payoff) - lower_objective(cfg.farmer, p, losses, refined));
}

inline double combined_objective(const GameConfig& cfg, const PremiumPrinciple& p, PayoffModel& model,
                                 PayoffModel& ref_model, const ScenarioSet& s, double gamma) {
    const auto losses = s.loss_sample();
    const auto payoff = payoff_batch(model, s);
    const auto refined = payoff_batch(ref_model, s);
    return combined_objective(cfg, p, losses, payoff, refined, gamma);
}

/// Value and payoff-gradient of the lower objective (sorted-weight subgradient).
struct LowerEvaluation {
    double value = 0.0;
    std::vector<double> d_payoff;
    PremiumGradients premium;
};

inline LowerEvaluation lower_with_gradient(const GameConfig& cfg, const PremiumPrinciple& p,
                                           const OutcomeSample& losses, const OutcomeSample& payoff) {
    LowerEvaluation out;
    out.premium = premium_gradients(p, cfg.cost, payoff);
    std::vector<double> retained(losses.size());
    for (std::size_t k = 0; k < retained.size(); ++k) retained[k] = losses.values[k] - payoff.values[k];
    const OutcomeSample z(std::move(retained), losses.probs);
    const auto w = choquet_subgradient(cfg.farmer.g, z);
    double risk = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) risk += w[k] * z.values[k];
    out.value = risk + premium(p, payoff);
    out.d_payoff.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) out.d_payoff[k] = -w[k] + out.premium.d_values[k];
    return out;
}

}  // namespace bowley
