#pragma once

// Value-gap penalised bilevel gradient descent.
//
// Each outer iteration k:
//   1. copy the follower I into I_hat and run `inner_iters` subgradient steps
//      on the lower objective (step beta * decay^t, t restarting at 1);
//   2. take one step on
//        F = -UP(x, I) + gamma * (LP(x, I) - LP(x, I_hat))
//      jointly in the leader parameters x and the follower weights, with
//      step alpha0 * decay^k. The leader gradient of LP(x, I_hat) stands in
//      for the gradient of the lower value function.
//   3. project: theta >= 0, rho >= 1 (knot curves are feasible by construction).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bowley/game.hpp"
#include "bowley/payoff.hpp"
#include "bowley/premium.hpp"
#include "bowley/scenario.hpp"

namespace bowley {

struct SolverConfig {
    double alpha0 = 0.1;
    double decay = 0.96;
    double gamma = 10.0;
    std::size_t inner_iters = 50;
    std::size_t outer_iters = 300;
    std::optional<double> beta;  // inner step; defaults to alpha0
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    double leader_step_scale = 10.0;  // multiplies the outer step for leader parameters
    bool rescale_losses = true;       // solve on Y / mean(Y); results mapped back
    double rho_max = std::numeric_limits<double>::infinity();  // upper clamp for rho (P2)
    double leader_clip = 0.3;         // max norm of the leader gradient

    double inner_step() const { return beta.value_or(alpha0); }

    void validate() const {
        if (!(alpha0 > 0.0)) throw DomainError("solver: alpha0 must be > 0");
        if (!(decay > 0.0 && decay < 1.0)) throw DomainError("solver: decay must lie in (0,1)");
        if (!(gamma > 0.0)) throw DomainError("solver: gamma must be > 0");
        if (inner_iters < 1 || outer_iters < 1) throw DomainError("solver: iteration counts must be >= 1");
        if (beta && !(*beta > 0.0)) throw DomainError("solver: beta must be > 0");
        if (!(leader_step_scale > 0.0)) throw DomainError("solver: leader_step_scale must be > 0");
        if (!(rho_max >= 1.0)) throw DomainError("solver: rho_max must be >= 1");
        if (!(leader_clip > 0.0)) throw DomainError("solver: leader_clip must be > 0");
    }
};

struct EquilibriumReport {
    Problem problem = Problem::P1;
    Mode mode = Mode::Indemnity;
    double mu = 0.0;
    double theta = 0.0;
    double rho = 1.0;
    std::vector<double> increments;  // P3 knot increments of g_i
    std::vector<double> curve_s;     // premium distortion sampled on 101 points
    std::vector<double> curve_g;

    double insurer_profit = 0.0;
    double farmer_risk = 0.0;
    double premium = 0.0;
    double expected_payoff = 0.0;
    double uninsured_risk = 0.0;
    double final_value_gap = 0.0;
    double loss_scale = 1.0;

    std::vector<double> up_loss;  // -profit per outer iteration
    std::vector<double> lp_loss;  // farmer risk per outer iteration
    std::vector<double> value_gap;

    std::vector<std::string> ids;
    std::vector<double> losses;
    std::vector<double> probs;
    std::vector<double> payoffs;

    std::uint64_t seed = 0;
    std::size_t iterations_completed = 0;
    std::size_t inner_nonmonotone_steps = 0;
    bool complete = false;

    PremiumPrinciple principle() const {
        switch (problem) {
            case Problem::P1: return ExpectedPremium{theta};
            case Problem::P2: return PowerDistortionPremium{theta, rho};
            case Problem::P3: return GeneralDistortionPremium{DistortionFunction::knots(increments)};
        }
        return ExpectedPremium{theta};
    }
};

/// Recomputes profit from the reported leader parameters and payoff trace.
inline bool report_consistent(const EquilibriumReport& r, double tol = 1e-9, std::string* why = nullptr) {
    try {
        const OutcomeSample payoff(r.payoffs, r.probs);
        const double profit = insurer_profit(r.principle(), CostModel{r.mu}, payoff);
        if (std::abs(profit - r.insurer_profit) > tol) {
            if (why) *why = "profit " + std::to_string(r.insurer_profit) + " != recomputed " + std::to_string(profit);
            return false;
        }
        const double pi = premium(r.principle(), payoff);
        if (std::abs(pi - r.premium) > tol) {
            if (why) *why = "premium mismatch";
            return false;
        }
    } catch (const std::exception& e) {
        if (why) *why = e.what();
        return false;
    }
    return true;
}

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, EquilibriumReport partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const EquilibriumReport& partial() const noexcept { return partial_; }

private:
    EquilibriumReport partial_;
};

/// Scenario data in solver units.
struct PreparedData {
    OutcomeSample losses;  // Y / scale
    Tensor input;          // normalised network input
    double scale = 1.0;
};

inline PreparedData prepare_data(const ScenarioSet& s, const PayoffModel& model, bool rescale) {
    s.validate();
    PreparedData d;
    const auto raw = s.loss_sample();
    const double m = raw.mean();
    d.scale = (rescale && m > 0.0) ? m : 1.0;
    std::vector<double> y(raw.values);
    for (auto& v : y) v /= d.scale;
    d.losses = OutcomeSample(std::move(y), s.probs);
    d.input = model.batch_input(s);
    return d;
}

struct SolverState {
    LeaderParams leader;
    PayoffModel follower;
    std::size_t iteration = 0;
};

struct InnerResult {
    PayoffModel refined;
    double start_value = 0.0;
    double best_value = 0.0;
    std::size_t nonmonotone_steps = 0;
};

namespace detail {
inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite ") + what);
}
}  // namespace detail

/**
 * Approximates the follower's best response for fixed leader parameters.
 * Returns the best iterate seen (the start included), so the reported value
 * never exceeds the starting lower objective.
 */
inline InnerResult inner_solve(const GameConfig& game, const SolverConfig& scfg, const PremiumPrinciple& p,
                               const PayoffModel& start, const PreparedData& data) {
    InnerResult out;
    PayoffModel current = start;
    out.refined = start;
    double prev = 0.0;
    const double beta = scfg.inner_step();
    for (std::size_t t = 0; t <= scfg.inner_iters; ++t) {
        auto values = current.forward(data.input);
        const OutcomeSample payoff(std::move(values), data.losses.probs);
        auto eval = lower_with_gradient(game, p, data.losses, payoff);
        detail::require_finite(eval.value, "lower objective in inner loop");
        if (t == 0) {
            out.start_value = out.best_value = prev = eval.value;
        } else {
            if (eval.value > prev + scfg.tolerance) ++out.nonmonotone_steps;
            prev = eval.value;
            if (eval.value < out.best_value) {
                out.best_value = eval.value;
                out.refined = current;
            }
        }
        if (t == scfg.inner_iters) break;
        current.backward(eval.d_payoff);
        current.network().sgd_step(beta * std::pow(scfg.decay, double(t + 1)));
    }
    return out;
}

inline void project_leader(Problem problem, LeaderParams& leader,
                           double rho_max = std::numeric_limits<double>::infinity()) {
    leader.theta = std::max(leader.theta, 0.0);
    if (problem == Problem::P2) leader.rho = std::clamp(leader.rho, 1.0, rho_max);
}

struct OuterStepInfo {
    double profit = 0.0;
    double lower = 0.0;
    double refined_lower = 0.0;
    double combined = 0.0;
};

/// One projected step on the penalised objective with learning rate `lr`.
inline OuterStepInfo outer_step(const GameConfig& game, const SolverConfig& scfg, SolverState& state,
                                const OutcomeSample& refined_payoff, const PreparedData& data, double lr) {
    const auto p = make_principle(game.problem, state.leader);
    auto values = state.follower.forward(data.input);
    const OutcomeSample payoff(std::move(values), data.losses.probs);
    const auto lower = lower_with_gradient(game, p, data.losses, payoff);

    OuterStepInfo info;
    info.profit = premium(p, payoff) - (1.0 + game.cost.mu) * payoff.mean();
    info.lower = lower.value;
    info.refined_lower = lower_objective(game.farmer, p, data.losses, refined_payoff);
    info.combined = -info.profit + scfg.gamma * (info.lower - info.refined_lower);
    detail::require_finite(info.combined, "combined objective");

    std::vector<double> upstream(payoff.size());
    for (std::size_t k = 0; k < upstream.size(); ++k)
        upstream[k] = -lower.premium.profit_d_values[k] + scfg.gamma * lower.d_payoff[k];

    const auto g_cur = leader_gradient(game.problem, state.leader, lower.premium);
    const auto g_ref =
        leader_gradient(game.problem, state.leader, premium_gradients(p, game.cost, refined_payoff));
    std::vector<double> g_leader(g_cur.size());
    double norm = 0.0;
    for (std::size_t i = 0; i < g_cur.size(); ++i) {
        g_leader[i] = -g_cur[i] + scfg.gamma * (g_cur[i] - g_ref[i]);
        detail::require_finite(g_leader[i], "leader gradient");
        // knot curves step in function space: scale by the knot count
        if (game.problem == Problem::P3) g_leader[i] *= double(g_cur.size());
        norm += g_leader[i] * g_leader[i];
    }
    if (game.problem == Problem::P3) norm /= double(g_cur.size());
    norm = std::sqrt(norm);
    if (norm > scfg.leader_clip)
        for (auto& g : g_leader) g *= scfg.leader_clip / norm;

    state.follower.backward(upstream);
    for (const auto& pv : state.follower.network().parameters())
        for (double g : pv.grad->data) detail::require_finite(g, "follower gradient");
    state.follower.network().sgd_step(lr / scfg.gamma);

    const double leader_lr = lr * scfg.leader_step_scale;
    switch (game.problem) {
        case Problem::P1: state.leader.theta -= leader_lr * g_leader[0]; break;
        case Problem::P2:
            state.leader.theta -= leader_lr * g_leader[0];
            state.leader.rho -= leader_lr * g_leader[1];
            break;
        case Problem::P3:
            for (std::size_t j = 0; j < g_leader.size(); ++j)
                state.leader.curve.raw_increments[j] -= leader_lr * g_leader[j];
            break;
    }
    project_leader(game.problem, state.leader, scfg.rho_max);
    ++state.iteration;
    return info;
}

namespace detail {
inline void fill_report_tail(EquilibriumReport& r, const GameConfig& game, const SolverState& state,
                             const ScenarioSet& s, std::vector<double> payoffs_scaled, double scale) {
    r.theta = state.leader.theta;
    r.rho = state.leader.rho;
    if (game.problem == Problem::P3) r.increments = state.leader.curve.increments();
    const auto p = r.principle();
    const auto g = premium_distortion(p);
    r.curve_s.clear();
    r.curve_g.clear();
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        r.curve_s.push_back(x);
        r.curve_g.push_back(g(x));
    }
    r.ids = s.ids;
    r.losses = s.losses;
    r.probs = s.probs;
    r.payoffs = std::move(payoffs_scaled);
    for (auto& v : r.payoffs) v *= scale;
    const OutcomeSample payoff(r.payoffs, r.probs);
    r.premium = premium(p, payoff);
    r.expected_payoff = payoff.mean();
    r.insurer_profit = r.premium - (1.0 + game.cost.mu) * r.expected_payoff;
    r.farmer_risk = lower_objective(game.farmer, p, s.loss_sample(), payoff);
    r.uninsured_risk = choquet(game.farmer.g, s.loss_sample());
}
}  // namespace detail

/// Runs the full penalised bilevel scheme and reports the final iterate.
/// The trained follower is copied to `trained` when given.
inline EquilibriumReport solve(const GameConfig& game, const SolverConfig& scfg, const ScenarioSet& s,
                               PayoffModel* trained = nullptr) {
    game.validate();
    scfg.validate();
    s.validate();
    const InputMode input = game.mode == Mode::Index ? InputMode::IndexGrid : InputMode::ScalarLoss;
    if (game.mode == Mode::Index && !s.has_weather())
        throw DomainError("index mode requires weather grids in the scenario set");

    SolverState state;
    state.leader = game.initial_leader();
    state.follower = PayoffModel(input, s.rows, game.model, scfg.seed);
    state.follower.fit_normalization(s);
    const PreparedData data = prepare_data(s, state.follower, scfg.rescale_losses);

    EquilibriumReport report;
    report.problem = game.problem;
    report.mode = game.mode;
    report.mu = game.cost.mu;
    report.seed = scfg.seed;
    report.loss_scale = data.scale;

    // Nothing to insure: the farmer is indifferent at best, so the follower
    // takes no cover and the leader keeps its start.
    if (std::all_of(s.losses.begin(), s.losses.end(), [](double y) { return y == 0.0; })) {
        auto params = state.follower.network().parameters();
        for (auto* t : {params[params.size() - 2].value, params.back().value})
            std::fill(t->data.begin(), t->data.end(), 0.0);
        detail::fill_report_tail(report, game, state, s, std::vector<double>(s.size(), 0.0), 1.0);
        report.complete = true;
        if (trained) *trained = state.follower;
        return report;
    }

    auto fail = [&](const std::string& why) {
        auto payoffs = state.follower.forward(data.input);
        try {
            detail::fill_report_tail(report, game, state, s, payoffs, data.scale);
        } catch (const std::exception&) {
        }
        throw DivergenceError(why, report);
    };

    try {
        for (std::size_t k = 1; k <= scfg.outer_iters; ++k) {
            const auto p = make_principle(game.problem, state.leader);
            const auto inner = inner_solve(game, scfg, p, state.follower, data);
            report.inner_nonmonotone_steps += inner.nonmonotone_steps;
            PayoffModel refined = inner.refined;
            const OutcomeSample refined_payoff(refined.forward(data.input), data.losses.probs);

            const auto info =
                outer_step(game, scfg, state, refined_payoff, data, scfg.alpha0 * std::pow(scfg.decay, double(k)));
            report.up_loss.push_back(-info.profit * data.scale);
            report.lp_loss.push_back(info.lower * data.scale);
            report.value_gap.push_back((info.lower - info.refined_lower) * data.scale);
            report.iterations_completed = k;
            if (std::abs(info.profit * data.scale) > 1e12 || std::abs(info.lower * data.scale) > 1e12)
                fail("divergence: objective exceeded 1e12 at outer iteration " + std::to_string(k));
        }
        const auto p = make_principle(game.problem, state.leader);
        const auto inner = inner_solve(game, scfg, p, state.follower, data);
        report.final_value_gap = (inner.start_value - inner.best_value) * data.scale;
        auto payoffs = state.follower.forward(data.input);
        detail::fill_report_tail(report, game, state, s, std::move(payoffs), data.scale);
    } catch (const DivergenceError&) {
        throw;
    } catch (const DomainError&) {
        throw;
    } catch (const std::runtime_error& e) {
        fail(std::string("aborted: ") + e.what());
    }
    report.complete = true;
    if (trained) {
        *trained = state.follower;
        trained->set_output_scale(data.scale);
    }
    return report;
}

}  // namespace bowley
