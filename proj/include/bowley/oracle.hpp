#pragma once

// Brute-force reference solvers for tiny instances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bowley/choquet.hpp"
#include "bowley/errors.hpp"
#include "bowley/game.hpp"
#include "bowley/premium.hpp"
#include "bowley/scenario.hpp"

namespace bowley {

inline constexpr std::size_t kOracleMaxScenarios = 6;
inline constexpr std::size_t kOracleMaxLevels = 21;
inline constexpr double kOracleTieTol = 1e-12;

struct OracleResult {
    Problem problem = Problem::P1;
    PremiumPrinciple principle = ExpectedPremium{0.0};
    std::optional<double> deductible;  // stop-loss follower only; nullopt = no insurance
    std::vector<double> payoffs;
    double insurer_profit = 0.0;
    double farmer_risk = 0.0;
    double premium = 0.0;
    double expected_payoff = 0.0;
    double uninsured_risk = 0.0;
    std::size_t leader_points = 0;
    std::size_t follower_evaluations = 0;
};

struct FollowerChoice {
    std::vector<double> payoffs;
    double lower = 0.0;
    double expected = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {
inline bool better_follower(double lower, double expected, double best_lower, double best_expected) {
    if (lower < best_lower - kOracleTieTol) return true;
    if (lower > best_lower + kOracleTieTol) return false;
    return expected < best_expected - kOracleTieTol;
}
}  // namespace detail

/**
 * Exhaustive lower-level solve over per-scenario payoff levels.
 * `groups` (optional, one label per scenario) forces equal payoffs within a
 * group, e.g. scenarios that share a loss value in indemnity mode; a group
 * draws its levels from its first member.
 */
inline FollowerChoice enumerate_follower(const PremiumPrinciple& p, const FarmerPreference& farmer,
                                         const ScenarioSet& s, const std::vector<std::vector<double>>& levels,
                                         const std::vector<std::size_t>& groups = {}) {
    s.validate();
    validate(p);
    const std::size_t q = s.size();
    if (q > kOracleMaxScenarios)
        throw RefusedError("enumerate_follower: " + std::to_string(q) + " scenarios exceeds the bound of " +
                           std::to_string(kOracleMaxScenarios));
    if (levels.size() != q) throw ShapeError("enumerate_follower: need one level grid per scenario");
    for (const auto& l : levels) {
        if (l.empty()) throw DomainError("enumerate_follower: empty level grid");
        if (l.size() > kOracleMaxLevels)
            throw RefusedError("enumerate_follower: level grid of " + std::to_string(l.size()) +
                               " exceeds the bound of " + std::to_string(kOracleMaxLevels));
        for (double v : l)
            if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("enumerate_follower: levels must be >= 0");
    }
    std::vector<std::size_t> label = groups;
    if (label.empty()) {
        label.resize(q);
        for (std::size_t k = 0; k < q; ++k) label[k] = k;
    }
    if (label.size() != q) throw ShapeError("enumerate_follower: one group label per scenario");

    // free positions: first member of each group
    std::vector<std::size_t> leader_of(q), free;
    for (std::size_t k = 0; k < q; ++k) {
        std::size_t first = k;
        for (std::size_t j = 0; j < k; ++j)
            if (label[j] == label[k]) {
                first = j;
                break;
            }
        leader_of[k] = first;
        if (first == k) free.push_back(k);
    }

    const auto losses = s.loss_sample();
    FollowerChoice best;
    bool have = false;
    std::vector<std::size_t> idx(free.size(), 0);
    std::vector<double> trial(q);
    while (true) {
        for (std::size_t f = 0; f < free.size(); ++f) trial[free[f]] = levels[free[f]][idx[f]];
        for (std::size_t k = 0; k < q; ++k) trial[k] = trial[leader_of[k]];
        const OutcomeSample payoff(trial, s.probs);
        const double lower = lower_objective(farmer, p, losses, payoff);
        const double expected = payoff.mean();
        ++best.evaluations;
        if (!have || detail::better_follower(lower, expected, best.lower, best.expected)) {
            best.payoffs = trial;
            best.lower = lower;
            best.expected = expected;
            have = true;
        }
        std::size_t f = 0;
        while (f < free.size() && ++idx[f] == levels[free[f]].size()) idx[f++] = 0;
        if (f == free.size()) break;
    }
    return best;
}

inline std::vector<double> stop_loss(const std::vector<double>& y, double d) {
    std::vector<double> out(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) out[k] = std::max(y[k] - d, 0.0);
    return out;
}

/// Farmer-best deductible among `d_grid` (no insurance always available).
inline FollowerChoice stop_loss_follower(const PremiumPrinciple& p, const FarmerPreference& farmer,
                                         const ScenarioSet& s, const std::vector<double>& d_grid,
                                         std::optional<double>* chosen = nullptr) {
    const auto losses = s.loss_sample();
    FollowerChoice best;
    best.payoffs.assign(s.size(), 0.0);
    best.lower = lower_objective(farmer, p, losses, OutcomeSample(best.payoffs, s.probs));
    best.expected = 0.0;
    best.evaluations = 1;
    if (chosen) chosen->reset();
    for (double d : d_grid) {
        auto trial = stop_loss(s.losses, d);
        const OutcomeSample payoff(trial, s.probs);
        const double lower = lower_objective(farmer, p, losses, payoff);
        const double expected = payoff.mean();
        ++best.evaluations;
        if (detail::better_follower(lower, expected, best.lower, best.expected)) {
            best.payoffs = std::move(trial);
            best.lower = lower;
            best.expected = expected;
            if (chosen) *chosen = d;
        }
    }
    return best;
}

/**
 * Deductibles 0 and every loss value, plus `points` uniform points on
 * [0, max Y]. Between consecutive loss values the lower objective is affine
 * in d, so the loss values alone already contain a farmer-best deductible.
 */
inline std::vector<double> deductible_grid(const ScenarioSet& s, std::size_t points = 0) {
    const double top = *std::max_element(s.losses.begin(), s.losses.end());
    std::vector<double> d(s.losses.begin(), s.losses.end());
    d.push_back(0.0);
    if (points > 1)
        for (std::size_t i = 0; i < points; ++i) d.push_back(top * double(i) / double(points - 1));
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    if (n == 0 || !(hi >= lo)) throw DomainError("grid: need n >= 1 and hi >= lo");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
    return g;
}

namespace detail {
template <class Follower>
OracleResult leader_search(Problem problem, const std::vector<PremiumPrinciple>& candidates,
                           const FarmerPreference& farmer, const CostModel& cost, const ScenarioSet& s,
                           Follower&& follower) {
    if (candidates.empty()) throw DomainError("oracle: empty leader grid");
    s.validate();
    farmer.validate();
    validate(cost);
    OracleResult best;
    best.problem = problem;
    best.uninsured_risk = choquet(farmer.g, s.loss_sample());
    bool have = false;
    std::size_t evals = 0;
    for (const auto& p : candidates) {
        std::optional<double> d;
        const auto choice = follower(p, d);
        evals += choice.evaluations;
        const OutcomeSample payoff(choice.payoffs, s.probs);
        const double profit = insurer_profit(p, cost, payoff);
        if (!have || profit > best.insurer_profit + kOracleTieTol) {
            best.principle = p;
            best.deductible = d;
            best.payoffs = choice.payoffs;
            best.insurer_profit = profit;
            best.farmer_risk = choice.lower;
            best.premium = premium(p, payoff);
            best.expected_payoff = payoff.mean();
            have = true;
        }
    }
    best.leader_points = candidates.size();
    best.follower_evaluations = evals;
    return best;
}
}  // namespace detail

/// Leader grid search with a stop-loss follower.
inline OracleResult stoploss_oracle(Problem problem, const std::vector<PremiumPrinciple>& candidates,
                                    const FarmerPreference& farmer, const CostModel& cost, const ScenarioSet& s,
                                    const std::vector<double>& d_grid) {
    if (d_grid.empty()) throw DomainError("oracle: empty deductible grid");
    return detail::leader_search(problem, candidates, farmer, cost, s,
                                 [&](const PremiumPrinciple& p, std::optional<double>& d) {
                                     return stop_loss_follower(p, farmer, s, d_grid, &d);
                                 });
}

/// Leader grid search with an exhaustive follower over payoff levels.
inline OracleResult enumeration_oracle(Problem problem, const std::vector<PremiumPrinciple>& candidates,
                                       const FarmerPreference& farmer, const CostModel& cost, const ScenarioSet& s,
                                       const std::vector<std::vector<double>>& levels,
                                       const std::vector<std::size_t>& groups = {}) {
    return detail::leader_search(problem, candidates, farmer, cost, s,
                                 [&](const PremiumPrinciple& p, std::optional<double>&) {
                                     return enumerate_follower(p, farmer, s, levels, groups);
                                 });
}

inline std::vector<PremiumPrinciple> expected_grid(const std::vector<double>& thetas) {
    std::vector<PremiumPrinciple> out;
    for (double t : thetas) out.push_back(ExpectedPremium{t});
    return out;
}

/// Expected-value points (rho = 1) followed by the full (theta, rho) grid.
inline std::vector<PremiumPrinciple> power_grid(const std::vector<double>& thetas, const std::vector<double>& rhos) {
    auto out = expected_grid(thetas);
    for (double t : thetas)
        for (double r : rhos) out.push_back(PowerDistortionPremium{t, r});
    return out;
}

/**
 * Knot curves with q equal knots whose values g(k/q) are nondecreasing
 * picks from `values`. With equal scenario probabilities the premium only
 * reads g at k/q, so this covers every pricing curve on the value grid.
 */
inline std::vector<PremiumPrinciple> knot_grid(std::size_t q, const std::vector<double>& values,
                                               std::size_t max_points = 2'000'000) {
    if (q == 0 || values.empty()) throw DomainError("knot grid: need q >= 1 and values");
    std::vector<double> v(values);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    if (v.front() < 0.0) throw DomainError("knot grid: values must be >= 0");
    std::vector<PremiumPrinciple> out;
    std::vector<std::size_t> idx(q, 0);
    while (true) {
        std::vector<double> inc(q);
        double prev = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            inc[k] = v[idx[k]] - prev;
            prev = v[idx[k]];
        }
        out.push_back(GeneralDistortionPremium{DistortionFunction::knots(std::move(inc))});
        if (out.size() > max_points) throw RefusedError("knot grid: more than " + std::to_string(max_points) + " curves");
        // next nondecreasing index tuple
        std::size_t k = q;
        while (k > 0 && idx[k - 1] + 1 == v.size()) --k;
        if (k == 0) break;
        const std::size_t base = idx[k - 1] + 1;
        for (std::size_t j = k - 1; j < q; ++j) idx[j] = base;
    }
    return out;
}

inline bool equal_probabilities(const ScenarioSet& s) {
    for (double p : s.probs)
        if (std::abs(p - s.probs.front()) > 1e-15) return false;
    return true;
}

struct OracleGrids {
    std::vector<double> thetas = uniform_grid(0.0, 5.0, 501);
    std::vector<double> rhos = uniform_grid(1.0, 4.0, 31);
    std::vector<double> knot_values = uniform_grid(0.0, 2.0, 21);
    std::size_t deductible_points = 0;
};

/// Problem-specific stop-loss oracle; candidate sets are nested P1 in P2 in P3.
inline OracleResult problem_oracle(Problem problem, const FarmerPreference& farmer, const CostModel& cost,
                                   const ScenarioSet& s, const OracleGrids& grids = {}) {
    const auto d = deductible_grid(s, grids.deductible_points);
    std::vector<PremiumPrinciple> c;
    switch (problem) {
        case Problem::P1: c = expected_grid(grids.thetas); break;
        case Problem::P2: c = power_grid(grids.thetas, grids.rhos); break;
        case Problem::P3: {
            if (!equal_probabilities(s)) throw RefusedError("P3 oracle: needs equally likely scenarios");
            if (s.size() > kOracleMaxScenarios)
                throw RefusedError("P3 oracle: " + std::to_string(s.size()) + " scenarios exceeds the bound of " +
                                   std::to_string(kOracleMaxScenarios));
            c = power_grid(grids.thetas, grids.rhos);
            auto k = knot_grid(s.size(), grids.knot_values);
            c.insert(c.end(), std::make_move_iterator(k.begin()), std::make_move_iterator(k.end()));
            break;
        }
    }
    return stoploss_oracle(problem, c, farmer, cost, s, d);
}

}  // namespace bowley
