#pragma once

// Insurer premium principles and profit.

#include <cmath>
#include <variant>
#include <vector>

#include "bowley/choquet.hpp"
#include "bowley/errors.hpp"

namespace bowley {

/// (1 + theta) E[I]
struct ExpectedPremium {
    double theta = 0.0;
};

/// (1 + theta) * Choquet integral of I under s^(1/rho)
struct PowerDistortionPremium {
    double theta = 0.0;
    double rho = 1.0;
};

/// Choquet integral of I under an arbitrary distortion; g(1) is left free.
struct GeneralDistortionPremium {
    DistortionFunction g = DistortionFunction::linear(1.0);
};

using PremiumPrinciple = std::variant<ExpectedPremium, PowerDistortionPremium, GeneralDistortionPremium>;

struct CostModel {
    double mu = 0.02;
};

inline void validate(const PremiumPrinciple& p) {
    std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ExpectedPremium>) {
                if (!(v.theta >= 0.0)) throw DomainError("premium: theta must be >= 0");
            } else if constexpr (std::is_same_v<T, PowerDistortionPremium>) {
                if (!(v.theta >= 0.0)) throw DomainError("premium: theta must be >= 0");
                if (!(v.rho >= 1.0)) throw DomainError("premium: rho must be >= 1");
            }
        },
        p);
}

inline void validate(const CostModel& c) {
    if (!(c.mu >= 0.0) || !std::isfinite(c.mu)) throw DomainError("cost: mu must be finite and >= 0");
}

/// The distortion whose Choquet integral is the premium.
inline DistortionFunction premium_distortion(const PremiumPrinciple& p) {
    validate(p);
    return std::visit(
        [](const auto& v) -> DistortionFunction {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ExpectedPremium>)
                return DistortionFunction::linear(1.0 + v.theta);
            else if constexpr (std::is_same_v<T, PowerDistortionPremium>)
                return DistortionFunction::power(v.rho, 1.0 + v.theta);
            else
                return v.g;
        },
        p);
}

namespace detail {
inline void require_nonnegative(const OutcomeSample& payoff) {
    payoff.validate();
    for (double v : payoff.values)
        if (v < 0.0) throw DomainError("premium: payoff values must be >= 0");
}
}  // namespace detail

inline double premium(const PremiumPrinciple& p, const OutcomeSample& payoff) {
    detail::require_nonnegative(payoff);
    validate(p);
    if (const auto* e = std::get_if<ExpectedPremium>(&p)) return (1.0 + e->theta) * payoff.mean();
    if (const auto* w = std::get_if<PowerDistortionPremium>(&p))
        return (1.0 + w->theta) * choquet(DistortionFunction::power(w->rho, 1.0), payoff);
    return choquet(std::get<GeneralDistortionPremium>(p).g, payoff);
}

/// Pi(I) - (1 + mu) E[I]
inline double insurer_profit(const PremiumPrinciple& p, const CostModel& c, const OutcomeSample& payoff) {
    validate(c);
    return premium(p, payoff) - (1.0 + c.mu) * payoff.mean();
}

struct PremiumGradients {
    double d_theta = 0.0;
    double d_rho = 0.0;
    std::vector<double> d_increments;   // nonempty only for knot distortions
    std::vector<double> d_values;       // dPi / dI_k
    std::vector<double> profit_d_values;  // d(profit) / dI_k
};

/**
 * Partial derivatives of the premium (and of the insurer profit with respect to
 * the payoff vector). Where the Choquet sum is not differentiable in the payoff
 * the sorted-weight subgradient is returned.
 */
inline PremiumGradients premium_gradients(const PremiumPrinciple& p, const CostModel& c,
                                          const OutcomeSample& payoff) {
    detail::require_nonnegative(payoff);
    validate(p);
    validate(c);
    const std::size_t q = payoff.size();
    PremiumGradients out;
    out.d_values.assign(q, 0.0);

    if (const auto* e = std::get_if<ExpectedPremium>(&p)) {
        out.d_theta = payoff.mean();
        for (std::size_t k = 0; k < q; ++k) out.d_values[k] = (1.0 + e->theta) * payoff.probs[k];
    } else if (const auto* w = std::get_if<PowerDistortionPremium>(&p)) {
        const auto base = DistortionFunction::power(w->rho, 1.0);
        const auto weights = choquet_subgradient(base, payoff);
        double unloaded = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            unloaded += weights[k] * payoff.values[k];
            out.d_values[k] = (1.0 + w->theta) * weights[k];
        }
        out.d_theta = unloaded;
        // d/drho s^(1/rho) = -s^(1/rho) ln(s) / rho^2, zero at s = 0 and s = 1.
        const auto order = descending_order(payoff.values);
        const auto levels = tail_levels(payoff, order);
        double prev = 0.0;
        double acc = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            const double s = levels[k];
            const double cur =
                (s <= 0.0 || s >= 1.0) ? 0.0 : -std::pow(s, 1.0 / w->rho) * std::log(s) / (w->rho * w->rho);
            acc += (cur - prev) * payoff.values[order[k]];
            prev = cur;
        }
        out.d_rho = (1.0 + w->theta) * acc;
    } else {
        const auto& g = std::get<GeneralDistortionPremium>(p).g;
        out.d_values = choquet_subgradient(g, payoff);
        if (g.kind() == DistortionKind::Knots) {
            // Pi = sum_k (I_(k) - I_(k+1)) g(S_k), linear in the increments.
            const auto order = descending_order(payoff.values);
            const auto levels = tail_levels(payoff, order);
            const std::size_t m = g.knot_count();
            std::vector<double> full(m + 1, 0.0);  // suffix-free difference array
            out.d_increments.assign(m, 0.0);
            for (std::size_t k = 0; k < q; ++k) {
                const double next = (k + 1 < q) ? payoff.values[order[k + 1]] : 0.0;
                const double coef = payoff.values[order[k]] - next;
                if (coef == 0.0) continue;
                auto [j, frac] = g.knot_position(levels[k]);
                full[j] += coef;  // increments 0..j-1 get the full coefficient
                if (j < m) out.d_increments[j] += coef * frac;
            }
            double running = 0.0;
            for (std::size_t i = m; i-- > 0;) {
                running += full[i + 1];
                out.d_increments[i] += running;
            }
        }
    }

    out.profit_d_values.resize(q);
    for (std::size_t k = 0; k < q; ++k)
        out.profit_d_values[k] = out.d_values[k] - (1.0 + c.mu) * payoff.probs[k];
    return out;
}

}  // namespace bowley
