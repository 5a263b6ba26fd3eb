#pragma once

// Distortion functions and Choquet integrals over finite (empirical)
// probability spaces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bowley/errors.hpp"

namespace bowley {

enum class DistortionKind { Linear, CVaR, ConvexCombo, Power, Knots };

inline const char* to_string(DistortionKind k) {
    switch (k) {
        case DistortionKind::Linear: return "linear";
        case DistortionKind::CVaR: return "cvar";
        case DistortionKind::ConvexCombo: return "convex_combo";
        case DistortionKind::Power: return "power";
        case DistortionKind::Knots: return "knots";
    }
    return "?";
}

/**
 * A nondecreasing map g: [0,1] -> R+ with g(0) = 0.
 *
 * Closed-form kinds:
 *   Linear(scale)             g(s) = scale * s
 *   CVaR(alpha)               g(s) = min(s / (1 - alpha), 1)
 *   ConvexCombo(lambda,alpha) g(s) = lambda * s + (1 - lambda) * min(s / (1 - alpha), 1)
 *   Power(rho, scale)         g(s) = scale * s^(1/rho)
 *
 * Knots(increments) is the piecewise-linear curve through the M+1 uniform
 * abscissae j/M whose successive rises are the (nonnegative) increments.
 *
 * Instances are immutable after construction.
 */
class DistortionFunction {
public:
    static DistortionFunction linear(double scale = 1.0) {
        if (!(scale >= 0.0) || !std::isfinite(scale))
            throw DomainError("linear distortion: scale must be finite and >= 0");
        DistortionFunction g(DistortionKind::Linear);
        g.scale_ = scale;
        return g;
    }

    static DistortionFunction cvar(double alpha) {
        check_alpha(alpha);
        DistortionFunction g(DistortionKind::CVaR);
        g.alpha_ = alpha;
        return g;
    }

    static DistortionFunction convex_combo(double lambda, double alpha) {
        check_alpha(alpha);
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw DomainError("convex_combo distortion: lambda must lie in [0,1]");
        DistortionFunction g(DistortionKind::ConvexCombo);
        g.alpha_ = alpha;
        g.lambda_ = lambda;
        return g;
    }

    static DistortionFunction power(double rho, double scale = 1.0) {
        if (!(rho >= 1.0) || !std::isfinite(rho))
            throw DomainError("power distortion: rho must be finite and >= 1");
        if (!(scale >= 0.0) || !std::isfinite(scale))
            throw DomainError("power distortion: scale must be finite and >= 0");
        DistortionFunction g(DistortionKind::Power);
        g.rho_ = rho;
        g.scale_ = scale;
        return g;
    }

    static DistortionFunction knots(std::vector<double> increments) {
        if (increments.empty())
            throw DomainError("knots distortion: need at least one increment");
        for (double d : increments)
            if (!(d >= 0.0) || !std::isfinite(d))
                throw DomainError("knots distortion: increments must be finite and >= 0");
        DistortionFunction g(DistortionKind::Knots);
        g.cumulative_.resize(increments.size() + 1, 0.0);
        for (std::size_t j = 0; j < increments.size(); ++j)
            g.cumulative_[j + 1] = g.cumulative_[j] + increments[j];
        g.increments_ = std::move(increments);
        return g;
    }

    /// Samples a closed-form distortion at j/M and returns the interpolating knot curve.
    static DistortionFunction discretize(const DistortionFunction& g, std::size_t m) {
        std::vector<double> inc(m);
        double prev = 0.0;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cur = g(static_cast<double>(j) / static_cast<double>(m));
            inc[j - 1] = std::max(cur - prev, 0.0);
            prev = cur;
        }
        return knots(std::move(inc));
    }

    DistortionKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    double lambda() const noexcept { return lambda_; }
    double rho() const noexcept { return rho_; }
    double scale() const noexcept { return scale_; }
    const std::vector<double>& increments() const noexcept { return increments_; }
    std::size_t knot_count() const noexcept { return increments_.size(); }

    /// Evaluates g(s); throws DomainError outside [0,1].
    double operator()(double s) const {
        if (!(s >= 0.0 && s <= 1.0))
            throw DomainError("distortion evaluated outside [0,1]: s = " + std::to_string(s));
        return eval_unchecked(s);
    }

    /// Locates s on the knot grid: g(s) = cumulative[j] + frac * increments[j].
    /// At s = 1 this returns (M, 0).
    std::pair<std::size_t, double> knot_position(double s) const {
        const auto m = increments_.size();
        const double pos = s * static_cast<double>(m);
        auto j = static_cast<std::size_t>(std::floor(pos));
        if (j >= m) return {m, 0.0};
        return {j, pos - static_cast<double>(j)};
    }

private:
    explicit DistortionFunction(DistortionKind k) : kind_(k) {}

    static void check_alpha(double alpha) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw DomainError("alpha must lie in (0,1)");
    }

    double eval_unchecked(double s) const {
        if (s == 0.0) return 0.0;
        switch (kind_) {
            case DistortionKind::Linear: return scale_ * s;
            case DistortionKind::CVaR: return std::min(s / (1.0 - alpha_), 1.0);
            case DistortionKind::ConvexCombo:
                return lambda_ * s + (1.0 - lambda_) * std::min(s / (1.0 - alpha_), 1.0);
            case DistortionKind::Power: return scale_ * std::pow(s, 1.0 / rho_);
            case DistortionKind::Knots: {
                auto [j, frac] = knot_position(s);
                if (j >= increments_.size()) return cumulative_.back();
                return cumulative_[j] + frac * increments_[j];
            }
        }
        return 0.0;
    }

    DistortionKind kind_;
    double alpha_ = 0.0;
    double lambda_ = 0.0;
    double rho_ = 1.0;
    double scale_ = 1.0;
    std::vector<double> increments_;
    std::vector<double> cumulative_;
};

/// Outcomes Z(omega_k) with their state probabilities.
struct OutcomeSample {
    std::vector<double> values;
    std::vector<double> probs;

    OutcomeSample() = default;
    OutcomeSample(std::vector<double> v, std::vector<double> p)
        : values(std::move(v)), probs(std::move(p)) {
        validate();
    }

    /// Equal-probability sample.
    static OutcomeSample uniform(std::vector<double> v) {
        if (v.empty()) throw DomainError("outcome sample must be nonempty");
        std::vector<double> p(v.size(), 1.0 / static_cast<double>(v.size()));
        return OutcomeSample(std::move(v), std::move(p));
    }

    std::size_t size() const noexcept { return values.size(); }

    double mean() const {
        double m = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) m += probs[k] * values[k];
        return m;
    }

    void validate() const {
        if (values.empty()) throw DomainError("outcome sample must be nonempty");
        if (values.size() != probs.size())
            throw DomainError("outcome sample: values and probs differ in length");
        double total = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!std::isfinite(values[k])) throw DomainError("outcome sample: non-finite value");
            if (!(probs[k] > 0.0)) throw DomainError("outcome sample: probabilities must be > 0");
            total += probs[k];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw DomainError("outcome sample: probabilities must sum to 1");
    }
};

/// Indices of `values` sorted descending; ties keep ascending original index.
inline std::vector<std::size_t> descending_order(const std::vector<double>& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return idx;
}

/// Cumulative tail probabilities S_k along `order`; the last entry is pinned to 1.
inline std::vector<double> tail_levels(const OutcomeSample& z, const std::vector<std::size_t>& order) {
    std::vector<double> s(order.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        acc += z.probs[order[k]];
        s[k] = std::min(acc, 1.0);
    }
    if (!s.empty()) s.back() = 1.0;
    return s;
}

/// Weight w_k = g(S_k) - g(S_{k-1}) attached to the state holding the k-th
/// largest outcome. These are the coefficients of the Choquet sum, and a
/// subgradient of it with respect to the outcome vector.
inline std::vector<double> choquet_subgradient(const DistortionFunction& g, const OutcomeSample& z) {
    z.validate();
    const auto order = descending_order(z.values);
    const auto levels = tail_levels(z, order);
    std::vector<double> w(z.size(), 0.0);
    double prev = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double cur = g(levels[k]);
        w[order[k]] = cur - prev;
        prev = cur;
    }
    return w;
}

/// Signed Choquet integral sum_k (g(S_k) - g(S_{k-1})) Z_(k).
inline double choquet(const DistortionFunction& g, const OutcomeSample& z) {
    const auto w = choquet_subgradient(g, z);
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * z.values[k];
    return acc;
}

/// CVaR_alpha as the normalised integral of the empirical quantile function
/// over (alpha, 1].
inline double empirical_cvar(double alpha, const OutcomeSample& z) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("empirical_cvar: alpha must lie in (0,1)");
    z.validate();
    std::vector<std::size_t> idx(z.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return z.values[a] < z.values[b]; });
    double lo = 0.0;
    double integral = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double hi = (i + 1 == idx.size()) ? 1.0 : lo + z.probs[idx[i]];
        const double overlap = std::max(0.0, hi - std::max(lo, alpha));
        integral += overlap * z.values[idx[i]];
        lo = hi;
    }
    return integral / (1.0 - alpha);
}

}  // namespace bowley
