#pragma once

// Shared helpers for the test binaries: seeded random draws and independent
// reference computations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "bowley/choquet.hpp"

namespace testutil {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(eng);
    }
};

inline std::vector<double> random_probs(Rng& r, std::size_t q) {
    std::vector<double> p(q);
    double total = 0.0;
    for (auto& v : p) total += (v = r.uniform(0.05, 1.0));
    for (auto& v : p) v /= total;
    // absorb rounding so the simplex check holds to 1e-12
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < q; ++k) s += p[k];
    p.back() = 1.0 - s;
    return p;
}

inline bowley::OutcomeSample random_sample(Rng& r, std::size_t q, bool equal, double lo = -5.0, double hi = 5.0) {
    std::vector<double> v(q);
    for (auto& x : v) x = r.uniform(lo, hi);
    if (equal) return bowley::OutcomeSample::uniform(std::move(v));
    return bowley::OutcomeSample(std::move(v), random_probs(r, q));
}

/// Layer-cake form: for Z >= 0, the integral of g(P(Z > z)) over z >= 0.
inline double layer_cake(const std::function<double(double)>& g, const bowley::OutcomeSample& z) {
    std::map<double, double> mass;
    for (std::size_t k = 0; k < z.size(); ++k) mass[z.values[k]] += z.probs[k];
    double total = 0.0;
    double tail = 1.0;
    double prev = 0.0;
    for (const auto& [v, p] : mass) {
        total += (v - prev) * g(std::clamp(tail, 0.0, 1.0));
        tail -= p;
        prev = v;
    }
    return total;
}

/// CVaR as min_c { c + E[(Z - c)+] / (1 - alpha) }; the minimum sits at a sample value.
inline double cvar_minimisation(double alpha, const bowley::OutcomeSample& z) {
    double best = INFINITY;
    for (double c : z.values) {
        double e = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) e += z.probs[k] * std::max(z.values[k] - c, 0.0);
        best = std::min(best, c + e / (1.0 - alpha));
    }
    return best;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

}  // namespace testutil
