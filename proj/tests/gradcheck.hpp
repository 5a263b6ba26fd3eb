#pragma once

// Finite-difference check of Network::backward.

#include <vector>

#include "bowley/diffnet.hpp"
#include "test_util.hpp"

namespace testutil {

/// ReLU masks and pooling winners of the last forward pass.
inline std::vector<std::size_t> activation_pattern(const bowley::Network& net) {
    std::vector<std::size_t> out;
    for (const auto& layer : net.layers()) {
        if (const auto* r = std::get_if<bowley::ReluLayer>(&layer)) out.insert(out.end(), r->active.begin(), r->active.end());
        if (const auto* m = std::get_if<bowley::MaxPoolLayer>(&layer)) out.insert(out.end(), m->argmax.begin(), m->argmax.end());
    }
    return out;
}

inline bowley::Tensor random_tensor(Rng& r, bowley::Shape s) {
    bowley::Tensor t(std::move(s));
    for (auto& v : t.data) v = r.normal();
    return t;
}

/// Loss = sum_i c_i y_i; compares backward against central differences in
/// every parameter and input coordinate whose perturbation keeps the
/// activation pattern. Returns the worst relative error.
inline double gradient_check(bowley::Network& net, const bowley::Tensor& x, Rng& r, std::size_t* checked) {
    auto y = net.forward(x);
    bowley::Tensor c(y.shape);
    for (auto& v : c.data) v = r.uniform(-1.0, 1.0);
    const auto pattern = activation_pattern(net);
    net.zero_grad();
    const auto dx = net.backward(c);
    const auto grads = net.flat_gradients();

    auto loss = [&](const bowley::Tensor& in) {
        const auto out = net.forward(in);
        double l = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) l += c.data[i] * out.data[i];
        return l;
    };
    const double h = 1e-5;
    double worst = 0.0;
    auto params = net.flat_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double p0 = params[i];
        params[i] = p0 + h;
        net.set_flat_parameters(params);
        const double up = loss(x);
        const bool same_up = activation_pattern(net) == pattern;
        params[i] = p0 - h;
        net.set_flat_parameters(params);
        const double down = loss(x);
        const bool same_down = activation_pattern(net) == pattern;
        params[i] = p0;
        net.set_flat_parameters(params);
        if (!same_up || !same_down) continue;
        worst = std::max(worst, rel_err(grads[i], (up - down) / (2.0 * h), 1e-4));
        ++*checked;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        bowley::Tensor xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double up = loss(xp);
        const bool same_up = activation_pattern(net) == pattern;
        const double down = loss(xm);
        const bool same_down = activation_pattern(net) == pattern;
        if (!same_up || !same_down) continue;
        worst = std::max(worst, rel_err(dx.data[i], (up - down) / (2.0 * h), 1e-4));
        ++*checked;
    }
    return worst;
}

}  // namespace testutil
