#pragma once

// Payoff models I(.) and the monotone pricing curve used for general
// distortion premiums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bowley/choquet.hpp"
#include "bowley/diffnet.hpp"
#include "bowley/scenario.hpp"

namespace bowley {

enum class InputMode { IndexGrid, ScalarLoss };
enum class Architecture { Mlp, Cnn };

struct ArchitectureConfig {
    Architecture kind = Architecture::Mlp;
    std::vector<std::size_t> hidden{8, 8};      // dense widths (MLP, or CNN head)
    std::vector<std::size_t> conv{32, 32};      // CNN channel widths
    std::size_t kernel_h = 3, kernel_w = 3;
    std::size_t pool_h = 2, pool_w = 2;
};

/// Per-channel affine standardisation. Channels are weather rows (index
/// mode) or the single loss channel (indemnity mode).
struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Normalization identity(std::size_t channels) {
        return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
    }

    /// `data` holds `n` samples of `channels * per_channel` values, channel-major.
    static Normalization fit(const std::vector<double>& data, std::size_t n, std::size_t channels,
                             std::size_t per_channel) {
        Normalization out = identity(channels);
        const double count = double(n * per_channel);
        for (std::size_t c = 0; c < channels; ++c) {
            double m = 0.0;
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t j = 0; j < per_channel; ++j) m += data[(s * channels + c) * per_channel + j];
            m /= count;
            double v = 0.0;
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t j = 0; j < per_channel; ++j) {
                    const double d = data[(s * channels + c) * per_channel + j] - m;
                    v += d * d;
                }
            const double sd = std::sqrt(v / count);
            out.mean[c] = m;
            // zero-variance channels pass through unscaled
            out.stddev[c] = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
        }
        return out;
    }

    void apply(std::vector<double>& data, std::size_t n, std::size_t per_channel) const {
        const std::size_t channels = mean.size();
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t j = 0; j < per_channel; ++j) {
                    double& x = data[(s * channels + c) * per_channel + j];
                    x = (x - mean[c]) / stddev[c];
                }
    }
};

/**
 * A nonnegative payoff function over weather grids (index insurance) or the
 * realised loss (indemnity insurance). The network always ends in ReLU.
 */
class PayoffModel {
public:
    PayoffModel() = default;

    PayoffModel(InputMode mode, std::size_t rows, const ArchitectureConfig& arch, std::uint64_t seed)
        : mode_(mode), rows_(mode == InputMode::IndexGrid ? rows : 0), arch_(arch) {
        if (mode == InputMode::IndexGrid && rows == 0) throw ShapeError("index payoff model needs rows > 0");
        std::vector<LayerSpec> specs;
        Shape input;
        if (mode == InputMode::ScalarLoss || arch.kind == Architecture::Mlp) {
            std::size_t width = mode == InputMode::ScalarLoss ? 1 : rows_ * kMonths;
            input = {width};
            for (std::size_t h : arch.hidden) {
                specs.push_back(LayerSpec::dense(width, h));
                specs.push_back(LayerSpec::relu());
                width = h;
            }
            specs.push_back(LayerSpec::dense(width, 1));
        } else {
            input = {1, rows_, kMonths};
            std::size_t ch = 1, h = rows_, w = kMonths;
            for (std::size_t c : arch.conv) {
                specs.push_back(LayerSpec::conv2d(ch, c, arch.kernel_h, arch.kernel_w));
                specs.push_back(LayerSpec::relu());
                ch = c;
                h = h >= arch.kernel_h ? h - arch.kernel_h + 1 : 0;
                w = w >= arch.kernel_w ? w - arch.kernel_w + 1 : 0;
            }
            if (h >= arch.pool_h && w >= arch.pool_w) {
                specs.push_back(LayerSpec::maxpool(arch.pool_h, arch.pool_w));
                h /= arch.pool_h;
                w /= arch.pool_w;
            }
            specs.push_back(LayerSpec::flatten());
            std::size_t width = ch * h * w;
            for (std::size_t d : arch.hidden) {
                specs.push_back(LayerSpec::dense(width, d));
                specs.push_back(LayerSpec::relu());
                width = d;
            }
            specs.push_back(LayerSpec::dense(width, 1));
        }
        specs.push_back(LayerSpec::relu());
        net_ = Network(input, specs, seed);
        // Nonnegative output weights and a small positive bias keep the final
        // ReLU alive at start.
        auto params = net_.parameters();
        for (auto& w : params[params.size() - 2].value->data) w = std::abs(w);
        params.back().value->data[0] = 0.1;
        norm_ = Normalization::identity(channels());
    }

    /// Wraps an existing network (must end in ReLU and output one value).
    PayoffModel(InputMode mode, std::size_t rows, Network net)
        : mode_(mode), rows_(mode == InputMode::IndexGrid ? rows : 0), net_(std::move(net)) {
        if (!net_.ends_with_relu()) throw ShapeError("payoff network must end with ReLU");
        if (shape_size(net_.output_shape()) != 1) throw ShapeError("payoff network must output a scalar");
        if (shape_size(net_.input_shape()) != per_sample_width())
            throw ShapeError("payoff network input does not match the payoff input mode");
        norm_ = Normalization::identity(channels());
    }

    InputMode mode() const noexcept { return mode_; }
    std::size_t rows() const noexcept { return rows_; }
    const ArchitectureConfig& architecture() const noexcept { return arch_; }
    Network& network() noexcept { return net_; }
    const Network& network() const noexcept { return net_; }
    const Normalization& normalization() const noexcept { return norm_; }
    void set_normalization(Normalization n) {
        if (n.mean.size() != channels() || n.stddev.size() != channels())
            throw ShapeError("normalization: channel count mismatch");
        norm_ = std::move(n);
    }

    /// Factor from network output to loss units; payoff_batch applies it,
    /// forward() does not.
    double output_scale() const noexcept { return output_scale_; }
    void set_output_scale(double c) {
        if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("payoff output scale must be finite and > 0");
        output_scale_ = c;
    }

    std::size_t channels() const noexcept { return mode_ == InputMode::IndexGrid ? rows_ : 1; }
    std::size_t per_sample_width() const noexcept { return mode_ == InputMode::IndexGrid ? rows_ * kMonths : 1; }

    /// Raw (unnormalised) inputs for every scenario, channel-major per sample.
    std::vector<double> raw_inputs(const ScenarioSet& s) const {
        std::vector<double> out;
        out.reserve(s.size() * per_sample_width());
        if (mode_ == InputMode::ScalarLoss) {
            out = s.losses;
        } else {
            if (s.rows != rows_)
                throw ShapeError("scenario weather has " + std::to_string(s.rows) + " rows, model expects " +
                                 std::to_string(rows_));
            for (const auto& w : s.weather) out.insert(out.end(), w.begin(), w.end());
        }
        return out;
    }

    void fit_normalization(const ScenarioSet& s) {
        const auto raw = raw_inputs(s);
        norm_ = Normalization::fit(raw, s.size(), channels(), mode_ == InputMode::IndexGrid ? kMonths : 1);
    }

    /// Normalised batch tensor ready for the network.
    Tensor batch_input(const ScenarioSet& s) const {
        auto data = raw_inputs(s);
        norm_.apply(data, s.size(), mode_ == InputMode::IndexGrid ? kMonths : 1);
        Shape shape{s.size()};
        shape.insert(shape.end(), net_.input_shape().begin(), net_.input_shape().end());
        return Tensor(shape, std::move(data));
    }

    /// Payoffs for a prepared batch; records the tape for backward().
    std::vector<double> forward(const Tensor& batch) {
        auto y = net_.forward(batch);
        return std::move(y.data);
    }

    /// Backpropagates dLoss/dI_k (one entry per scenario of the last forward).
    void backward(const std::vector<double>& upstream) {
        net_.backward(Tensor({upstream.size(), 1}, upstream));
    }

    double evaluate_one(const ScenarioSet& s, std::size_t k) {
        ScenarioSet one;
        one.rows = s.rows;
        one.ids = {s.ids[k]};
        one.losses = {s.losses[k]};
        one.probs = {1.0};
        if (s.rows) one.weather = {s.weather[k]};
        auto x = batch_input(one);
        x.shape.erase(x.shape.begin());
        return net_.forward(x).data[0];
    }

private:
    InputMode mode_ = InputMode::ScalarLoss;
    std::size_t rows_ = 0;
    ArchitectureConfig arch_;
    Network net_;
    Normalization norm_;
    double output_scale_ = 1.0;
};

/// I(X_k) for every scenario, with the scenario probabilities attached.
inline OutcomeSample payoff_batch(PayoffModel& model, const ScenarioSet& s) {
    s.validate();
    auto values = model.forward(model.batch_input(s));
    for (auto& v : values) v *= model.output_scale();
    return OutcomeSample(std::move(values), s.probs);
}

inline double softplus(double x) {
    return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Inverse of softplus for y > 0; maps y <= 0 to a strongly negative raw value.
inline double softplus_inverse(double y) {
    if (y <= 0.0) return -40.0;
    if (y > 30.0) return y + std::log(-std::expm1(-y));
    return std::log(std::expm1(y));
}

/**
 * Pricing distortion parameterised by unconstrained raw values. Raw value j
 * sets the slope of g on knot segment j through softplus, so increment j is
 * softplus(raw_j) / M and every parameter vector yields a continuous,
 * nondecreasing curve with g(0) = 0.
 */
struct MonotonePricingCurve {
    std::vector<double> raw_increments;

    static double transform(double raw, std::size_t m) { return softplus(raw) / double(m); }
    static double transform_inverse(double increment, std::size_t m) {
        return softplus_inverse(increment * double(m));
    }

    static MonotonePricingCurve from_distortion(const DistortionFunction& g, std::size_t m) {
        const auto knots = DistortionFunction::discretize(g, m);
        MonotonePricingCurve c;
        for (double inc : knots.increments()) c.raw_increments.push_back(transform_inverse(inc, m));
        return c;
    }

    std::size_t size() const noexcept { return raw_increments.size(); }

    std::vector<double> increments() const {
        std::vector<double> inc(raw_increments.size());
        for (std::size_t j = 0; j < inc.size(); ++j) inc[j] = transform(raw_increments[j], size());
        return inc;
    }

    /// d increment_j / d raw_j
    std::vector<double> jacobian_diagonal() const {
        std::vector<double> d(raw_increments.size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = sigmoid(raw_increments[j]) / double(size());
        return d;
    }
};

inline DistortionFunction pricing_curve(const MonotonePricingCurve& curve) {
    return DistortionFunction::knots(curve.increments());
}

}  // namespace bowley
