#pragma once

// A small reverse-mode differentiable network: dense and 2-D convolution
// layers, max pooling, flatten and ReLU. Each layer caches what it needs
// during forward(); backward() replays the chain rule in reverse order and
// accumulates parameter gradients.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bowley/errors.hpp"

namespace bowley {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

/// Dense row-major array.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_size(shape) != data.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }

    std::size_t size() const noexcept { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

enum class LayerKind { Dense, Conv2d, MaxPool, Flatten, ReLU };

/// Declarative layer description; parameters are created by Network.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    std::size_t a = 0, b = 0, c = 0, d = 0;  // Dense(in,out) | Conv2d(in,out,kh,kw) | MaxPool(ph,pw)

    static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::Dense, in, out}; }
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw) {
        return {LayerKind::Conv2d, in_ch, out_ch, kh, kw};
    }
    static LayerSpec maxpool(std::size_t ph, std::size_t pw) { return {LayerKind::MaxPool, ph, pw}; }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }
    static LayerSpec relu() { return {LayerKind::ReLU}; }
};

struct DenseLayer {
    std::size_t in = 0, out = 0;
    Tensor weight, bias, grad_weight, grad_bias;  // weight is [out, in]
    Tensor input;
};

struct Conv2dLayer {
    std::size_t in_ch = 0, out_ch = 0, kh = 0, kw = 0;
    Tensor weight, bias, grad_weight, grad_bias;  // weight is [out, in, kh, kw]
    Tensor input;
};

struct MaxPoolLayer {
    std::size_t ph = 0, pw = 0;
    Shape input_shape;
    std::vector<std::size_t> argmax;
};

struct FlattenLayer {
    Shape input_shape;
};

struct ReluLayer {
    std::vector<unsigned char> active;
};

using Layer = std::variant<DenseLayer, Conv2dLayer, MaxPoolLayer, FlattenLayer, ReluLayer>;

/// A named parameter tensor with its gradient accumulator.
struct ParamView {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

class Network {
public:
    Network() = default;

    /// Builds and shape-checks the pipeline; weights are uniform(-a, a) with
    /// a = sqrt(6 / (fan_in + fan_out)), biases zero.
    Network(Shape input_shape, const std::vector<LayerSpec>& specs, std::uint64_t seed)
        : input_shape_(std::move(input_shape)) {
        std::mt19937_64 rng(seed);
        Shape shape = input_shape_;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            layers_.push_back(make_layer(specs[i], shape, i, rng));
            shape_trace_.push_back(shape);
        }
        output_shape_ = shape;
    }

    const Shape& input_shape() const noexcept { return input_shape_; }
    const Shape& output_shape() const noexcept { return output_shape_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    bool has_tape() const noexcept { return taped_; }

    bool ends_with_relu() const {
        return !layers_.empty() && std::holds_alternative<ReluLayer>(layers_.back());
    }

    /// Accepts a single sample shaped like input_shape() or a batch with a
    /// leading batch dimension.
    Tensor forward(const Tensor& x) {
        std::size_t batch = 1;
        bool batched = false;
        if (x.shape == input_shape_) {
        } else if (x.shape.size() == input_shape_.size() + 1 &&
                   Shape(x.shape.begin() + 1, x.shape.end()) == input_shape_) {
            batch = x.shape[0];
            batched = true;
        } else {
            throw ShapeError("network input: expected " + shape_str(input_shape_) + " (optionally batched), got " +
                             shape_str(x.shape));
        }
        Tensor cur(batched_shape(batch, input_shape_), x.data);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            cur = std::visit([&](auto& layer) { return forward_layer(layer, cur, batch); }, layers_[i]);
            if (shape_size(cur.shape) != batch * shape_size(shape_trace_[i]))
                throw ShapeError("layer " + std::to_string(i) + ": unexpected output shape");
        }
        taped_ = true;
        batch_ = batch;
        batched_ = batched;
        if (!batched) cur.shape = output_shape_;
        return cur;
    }

    /// Propagates `upstream` (dLoss/dOutput, same shape as the last forward
    /// output), accumulates parameter gradients and returns dLoss/dInput.
    /// Consumes the tape.
    Tensor backward(const Tensor& upstream) {
        if (!taped_) throw StateError("backward called without a recorded forward pass");
        const Shape expect = batched_ ? batched_shape(batch_, output_shape_) : output_shape_;
        if (upstream.shape != expect)
            throw ShapeError("backward: upstream shape " + shape_str(upstream.shape) + " != " + shape_str(expect));
        Tensor grad(batched_shape(batch_, output_shape_), upstream.data);
        for (std::size_t i = layers_.size(); i-- > 0;)
            grad = std::visit([&](auto& layer) { return backward_layer(layer, grad, batch_); }, layers_[i]);
        taped_ = false;
        if (!batched_) grad.shape = input_shape_;
        return grad;
    }

    std::vector<ParamView> parameters() {
        std::vector<ParamView> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const std::string tag = "layer" + std::to_string(i);
            if (auto* d = std::get_if<DenseLayer>(&layers_[i])) {
                out.push_back({tag + ".weight", &d->weight, &d->grad_weight});
                out.push_back({tag + ".bias", &d->bias, &d->grad_bias});
            } else if (auto* c = std::get_if<Conv2dLayer>(&layers_[i])) {
                out.push_back({tag + ".weight", &c->weight, &c->grad_weight});
                out.push_back({tag + ".bias", &c->bias, &c->grad_bias});
            }
        }
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto& p : parameters()) n += p.value->size();
        return n;
    }

    std::vector<double> flat_parameters() {
        std::vector<double> out;
        for (auto& p : parameters()) out.insert(out.end(), p.value->data.begin(), p.value->data.end());
        return out;
    }

    void set_flat_parameters(std::span<const double> flat) {
        std::size_t off = 0;
        for (auto& p : parameters()) {
            if (off + p.value->size() > flat.size()) throw ShapeError("set_flat_parameters: too few values");
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p.value->size(), p.value->data.begin());
            off += p.value->size();
        }
        if (off != flat.size()) throw ShapeError("set_flat_parameters: too many values");
    }

    std::vector<double> flat_gradients() {
        std::vector<double> out;
        for (auto& p : parameters()) out.insert(out.end(), p.grad->data.begin(), p.grad->data.end());
        return out;
    }

    void zero_grad() {
        for (auto& p : parameters()) std::fill(p.grad->data.begin(), p.grad->data.end(), 0.0);
    }

    /// p <- p - lr * grad(p), then clears the accumulators.
    void sgd_step(double lr) {
        for (auto& p : parameters()) {
            for (std::size_t i = 0; i < p.value->size(); ++i) p.value->data[i] -= lr * p.grad->data[i];
            std::fill(p.grad->data.begin(), p.grad->data.end(), 0.0);
        }
    }

private:
    static Shape batched_shape(std::size_t batch, const Shape& s) {
        Shape out{batch};
        out.insert(out.end(), s.begin(), s.end());
        return out;
    }

    static void init_uniform(Tensor& t, double fan_in, double fan_out, std::mt19937_64& rng) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-a, a);
        for (auto& v : t.data) v = u(rng);
    }

    static Layer make_layer(const LayerSpec& spec, Shape& shape, std::size_t index, std::mt19937_64& rng) {
        auto fail = [&](const std::string& msg) {
            return ShapeError("layer " + std::to_string(index) + ": " + msg + " (input " + shape_str(shape) + ")");
        };
        switch (spec.kind) {
            case LayerKind::Dense: {
                if (spec.a == 0 || spec.b == 0) throw fail("dense sizes must be positive");
                if (shape != Shape{spec.a}) throw fail("dense expects input [" + std::to_string(spec.a) + "]");
                DenseLayer d;
                d.in = spec.a;
                d.out = spec.b;
                d.weight = Tensor({d.out, d.in});
                d.bias = Tensor({d.out});
                d.grad_weight = Tensor({d.out, d.in});
                d.grad_bias = Tensor({d.out});
                init_uniform(d.weight, double(d.in), double(d.out), rng);
                shape = {d.out};
                return d;
            }
            case LayerKind::Conv2d: {
                if (spec.a == 0 || spec.b == 0 || spec.c == 0 || spec.d == 0)
                    throw fail("conv2d sizes must be positive");
                if (shape.size() != 3 || shape[0] != spec.a)
                    throw fail("conv2d expects [" + std::to_string(spec.a) + ",H,W]");
                if (shape[1] < spec.c || shape[2] < spec.d) throw fail("conv2d kernel larger than input");
                Conv2dLayer c;
                c.in_ch = spec.a;
                c.out_ch = spec.b;
                c.kh = spec.c;
                c.kw = spec.d;
                c.weight = Tensor({c.out_ch, c.in_ch, c.kh, c.kw});
                c.bias = Tensor({c.out_ch});
                c.grad_weight = Tensor(c.weight.shape);
                c.grad_bias = Tensor({c.out_ch});
                const double k = double(c.kh * c.kw);
                init_uniform(c.weight, double(c.in_ch) * k, double(c.out_ch) * k, rng);
                shape = {c.out_ch, shape[1] - c.kh + 1, shape[2] - c.kw + 1};
                return c;
            }
            case LayerKind::MaxPool: {
                if (spec.a == 0 || spec.b == 0) throw fail("maxpool sizes must be positive");
                if (shape.size() != 3) throw fail("maxpool expects [C,H,W]");
                if (shape[1] < spec.a || shape[2] < spec.b) throw fail("pool window larger than input");
                MaxPoolLayer m;
                m.ph = spec.a;
                m.pw = spec.b;
                shape = {shape[0], shape[1] / m.ph, shape[2] / m.pw};
                return m;
            }
            case LayerKind::Flatten:
                shape = {shape_size(shape)};
                return FlattenLayer{};
            case LayerKind::ReLU:
                return ReluLayer{};
        }
        throw fail("unknown layer kind");
    }

    // ---- dense ---------------------------------------------------------
    static Tensor forward_layer(DenseLayer& l, const Tensor& x, std::size_t batch) {
        l.input = x;
        Tensor y({batch, l.out});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* xin = &x.data[b * l.in];
            for (std::size_t o = 0; o < l.out; ++o) {
                const double* w = &l.weight.data[o * l.in];
                double acc = l.bias.data[o];
                for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * xin[i];
                y.data[b * l.out + o] = acc;
            }
        }
        return y;
    }

    static Tensor backward_layer(DenseLayer& l, const Tensor& g, std::size_t batch) {
        Tensor dx({batch, l.in});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* xin = &l.input.data[b * l.in];
            for (std::size_t o = 0; o < l.out; ++o) {
                const double go = g.data[b * l.out + o];
                if (go == 0.0) continue;
                l.grad_bias.data[o] += go;
                double* gw = &l.grad_weight.data[o * l.in];
                const double* w = &l.weight.data[o * l.in];
                double* dxb = &dx.data[b * l.in];
                for (std::size_t i = 0; i < l.in; ++i) {
                    gw[i] += go * xin[i];
                    dxb[i] += go * w[i];
                }
            }
        }
        return dx;
    }

    // ---- conv2d (valid, stride 1) ----------------------------------------
    static Tensor forward_layer(Conv2dLayer& l, const Tensor& x, std::size_t batch) {
        l.input = x;
        const std::size_t h = x.shape[2], w = x.shape[3];
        const std::size_t oh = h - l.kh + 1, ow = w - l.kw + 1;
        Tensor y({batch, l.out_ch, oh, ow});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < l.out_ch; ++o)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) {
                        double acc = l.bias.data[o];
                        for (std::size_t c = 0; c < l.in_ch; ++c)
                            for (std::size_t u = 0; u < l.kh; ++u) {
                                const double* xr = &x.data[((b * l.in_ch + c) * h + i + u) * w + j];
                                const double* wr = &l.weight.data[((o * l.in_ch + c) * l.kh + u) * l.kw];
                                for (std::size_t v = 0; v < l.kw; ++v) acc += wr[v] * xr[v];
                            }
                        y.data[((b * l.out_ch + o) * oh + i) * ow + j] = acc;
                    }
        return y;
    }

    static Tensor backward_layer(Conv2dLayer& l, const Tensor& g, std::size_t batch) {
        const Tensor& x = l.input;
        const std::size_t h = x.shape[2], w = x.shape[3];
        const std::size_t oh = h - l.kh + 1, ow = w - l.kw + 1;
        Tensor dx(x.shape);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < l.out_ch; ++o)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) {
                        const double go = g.data[((b * l.out_ch + o) * oh + i) * ow + j];
                        if (go == 0.0) continue;
                        l.grad_bias.data[o] += go;
                        for (std::size_t c = 0; c < l.in_ch; ++c)
                            for (std::size_t u = 0; u < l.kh; ++u) {
                                const std::size_t xoff = ((b * l.in_ch + c) * h + i + u) * w + j;
                                const std::size_t woff = ((o * l.in_ch + c) * l.kh + u) * l.kw;
                                for (std::size_t v = 0; v < l.kw; ++v) {
                                    l.grad_weight.data[woff + v] += go * x.data[xoff + v];
                                    dx.data[xoff + v] += go * l.weight.data[woff + v];
                                }
                            }
                    }
        return dx;
    }

    // ---- max pooling (non-overlapping) -----------------------------------
    static Tensor forward_layer(MaxPoolLayer& l, const Tensor& x, std::size_t batch) {
        l.input_shape = x.shape;
        const std::size_t ch = x.shape[1], h = x.shape[2], w = x.shape[3];
        const std::size_t oh = h / l.ph, ow = w / l.pw;
        Tensor y({batch, ch, oh, ow});
        l.argmax.assign(y.size(), 0);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) {
                        std::size_t best = ((b * ch + c) * h + i * l.ph) * w + j * l.pw;
                        for (std::size_t u = 0; u < l.ph; ++u)
                            for (std::size_t v = 0; v < l.pw; ++v) {
                                const std::size_t idx = ((b * ch + c) * h + i * l.ph + u) * w + j * l.pw + v;
                                if (x.data[idx] > x.data[best]) best = idx;
                            }
                        const std::size_t out = ((b * ch + c) * oh + i) * ow + j;
                        y.data[out] = x.data[best];
                        l.argmax[out] = best;
                    }
        return y;
    }

    static Tensor backward_layer(MaxPoolLayer& l, const Tensor& g, std::size_t) {
        Tensor dx(l.input_shape);
        for (std::size_t k = 0; k < g.size(); ++k) dx.data[l.argmax[k]] += g.data[k];
        return dx;
    }

    // ---- flatten / relu ----------------------------------------------------
    static Tensor forward_layer(FlattenLayer& l, const Tensor& x, std::size_t batch) {
        l.input_shape = x.shape;
        return Tensor({batch, x.size() / batch}, x.data);
    }

    static Tensor backward_layer(FlattenLayer& l, const Tensor& g, std::size_t) { return Tensor(l.input_shape, g.data); }

    static Tensor forward_layer(ReluLayer& l, const Tensor& x, std::size_t) {
        Tensor y = x;
        l.active.assign(x.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x.data[i] > 0.0)
                l.active[i] = 1;
            else
                y.data[i] = 0.0;
        }
        return y;
    }

    static Tensor backward_layer(ReluLayer& l, const Tensor& g, std::size_t) {
        Tensor dx = g;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!l.active[i]) dx.data[i] = 0.0;
        return dx;
    }

    Shape input_shape_;
    Shape output_shape_;
    std::vector<Shape> shape_trace_;
    std::vector<Layer> layers_;
    bool taped_ = false;
    bool batched_ = false;
    std::size_t batch_ = 0;
};

}  // namespace bowley
