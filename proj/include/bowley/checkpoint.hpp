#pragma once

// Versioned JSON checkpoints for networks and payoff models.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bowley/diffnet.hpp"
#include "bowley/errors.hpp"
#include "bowley/payoff.hpp"

namespace bowley {

inline constexpr int kCheckpointVersion = 1;

inline std::vector<LayerSpec> layer_specs(const Network& net) {
    std::vector<LayerSpec> out;
    for (const auto& layer : net.layers()) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, DenseLayer>)
                    out.push_back(LayerSpec::dense(l.in, l.out));
                else if constexpr (std::is_same_v<T, Conv2dLayer>)
                    out.push_back(LayerSpec::conv2d(l.in_ch, l.out_ch, l.kh, l.kw));
                else if constexpr (std::is_same_v<T, MaxPoolLayer>)
                    out.push_back(LayerSpec::maxpool(l.ph, l.pw));
                else if constexpr (std::is_same_v<T, FlattenLayer>)
                    out.push_back(LayerSpec::flatten());
                else
                    out.push_back(LayerSpec::relu());
            },
            layer);
    }
    return out;
}

inline nlohmann::json network_to_json(const Network& net_in) {
    Network& net = const_cast<Network&>(net_in);  // parameters() hands out mutable views
    nlohmann::json j;
    j["format"] = "bowley.network";
    j["version"] = kCheckpointVersion;
    j["input_shape"] = net.input_shape();
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& s : layer_specs(net)) {
        switch (s.kind) {
            case LayerKind::Dense: layers.push_back({{"kind", "dense"}, {"in", s.a}, {"out", s.b}}); break;
            case LayerKind::Conv2d:
                layers.push_back({{"kind", "conv2d"}, {"in", s.a}, {"out", s.b}, {"kh", s.c}, {"kw", s.d}});
                break;
            case LayerKind::MaxPool: layers.push_back({{"kind", "maxpool"}, {"ph", s.a}, {"pw", s.b}}); break;
            case LayerKind::Flatten: layers.push_back({{"kind", "flatten"}}); break;
            case LayerKind::ReLU: layers.push_back({{"kind", "relu"}}); break;
        }
    }
    auto& params = j["params"] = nlohmann::json::array();
    for (const auto& p : net.parameters())
        params.push_back({{"name", p.name}, {"shape", p.value->shape}, {"data", p.value->data}});
    return j;
}

inline Network network_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "bowley.network") throw ShapeError("not a network checkpoint");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion)
            throw ShapeError("unsupported checkpoint version " + std::to_string(version));
        std::vector<LayerSpec> specs;
        for (const auto& l : j.at("layers")) {
            const auto kind = l.at("kind").get<std::string>();
            if (kind == "dense")
                specs.push_back(LayerSpec::dense(l.at("in"), l.at("out")));
            else if (kind == "conv2d")
                specs.push_back(LayerSpec::conv2d(l.at("in"), l.at("out"), l.at("kh"), l.at("kw")));
            else if (kind == "maxpool")
                specs.push_back(LayerSpec::maxpool(l.at("ph"), l.at("pw")));
            else if (kind == "flatten")
                specs.push_back(LayerSpec::flatten());
            else if (kind == "relu")
                specs.push_back(LayerSpec::relu());
            else
                throw ShapeError("unknown layer kind '" + kind + "'");
        }
        Network net(j.at("input_shape").get<Shape>(), specs, 0);
        auto params = net.parameters();
        const auto& stored = j.at("params");
        if (stored.size() != params.size()) throw ShapeError("checkpoint parameter count mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& s = stored[i];
            if (s.at("name").get<std::string>() != params[i].name)
                throw ShapeError("checkpoint parameter " + params[i].name + " missing");
            const auto shape = s.at("shape").get<Shape>();
            if (shape != params[i].value->shape)
                throw ShapeError("checkpoint parameter " + params[i].name + " has shape " + shape_str(shape) +
                                 ", expected " + shape_str(params[i].value->shape));
            auto data = s.at("data").get<std::vector<double>>();
            if (data.size() != params[i].value->size())
                throw ShapeError("checkpoint parameter " + params[i].name + " has wrong length");
            params[i].value->data = std::move(data);
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ShapeError(std::string("malformed network checkpoint: ") + e.what());
    }
}

inline nlohmann::json payoff_model_to_json(const PayoffModel& m) {
    nlohmann::json j;
    j["format"] = "bowley.payoff_model";
    j["version"] = kCheckpointVersion;
    j["input_mode"] = m.mode() == InputMode::IndexGrid ? "index_grid" : "scalar_loss";
    j["rows"] = m.rows();
    j["normalization"] = {{"mean", m.normalization().mean}, {"stddev", m.normalization().stddev}};
    j["output_scale"] = m.output_scale();
    j["network"] = network_to_json(m.network());
    return j;
}

inline PayoffModel payoff_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "bowley.payoff_model") throw ShapeError("not a payoff checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion) throw ShapeError("unsupported checkpoint version");
        const auto mode_s = j.at("input_mode").get<std::string>();
        if (mode_s != "index_grid" && mode_s != "scalar_loss") throw ShapeError("unknown input mode " + mode_s);
        const auto mode = mode_s == "index_grid" ? InputMode::IndexGrid : InputMode::ScalarLoss;
        PayoffModel m(mode, j.at("rows").get<std::size_t>(), network_from_json(j.at("network")));
        m.set_normalization({j.at("normalization").at("mean").get<std::vector<double>>(),
                             j.at("normalization").at("stddev").get<std::vector<double>>()});
        m.set_output_scale(j.value("output_scale", 1.0));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ShapeError(std::string("malformed payoff checkpoint: ") + e.what());
    }
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

}  // namespace bowley
