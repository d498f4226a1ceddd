#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "denoise_ad/data.hpp"
#include "denoise_ad/errors.hpp"
#include "denoise_ad/lstm.hpp"

namespace denoise_ad {

inline constexpr int kModelSchemaVersion = 1;

struct SavedModel {
    ModelConfig config;
    ModelParams params;
    NormParams norm;
};

namespace detail {

using json = nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

template <typename T>
T require_field(const json& j, const std::string& key, const std::string& context) {
    if (!j.contains(key)) {
        throw ModelIoError("model file: missing field '" + context + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ModelIoError("model file: field '" + context + key + "' has the wrong type");
    }
}

inline Matrix matrix_from_json(const json& j, const std::string& context) {
    const auto rows = require_field<std::size_t>(j, "rows", context);
    const auto cols = require_field<std::size_t>(j, "cols", context);
    auto data = require_field<std::vector<double>>(j, "data", context);
    if (data.size() != rows * cols) {
        throw ModelIoError("model file: field '" + context + "data' has " +
                           std::to_string(data.size()) + " values, expected " +
                           std::to_string(rows * cols));
    }
    return Matrix(rows, cols, std::move(data));
}

inline json gate_to_json(const LstmGate& g) {
    return json{{"w", matrix_to_json(g.w)},
                {"u", matrix_to_json(g.u)},
                {"b", matrix_to_json(g.b)}};
}

inline LstmGate gate_from_json(const json& j, const std::string& context) {
    LstmGate g;
    g.w = matrix_from_json(require_field<json>(j, "w", context), context + "w.");
    g.u = matrix_from_json(require_field<json>(j, "u", context), context + "u.");
    g.b = matrix_from_json(require_field<json>(j, "b", context), context + "b.");
    return g;
}

inline json layer_to_json(const LstmLayerParams& layer) {
    return json{{"in_dim", layer.in_dim},
                {"units", layer.units},
                {"input", gate_to_json(layer.input)},
                {"forget", gate_to_json(layer.forget)},
                {"cell", gate_to_json(layer.cell)},
                {"output", gate_to_json(layer.output)}};
}

inline LstmLayerParams layer_from_json(const json& j, const std::string& context) {
    LstmLayerParams layer;
    layer.in_dim = require_field<std::size_t>(j, "in_dim", context);
    layer.units = require_field<std::size_t>(j, "units", context);
    layer.input = gate_from_json(require_field<json>(j, "input", context), context + "input.");
    layer.forget = gate_from_json(require_field<json>(j, "forget", context), context + "forget.");
    layer.cell = gate_from_json(require_field<json>(j, "cell", context), context + "cell.");
    layer.output = gate_from_json(require_field<json>(j, "output", context), context + "output.");
    layer.for_each_gate([&](const LstmGate& g) {
        if (g.w.rows() != layer.units || g.w.cols() != layer.in_dim ||
            g.u.rows() != layer.units || g.u.cols() != layer.units ||
            g.b.rows() != layer.units || g.b.cols() != 1) {
            throw ModelIoError("model file: gate shapes in '" + context +
                               "' do not match in_dim/units");
        }
    });
    return layer;
}

} // namespace detail

inline void save_model(const SavedModel& model, const std::string& path) {
    using detail::json;
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["config"] = json{{"input_dim", model.config.input_dim},
                       {"window_len", model.config.window_len},
                       {"encoder_units", model.config.encoder_units},
                       {"dropout_p", model.config.dropout_p},
                       {"dropout_mode", to_string(model.config.dropout_mode)},
                       {"seed", model.config.seed}};
    j["norm_params"] = json{{"min", model.norm.min}, {"max", model.norm.max}};

    json encoder = json::array();
    for (const auto& layer : model.params.encoder) encoder.push_back(detail::layer_to_json(layer));
    json decoder = json::array();
    for (const auto& layer : model.params.decoder) decoder.push_back(detail::layer_to_json(layer));
    j["weights"] = json{{"encoder", std::move(encoder)},
                        {"decoder", std::move(decoder)},
                        {"output_proj", json{{"w", detail::matrix_to_json(model.params.proj_w)},
                                             {"b", detail::matrix_to_json(model.params.proj_b)}}}};

    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write to '" + path + "' failed");
}

inline SavedModel load_model(const std::string& path) {
    using detail::json;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ModelIoError("model file '" + path + "' is not valid JSON: " + e.what());
    }

    const int version = detail::require_field<int>(j, "schema_version", "");
    if (version != kModelSchemaVersion) {
        throw ModelIoError("model file: unsupported schema_version " +
                           std::to_string(version));
    }

    SavedModel model;
    const json cfg = detail::require_field<json>(j, "config", "");
    model.config.input_dim = detail::require_field<std::size_t>(cfg, "input_dim", "config.");
    model.config.window_len = detail::require_field<std::size_t>(cfg, "window_len", "config.");
    model.config.encoder_units =
        detail::require_field<std::vector<std::size_t>>(cfg, "encoder_units", "config.");
    model.config.dropout_p = detail::require_field<double>(cfg, "dropout_p", "config.");
    model.config.dropout_mode = dropout_mode_from_string(
        detail::require_field<std::string>(cfg, "dropout_mode", "config."));
    model.config.seed = detail::require_field<std::uint64_t>(cfg, "seed", "config.");
    model.config.validate();

    const json norm = detail::require_field<json>(j, "norm_params", "");
    model.norm.min = detail::require_field<std::vector<double>>(norm, "min", "norm_params.");
    model.norm.max = detail::require_field<std::vector<double>>(norm, "max", "norm_params.");
    if (model.norm.min.size() != model.norm.max.size() ||
        model.norm.min.size() != model.config.input_dim) {
        throw ModelIoError("model file: norm_params dimension does not match input_dim");
    }

    const json weights = detail::require_field<json>(j, "weights", "");
    const json encoder = detail::require_field<json>(weights, "encoder", "weights.");
    const json decoder = detail::require_field<json>(weights, "decoder", "weights.");
    for (std::size_t k = 0; k < encoder.size(); ++k) {
        model.params.encoder.push_back(
            detail::layer_from_json(encoder[k], "weights.encoder[" + std::to_string(k) + "]."));
    }
    for (std::size_t k = 0; k < decoder.size(); ++k) {
        model.params.decoder.push_back(
            detail::layer_from_json(decoder[k], "weights.decoder[" + std::to_string(k) + "]."));
    }
    const json proj = detail::require_field<json>(weights, "output_proj", "weights.");
    model.params.proj_w = detail::matrix_from_json(
        detail::require_field<json>(proj, "w", "weights.output_proj."), "weights.output_proj.w.");
    model.params.proj_b = detail::matrix_from_json(
        detail::require_field<json>(proj, "b", "weights.output_proj."), "weights.output_proj.b.");

    // cross-check weight shapes against the config
    const ModelParams reference = init_params(model.config);
    auto got = model.params.matrix_list();
    auto want = reference.matrix_list();
    if (got.size() != want.size()) {
        throw ModelIoError("model file: layer count does not match config");
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (!got[i]->same_shape(*want[i])) {
            throw ModelIoError("model file: weight group " + std::to_string(i) +
                               " has shape " + got[i]->shape_str() + ", expected " +
                               want[i]->shape_str());
        }
    }
    return model;
}

} // namespace denoise_ad
