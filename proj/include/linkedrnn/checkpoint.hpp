#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/model.hpp"

namespace linkedrnn {

// ---- enum <-> string, shared with the CLI ----

inline std::string pooling_name(PoolingKind p) {
    return p == PoolingKind::last ? "last" : "attention";
}
inline PoolingKind parse_pooling(const std::string& s) {
    if (s == "last") return PoolingKind::last;
    if (s == "attention" || s == "attn") return PoolingKind::attention;
    throw ConfigError("unknown pooling variant: \"" + s + "\"");
}

inline std::string aggregation2_name(Aggregation2 a) {
    switch (a) {
    case Aggregation2::last: return "last";
    case Aggregation2::ffn_last_two: return "ffn_last_two";
    case Aggregation2::ffn_all: return "ffn_all";
    }
    return "?";
}
inline Aggregation2 parse_aggregation2(const std::string& s) {
    if (s == "last") return Aggregation2::last;
    if (s == "ffn_last_two" || s == "ffn2") return Aggregation2::ffn_last_two;
    if (s == "ffn_all" || s == "ffnall") return Aggregation2::ffn_all;
    throw ConfigError("unknown aggregation2 variant: \"" + s + "\"");
}

inline std::string activation_name(LinkActivation a) {
    switch (a) {
    case LinkActivation::identity: return "identity";
    case LinkActivation::tanh: return "tanh";
    case LinkActivation::relu: return "relu";
    }
    return "?";
}
inline LinkActivation parse_activation(const std::string& s) {
    if (s == "identity") return LinkActivation::identity;
    if (s == "tanh") return LinkActivation::tanh;
    if (s == "relu") return LinkActivation::relu;
    throw ConfigError("unknown link activation: \"" + s + "\"");
}

inline std::string encoder_name(EncoderKind e) {
    return e == EncoderKind::gru ? "gru" : "mean";
}
inline EncoderKind parse_encoder(const std::string& s) {
    if (s == "gru") return EncoderKind::gru;
    if (s == "mean") return EncoderKind::mean_of_events;
    throw ConfigError("unknown encoder kind: \"" + s + "\"");
}

// ---- model config ----

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j{{"input_dim", cfg.input_dim},
                     {"hidden_dim", cfg.hidden_dim},
                     {"link_rounds", cfg.link_rounds},
                     {"pooling", pooling_name(cfg.pooling)},
                     {"aggregation2", aggregation2_name(cfg.agg2)},
                     {"activation", activation_name(cfg.activation)},
                     {"encoder", encoder_name(cfg.encoder)},
                     {"task", task_name(cfg.task)}};
    if (cfg.task == TaskKind::classification) j["classes"] = cfg.classes;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    cfg.link_rounds = j.at("link_rounds").get<std::size_t>();
    cfg.pooling = parse_pooling(j.at("pooling").get<std::string>());
    cfg.agg2 = parse_aggregation2(j.at("aggregation2").get<std::string>());
    cfg.activation = parse_activation(j.at("activation").get<std::string>());
    cfg.encoder = parse_encoder(j.at("encoder").get<std::string>());
    cfg.task = parse_task(j.at("task").get<std::string>());
    if (cfg.task == TaskKind::classification)
        cfg.classes = j.at("classes").get<std::size_t>();
    cfg.validate();
    return cfg;
}

// ---- checkpoint: config + named parameter tensors ----

/// One document mapping parameter names to shape plus flat row-major values.
/// Doubles are written with enough digits to reload bit-exactly.
inline nlohmann::json checkpoint_to_json(const ModelConfig& cfg, ModelParams& params) {
    nlohmann::json j;
    j["format"] = "linkedrnn-checkpoint-v1";
    j["config"] = config_to_json(cfg);
    nlohmann::json tensors = nlohmann::json::object();
    for (const ParamRef& p : params.registry()) {
        nlohmann::json entry;
        entry["shape"] = {p.value->rows(), p.value->cols()};
        std::vector<double> flat(p.value->size());
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = p.value->flat(i);
        entry["data"] = std::move(flat);
        tensors[p.name] = std::move(entry);
    }
    j["params"] = std::move(tensors);
    return j;
}

inline LinkedRnn checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "linkedrnn-checkpoint-v1")
        throw DataError("not a linkedrnn checkpoint (missing format marker)");
    const ModelConfig cfg = config_from_json(j.at("config"));
    ModelParams params = ModelParams::init(cfg, 0);
    for (const ParamRef& p : params.registry()) {
        if (!j.at("params").contains(p.name))
            throw DataError("checkpoint is missing parameter \"" + p.name + "\"");
        const nlohmann::json& entry = j["params"][p.name];
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[0] != p.value->rows() || shape[1] != p.value->cols())
            throw DataError("checkpoint parameter \"" + p.name + "\" has shape " +
                            (shape.size() == 2 ? Matrix::shape_string(shape[0], shape[1])
                                               : std::string("?")) +
                            ", expected " + p.value->shape());
        const auto flat = entry.at("data").get<std::vector<double>>();
        if (flat.size() != p.value->size())
            throw DataError("checkpoint parameter \"" + p.name + "\" has " +
                            std::to_string(flat.size()) + " values, expected " +
                            std::to_string(p.value->size()));
        for (std::size_t i = 0; i < flat.size(); ++i) p.value->flat(i) = flat[i];
    }
    return LinkedRnn(cfg, std::move(params));
}

inline void save_checkpoint(const ModelConfig& cfg, ModelParams& params,
                            const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint file: " + path);
    out << checkpoint_to_json(cfg, params).dump(2) << "\n";
}

inline LinkedRnn load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace linkedrnn
