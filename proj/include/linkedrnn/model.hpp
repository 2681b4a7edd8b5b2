#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/gru.hpp"
#include "linkedrnn/linklayer.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/params.hpp"
#include "linkedrnn/pooling.hpp"
#include "linkedrnn/tape.hpp"
#include "linkedrnn/task.hpp"

namespace linkedrnn {

/// `mean_of_events` replaces the recurrent encoder with the per-sequence
/// mean of event vectors; it isolates the link layer as a baseline.
enum class EncoderKind { gru, mean_of_events };

struct ModelConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 100;
    std::size_t link_rounds = 2;
    PoolingKind pooling = PoolingKind::attention;
    Aggregation2 agg2 = Aggregation2::ffn_all;
    LinkActivation activation = LinkActivation::tanh;
    EncoderKind encoder = EncoderKind::gru;
    TaskKind task = TaskKind::classification;
    std::size_t classes = 0;

    /// Width of the per-node representation entering the link layer.
    std::size_t repr_width() const {
        return encoder == EncoderKind::mean_of_events ? input_dim : hidden_dim;
    }

    void validate() const {
        if (input_dim < 1) throw ConfigError("input_dim must be at least 1");
        if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
        if (task == TaskKind::classification && classes < 2)
            throw ConfigError("classification needs at least 2 classes, got " +
                              std::to_string(classes));
        if (agg2 == Aggregation2::ffn_last_two && link_rounds < 1)
            throw ConfigError("aggregation2 ffn_last_two needs at least one propagation "
                              "round, got 0");
    }
};

/// Task head coefficients: W_c (C x H) with bias b_c (C x 1) for
/// classification, w_r (1 x H) with scalar bias for regression.
struct HeadParams {
    Matrix weight;
    Matrix bias;

    static HeadParams init(const ModelConfig& cfg, Rng& rng) {
        const std::size_t width = cfg.repr_width();
        const std::size_t out = cfg.task == TaskKind::classification ? cfg.classes : 1;
        HeadParams p;
        p.weight = init_weight(out, width, width, rng);
        p.bias = Matrix(out, 1);
        return p;
    }

    void register_into(ParamRegistry& registry) {
        register_param(registry, "head.W", weight);
        register_param(registry, "head.b", bias);
    }
};

/// Every trainable matrix of the model. The GRU and attention blocks are
/// always allocated, even for configurations that do not use them, so the
/// checkpoint layout depends only on the dimensions; unused blocks simply
/// keep zero gradients.
struct ModelParams {
    GruParams gru;
    AttentionParams attention;
    std::optional<FfnParams> agg2_ffn;
    HeadParams head;

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Rng rng(seed);
        ModelParams p;
        p.gru = GruParams::init(cfg.hidden_dim, cfg.input_dim, rng);
        p.attention = AttentionParams::init(cfg.hidden_dim, rng);
        const std::size_t ffn_in =
            aggregation2_input_width(cfg.agg2, cfg.repr_width(), cfg.link_rounds);
        if (ffn_in > 0) p.agg2_ffn = FfnParams::init(cfg.repr_width(), ffn_in, rng);
        p.head = HeadParams::init(cfg, rng);
        return p;
    }

    ParamRegistry registry() {
        ParamRegistry r;
        gru.register_into(r);
        attention.register_into(r);
        if (agg2_ffn) agg2_ffn->register_into(r);
        head.register_into(r);
        return r;
    }
};

/// Handles into one forward tape.
struct ForwardPass {
    Value z;                   // n x W final representations
    Value prediction;          // n x C class distributions or n x 1 values
    std::vector<Value> layers; // V^0 .. V^M
};

/// Plain-value snapshot of a forward pass.
struct ModelOutput {
    Matrix z;
    Matrix predictions;
    std::vector<Matrix> layer_values;
};

struct InductivePrediction {
    Matrix representation; // 1 x W
    Matrix prediction;     // 1 x C distribution or 1 x 1 value
};

class LinkedRnn {
public:
    LinkedRnn(ModelConfig cfg, ModelParams params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {
        cfg_.validate();
    }

    static LinkedRnn create(const ModelConfig& cfg, std::uint64_t seed) {
        return LinkedRnn(cfg, ModelParams::init(cfg, seed));
    }

    const ModelConfig& config() const { return cfg_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }
    ParamRegistry registry() { return params_.registry(); }

    /// Full pipeline on one tape: encode each sequence, pool, propagate M
    /// rounds over the graph, aggregate, apply the task head.
    ForwardPass forward(Tape& tape, const SequenceSet& sequences, const LinkGraph& graph) {
        if (sequences.empty()) throw DomainError("forward: empty sequence set");
        if (sequences.size() != graph.size())
            throw DimensionError("forward: " + std::to_string(sequences.size()) +
                                 " sequences for a graph of " +
                                 std::to_string(graph.size()) + " nodes");
        const Bound bound = bind_all(tape);

        std::vector<Value> pooled;
        pooled.reserve(sequences.size());
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            const Matrix& seq = sequences[i];
            if (seq.empty() || seq.rows() == 0)
                throw DomainError("forward: sequence " + std::to_string(i) + " is empty");
            if (seq.cols() != cfg_.input_dim)
                throw DimensionError("forward: sequence " + std::to_string(i) + " has " +
                                     seq.shape() + " events, expected width " +
                                     std::to_string(cfg_.input_dim));
            pooled.push_back(encode_one(tape, bound, seq));
        }

        ForwardPass pass;
        const Value v0 = tape.rows_from_cols(pooled);
        const PropagationStack stack =
            propagate(tape, graph, v0, cfg_.link_rounds, cfg_.activation);
        pass.layers = stack.layers;
        pass.z = aggregate2(tape, stack, cfg_.agg2, bound.ffn);
        pass.prediction = apply_head(tape, bound, pass.z);
        return pass;
    }

    /// Mean over labeled nodes of -ln p_i[y_i], probabilities floored at
    /// probability_floor before the log.
    Value loss_classification(Tape& tape, const ForwardPass& pass,
                              std::span<const int> labels,
                              std::span<const std::uint32_t> labeled) const {
        if (cfg_.task != TaskKind::classification)
            throw ConfigError("loss_classification on a regression model");
        if (labeled.empty()) throw DomainError("loss: empty labeled set");
        std::vector<std::pair<std::uint32_t, std::uint32_t>> coords;
        coords.reserve(labeled.size());
        for (std::uint32_t i : labeled) {
            const int y = labels[i];
            if (y < 0 || static_cast<std::size_t>(y) >= cfg_.classes)
                throw DomainError("label " + std::to_string(y) + " of node " +
                                  std::to_string(i) + " outside [0," +
                                  std::to_string(cfg_.classes) + ")");
            coords.emplace_back(i, static_cast<std::uint32_t>(y));
        }
        const Value picked = tape.select_entries(pass.prediction, std::move(coords));
        return tape.scale(tape.mean_all(tape.log_floor(picked, probability_floor)), -1.0);
    }

    /// Mean squared error over the labeled nodes: (1/K) sum (y_i - p_i)^2.
    Value loss_regression(Tape& tape, const ForwardPass& pass,
                          std::span<const double> targets,
                          std::span<const std::uint32_t> labeled) const {
        if (cfg_.task != TaskKind::regression)
            throw ConfigError("loss_regression on a classification model");
        if (labeled.empty()) throw DomainError("loss: empty labeled set");
        std::vector<std::pair<std::uint32_t, std::uint32_t>> coords;
        Matrix y(labeled.size(), 1);
        for (std::size_t k = 0; k < labeled.size(); ++k) {
            coords.emplace_back(labeled[k], 0);
            y(k, 0) = targets[labeled[k]];
        }
        const Value picked = tape.select_entries(pass.prediction, std::move(coords));
        const Value diff = tape.sub(picked, tape.leaf(std::move(y)));
        return tape.mean_all(tape.hadamard(diff, diff));
    }

    ModelOutput output(const Tape& tape, const ForwardPass& pass) const {
        ModelOutput out;
        out.z = tape.value(pass.z);
        out.predictions = tape.value(pass.prediction);
        out.layer_values.reserve(pass.layers.size());
        for (Value v : pass.layers) out.layer_values.push_back(tape.value(v));
        return out;
    }

    /// Predicts one node unseen at training time. `neighbor_rows[k]` holds
    /// the stored layer-k representations (column vectors) of the new node's
    /// neighbors for k = 0 .. M-1; stored rows are treated as fixed. An empty
    /// neighborhood reduces to self-only propagation.
    InductivePrediction predict_inductive(
        const Matrix& sequence,
        const std::vector<std::vector<Matrix>>& neighbor_rows) {
        if (!neighbor_rows.empty() && neighbor_rows.size() != cfg_.link_rounds)
            throw DimensionError("predict_inductive: need stored neighbor rows for " +
                                 std::to_string(cfg_.link_rounds) + " rounds, got " +
                                 std::to_string(neighbor_rows.size()));
        Tape tape;
        const Bound bound = bind_all(tape);
        const std::size_t degree = neighbor_rows.empty() ? 0 : neighbor_rows[0].size();

        Value v = encode_one(tape, bound, sequence);
        std::vector<Value> layer_rows;
        layer_rows.push_back(tape.rows_from_cols(std::vector<Value>{v}));
        for (std::size_t k = 0; k < cfg_.link_rounds; ++k) {
            const std::vector<Matrix> no_neighbors;
            const std::vector<Matrix>& stored =
                neighbor_rows.empty() ? no_neighbors : neighbor_rows[k];
            if (stored.size() != degree)
                throw DimensionError("predict_inductive: neighbor count changes across "
                                     "layers");
            Value acc = v;
            for (const Matrix& r : stored) {
                if (r.rows() != cfg_.repr_width() || r.cols() != 1)
                    throw DimensionError("predict_inductive: stored row must be " +
                                         Matrix::shape_string(cfg_.repr_width(), 1) +
                                         ", got " + r.shape());
                acc = tape.add(acc, tape.leaf(r));
            }
            v = apply_activation(tape,
                                 tape.scale(acc, 1.0 / static_cast<double>(degree + 1)),
                                 cfg_.activation);
            layer_rows.push_back(tape.rows_from_cols(std::vector<Value>{v}));
        }

        PropagationStack stack;
        stack.activation = cfg_.activation;
        stack.layers = std::move(layer_rows);
        const Value z = aggregate2(tape, stack, cfg_.agg2, bound.ffn);
        const Value pred = apply_head(tape, bound, z);
        return InductivePrediction{tape.value(z), tape.value(pred)};
    }

    /// Stored per-layer rows of one node's neighbors, extracted from a
    /// transductive forward pass; input to predict_inductive.
    static std::vector<std::vector<Matrix>> neighborhood_rows(const ModelOutput& out,
                                                              const LinkGraph& graph,
                                                              std::size_t node) {
        std::vector<std::vector<Matrix>> rows;
        if (out.layer_values.size() <= 1) return rows;
        rows.resize(out.layer_values.size() - 1);
        for (std::size_t k = 0; k + 1 < out.layer_values.size(); ++k) {
            const Matrix& layer = out.layer_values[k];
            for (std::uint32_t j : graph.neighbors(node)) {
                Matrix col(layer.cols(), 1);
                for (std::size_t c = 0; c < layer.cols(); ++c) col(c, 0) = layer(j, c);
                rows[k].push_back(std::move(col));
            }
        }
        return rows;
    }

    static constexpr double probability_floor = 1e-12;

private:
    struct Bound {
        GruWeights gru;
        AttentionWeights attention;
        std::optional<FfnWeights> ffn;
        Value head_w, head_b;
    };

    /// Binds every parameter, used or not, in registry order.
    Bound bind_all(Tape& tape) {
        Bound b{bind(tape, params_.gru), bind(tape, params_.attention), std::nullopt,
                Value{}, Value{}};
        if (params_.agg2_ffn) b.ffn = bind(tape, *params_.agg2_ffn);
        b.head_w = tape.param(params_.head.weight);
        b.head_b = tape.param(params_.head.bias);
        return b;
    }

    Value encode_one(Tape& tape, const Bound& bound, const Matrix& seq) const {
        if (cfg_.encoder == EncoderKind::mean_of_events) {
            Matrix mean(seq.cols(), 1);
            for (std::size_t t = 0; t < seq.rows(); ++t)
                for (std::size_t j = 0; j < seq.cols(); ++j) mean(j, 0) += seq(t, j);
            const double inv = 1.0 / static_cast<double>(seq.rows());
            for (std::size_t j = 0; j < seq.cols(); ++j) mean(j, 0) *= inv;
            return tape.leaf(std::move(mean));
        }
        const std::vector<Value> states =
            encode_sequence(tape, bound.gru, seq, Matrix(cfg_.hidden_dim, 1));
        if (cfg_.pooling == PoolingKind::last) return pool_last(states);
        return pool_attention(tape, bound.attention, states).pooled;
    }

    Value apply_head(Tape& tape, const Bound& bound, Value z) const {
        const Value affine =
            tape.add_row_vector(tape.matmul_nt(z, bound.head_w), bound.head_b);
        if (cfg_.task == TaskKind::classification) return tape.softmax_rows(affine);
        return affine;
    }

    ModelConfig cfg_;
    ModelParams params_;
};

/// Arg-max per row; ties resolve to the lowest class index.
inline std::vector<int> predict_classes(const Matrix& distributions) {
    std::vector<int> out(distributions.rows());
    for (std::size_t i = 0; i < distributions.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < distributions.cols(); ++j)
            if (distributions(i, j) > distributions(i, best)) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

inline std::vector<double> predict_values(const Matrix& predictions) {
    std::vector<double> out(predictions.rows());
    for (std::size_t i = 0; i < predictions.rows(); ++i) out[i] = predictions(i, 0);
    return out;
}

} // namespace linkedrnn
