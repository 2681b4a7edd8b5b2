#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/params.hpp"
#include "linkedrnn/tape.hpp"

namespace linkedrnn {

/// Undirected, unweighted link structure over n nodes. Neighbor lists are
/// kept sorted ascending so neighborhood sums have one canonical order; the
/// adjacency carries a forced unit diagonal and degrees exclude the self
/// loop.
class LinkGraph {
public:
    LinkGraph(std::size_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges)
        : neighbors_(n) {
        for (const auto& [a, b] : edges) {
            if (a >= n || b >= n)
                throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") outside node range [0," + std::to_string(n) + ")");
            if (a == b)
                throw DataError("self-loop on node " + std::to_string(a) +
                                " not allowed; self-loops are implicit");
            neighbors_[a].push_back(b);
            neighbors_[b].push_back(a);
        }
        for (auto& list : neighbors_) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }

    std::size_t size() const { return neighbors_.size(); }
    const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
    std::size_t degree(std::size_t i) const { return neighbors_[i].size(); }

    bool linked(std::size_t i, std::size_t j) const {
        if (i == j) return true;
        const auto& list = neighbors_[i];
        return std::binary_search(list.begin(), list.end(), static_cast<std::uint32_t>(j));
    }

    /// Symmetric 0/1 adjacency with A(i,i) = 1.
    Matrix adjacency() const {
        Matrix a(size(), size());
        for (std::size_t i = 0; i < size(); ++i) {
            a(i, i) = 1.0;
            for (std::uint32_t j : neighbors_[i]) a(i, j) = 1.0;
        }
        return a;
    }

    /// Column of 1/(deg(i) + 1) = 1/D(i,i), the row normalizers of the
    /// propagation operator D^-1 A. Row normalization is what the per-node
    /// update computes: each node averages over its closed neighborhood.
    Matrix inverse_closed_degrees() const {
        Matrix inv(size(), 1);
        for (std::size_t i = 0; i < size(); ++i)
            inv(i, 0) = 1.0 / static_cast<double>(degree(i) + 1);
        return inv;
    }

private:
    std::vector<std::vector<std::uint32_t>> neighbors_;
};

enum class LinkActivation { identity, tanh, relu };

inline Value apply_activation(Tape& tape, Value v, LinkActivation act) {
    switch (act) {
    case LinkActivation::identity: return v;
    case LinkActivation::tanh: return tape.tanh_act(v);
    case LinkActivation::relu: return tape.relu(v);
    }
    throw ConfigError("unknown link activation");
}

/// V^0 .. V^M, each n x H, layer k+1 produced from layer k by one
/// neighborhood-averaging round.
struct PropagationStack {
    std::vector<Value> layers;
    LinkActivation activation = LinkActivation::tanh;

    std::size_t rounds() const { return layers.empty() ? 0 : layers.size() - 1; }
};

/// One propagation round on the tape: act(D^-1 (A V)). The 0/1 adjacency
/// product sums each closed neighborhood first and the row scaling divides
/// once, the same order as the per-node update.
inline Value propagate_once(Tape& tape, const LinkGraph& graph, Value v,
                            LinkActivation act) {
    if (tape.value(v).rows() != graph.size())
        throw DimensionError("propagate_once: representation has " + tape.value(v).shape() +
                             " rows for a graph of " + std::to_string(graph.size()) +
                             " nodes");
    const Value summed = tape.matmul(tape.leaf(graph.adjacency()), v);
    return apply_activation(
        tape, tape.scale_rows(summed, tape.leaf(graph.inverse_closed_degrees())), act);
}

/// M rounds, reusing one pair of operator leaves.
inline PropagationStack propagate(Tape& tape, const LinkGraph& graph, Value v0,
                                  std::size_t rounds, LinkActivation act) {
    if (tape.value(v0).rows() != graph.size())
        throw DimensionError("propagate: representation has " + tape.value(v0).shape() +
                             " rows for a graph of " + std::to_string(graph.size()) +
                             " nodes");
    PropagationStack stack;
    stack.activation = act;
    stack.layers.reserve(rounds + 1);
    stack.layers.push_back(v0);
    if (rounds == 0) return stack;
    const Value adjacency = tape.leaf(graph.adjacency());
    const Value inv_degrees = tape.leaf(graph.inverse_closed_degrees());
    for (std::size_t k = 0; k < rounds; ++k)
        stack.layers.push_back(apply_activation(
            tape,
            tape.scale_rows(tape.matmul(adjacency, stack.layers.back()), inv_degrees),
            act));
    return stack;
}

enum class Aggregation2 { last, ffn_last_two, ffn_all };

/// Single feed-forward combiner used by the ffn aggregation variants:
/// out = tanh(W [inputs] + b) row-wise. W is H x (input width), b is H x 1.
struct FfnParams {
    Matrix weight;
    Matrix bias;

    static FfnParams init(std::size_t out_width, std::size_t in_width, Rng& rng) {
        FfnParams p;
        p.weight = init_weight(out_width, in_width, in_width, rng);
        p.bias = Matrix(out_width, 1);
        return p;
    }

    void register_into(ParamRegistry& registry, const std::string& prefix = "aggregation2.") {
        register_param(registry, prefix + "W_f", weight);
        register_param(registry, prefix + "b_f", bias);
    }
};

struct FfnWeights {
    Value weight, bias;
};

inline FfnWeights bind(Tape& tape, FfnParams& p) {
    return FfnWeights{tape.param(p.weight), tape.param(p.bias)};
}

inline std::size_t aggregation2_input_width(Aggregation2 kind, std::size_t repr_width,
                                            std::size_t rounds) {
    switch (kind) {
    case Aggregation2::last: return 0;
    case Aggregation2::ffn_last_two: return 2 * repr_width;
    case Aggregation2::ffn_all: return (rounds + 1) * repr_width;
    }
    throw ConfigError("unknown aggregation2 variant");
}

/// Collapses the propagation stack into the final representation z:
///   last         -> V^M
///   ffn_last_two -> tanh(W [V^M | V^(M-1)] + b)   (requires M >= 1)
///   ffn_all      -> tanh(W [V^0 | ... | V^M] + b)
inline Value aggregate2(Tape& tape, const PropagationStack& stack, Aggregation2 kind,
                        const std::optional<FfnWeights>& ffn) {
    if (stack.layers.empty()) throw ContractError("aggregate2: empty stack");
    switch (kind) {
    case Aggregation2::last:
        return stack.layers.back();
    case Aggregation2::ffn_last_two: {
        if (stack.rounds() < 1)
            throw ConfigError("aggregation2 ffn_last_two needs at least one propagation "
                              "round, got 0");
        if (!ffn) throw ConfigError("aggregation2 ffn_last_two: missing ffn parameters");
        const Value cat = tape.concat_cols(
            std::vector<Value>{stack.layers[stack.rounds()], stack.layers[stack.rounds() - 1]});
        return tape.tanh_act(
            tape.add_row_vector(tape.matmul_nt(cat, ffn->weight), ffn->bias));
    }
    case Aggregation2::ffn_all: {
        if (!ffn) throw ConfigError("aggregation2 ffn_all: missing ffn parameters");
        const Value cat = tape.concat_cols(stack.layers);
        return tape.tanh_act(
            tape.add_row_vector(tape.matmul_nt(cat, ffn->weight), ffn->bias));
    }
    }
    throw ConfigError("unknown aggregation2 variant");
}

// ---- reference route and dual-route check ----

inline double apply_activation_scalar(double x, LinkActivation act) {
    switch (act) {
    case LinkActivation::identity: return x;
    case LinkActivation::tanh: return std::tanh(x);
    case LinkActivation::relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

/// Per-node form of one propagation round, summing explicit neighbor lists
/// in ascending node order: row i = act((v_i + sum_{j in N(i)} v_j) / (deg(i)+1)).
inline Matrix propagate_once_reference(const LinkGraph& graph, const Matrix& v,
                                       LinkActivation act) {
    if (v.rows() != graph.size())
        throw DimensionError("propagate_once_reference: representation has " + v.shape() +
                             " rows for a graph of " + std::to_string(graph.size()) +
                             " nodes");
    Matrix out(v.rows(), v.cols());
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const double inv = 1.0 / static_cast<double>(graph.degree(i) + 1);
        for (std::size_t c = 0; c < v.cols(); ++c) {
            double acc = v(i, c);
            for (std::uint32_t j : graph.neighbors(i)) acc += v(j, c);
            out(i, c) = apply_activation_scalar(acc * inv, act);
        }
    }
    return out;
}

/// Runs one round through both routes -- explicit neighbor-list summation
/// and the row-normalized matrix product -- and returns the max elementwise
/// deviation. The two forms are each other's oracle.
inline double matrix_individual_equivalence_check(const LinkGraph& graph, const Matrix& v,
                                                  LinkActivation act = LinkActivation::identity) {
    const Matrix per_node = propagate_once_reference(graph, v, act);
    Matrix matrix_form = multiply(graph.adjacency(), v);
    const Matrix inv = graph.inverse_closed_degrees();
    for (std::size_t i = 0; i < matrix_form.rows(); ++i)
        for (std::size_t j = 0; j < matrix_form.cols(); ++j)
            matrix_form(i, j) =
                apply_activation_scalar(matrix_form(i, j) * inv(i, 0), act);
    double dev = 0.0;
    for (std::size_t i = 0; i < per_node.size(); ++i)
        dev = std::max(dev, std::abs(per_node.flat(i) - matrix_form.flat(i)));
    return dev;
}

} // namespace linkedrnn
