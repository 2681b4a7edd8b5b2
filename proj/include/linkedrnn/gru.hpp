#pragma once

#include <string>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/params.hpp"
#include "linkedrnn/tape.hpp"

namespace linkedrnn {

/// GRU weights, shared across all sequences (weight tying). Biases are not
/// part of the published update equations; they are zero-initialized so the
/// bias-free form is recovered at initialization.
struct GruParams {
    Matrix wz, uz, bz; // update gate
    Matrix wr, ur, br; // reset gate
    Matrix w, u, bc;   // candidate state

    static GruParams init(std::size_t hidden, std::size_t input, Rng& rng) {
        GruParams p;
        p.wz = init_weight(hidden, input, hidden, rng);
        p.uz = init_weight(hidden, hidden, hidden, rng);
        p.bz = Matrix(hidden, 1);
        p.wr = init_weight(hidden, input, hidden, rng);
        p.ur = init_weight(hidden, hidden, hidden, rng);
        p.br = Matrix(hidden, 1);
        p.w = init_weight(hidden, input, hidden, rng);
        p.u = init_weight(hidden, hidden, hidden, rng);
        p.bc = Matrix(hidden, 1);
        return p;
    }

    void register_into(ParamRegistry& registry, const std::string& prefix = "gru.") {
        register_param(registry, prefix + "W_z", wz);
        register_param(registry, prefix + "U_z", uz);
        register_param(registry, prefix + "b_z", bz);
        register_param(registry, prefix + "W_r", wr);
        register_param(registry, prefix + "U_r", ur);
        register_param(registry, prefix + "b_r", br);
        register_param(registry, prefix + "W", w);
        register_param(registry, prefix + "U", u);
        register_param(registry, prefix + "b_c", bc);
    }

    std::size_t hidden_dim() const { return wz.rows(); }
    std::size_t input_dim() const { return wz.cols(); }
};

/// Per-tape bound GRU leaves.
struct GruWeights {
    Value wz, uz, bz, wr, ur, br, w, u, bc;
};

inline GruWeights bind(Tape& tape, GruParams& p) {
    return GruWeights{tape.param(p.wz), tape.param(p.uz), tape.param(p.bz),
                      tape.param(p.wr), tape.param(p.ur), tape.param(p.br),
                      tape.param(p.w),  tape.param(p.u),  tape.param(p.bc)};
}

/// One gated recurrent step:
///   z = sigmoid(Wz x + Uz h_prev + bz)
///   r = sigmoid(Wr x + Ur h_prev + br)
///   cand = tanh(W x + U (r . h_prev) + bc)
///   h = z . h_prev + (1 - z) . cand
inline Value gru_step(Tape& tape, const GruWeights& g, Value h_prev, Value x) {
    const Value z = tape.sigmoid(
        tape.add(tape.add(tape.matmul(g.wz, x), tape.matmul(g.uz, h_prev)), g.bz));
    const Value r = tape.sigmoid(
        tape.add(tape.add(tape.matmul(g.wr, x), tape.matmul(g.ur, h_prev)), g.br));
    const Value cand = tape.tanh_act(
        tape.add(tape.add(tape.matmul(g.w, x), tape.matmul(g.u, tape.hadamard(r, h_prev))),
                 g.bc));
    const Value ones = tape.leaf(Matrix(tape.value(z).rows(), 1, 1.0));
    return tape.add(tape.hadamard(z, h_prev), tape.hadamard(tape.sub(ones, z), cand));
}

/// Folds gru_step over the rows of a T x d sequence matrix starting from h0
/// (H x 1) and returns every intermediate state h_1 .. h_T.
inline std::vector<Value> encode_sequence(Tape& tape, const GruWeights& g,
                                          const Matrix& sequence, const Matrix& h0) {
    if (sequence.empty() || sequence.rows() == 0)
        throw DomainError("encode_sequence: sequence must contain at least one event");
    std::vector<Value> states;
    states.reserve(sequence.rows());
    Value h = tape.leaf(h0);
    for (std::size_t t = 0; t < sequence.rows(); ++t) {
        Matrix x(sequence.cols(), 1);
        for (std::size_t j = 0; j < sequence.cols(); ++j) x(j, 0) = sequence(t, j);
        h = gru_step(tape, g, h, tape.leaf(std::move(x)));
        states.push_back(h);
    }
    return states;
}

} // namespace linkedrnn
