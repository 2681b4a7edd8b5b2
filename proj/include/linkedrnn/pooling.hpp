#pragma once

#include <span>
#include <string>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/params.hpp"
#include "linkedrnn/tape.hpp"

namespace linkedrnn {

enum class PoolingKind { last, attention };

/// Score network of the attention pool: score(h) = v_a^T tanh(W_a h).
/// No bias, matching the published form. The attention width defaults to the
/// hidden width.
struct AttentionParams {
    Matrix wa; // A x H
    Matrix va; // A x 1

    static AttentionParams init(std::size_t hidden, Rng& rng, std::size_t width = 0) {
        if (width == 0) width = hidden;
        AttentionParams p;
        p.wa = init_weight(width, hidden, hidden, rng);
        p.va = init_weight(width, 1, hidden, rng);
        return p;
    }

    void register_into(ParamRegistry& registry, const std::string& prefix = "attention.") {
        register_param(registry, prefix + "W_a", wa);
        register_param(registry, prefix + "v_a", va);
    }
};

struct AttentionWeights {
    Value wa, va;
};

inline AttentionWeights bind(Tape& tape, AttentionParams& p) {
    return AttentionWeights{tape.param(p.wa), tape.param(p.va)};
}

/// The last hidden state stands in for the whole sequence.
inline Value pool_last(std::span<const Value> states) {
    if (states.empty()) throw DomainError("pool_last: no states");
    return states.back();
}

/// Attention weights over one pooled sequence, exposed for inspection.
struct AttentionTrace {
    Value pooled;
    Value weights; // 1 x T, rows sum to 1
};

/// Softmax-weighted sum of the states; weights come from the score network.
inline AttentionTrace pool_attention(Tape& tape, const AttentionWeights& a,
                                     std::span<const Value> states) {
    if (states.empty()) throw DomainError("pool_attention: no states");
    std::vector<Value> scores;
    scores.reserve(states.size());
    for (Value h : states)
        scores.push_back(tape.matmul_tn(a.va, tape.tanh_act(tape.matmul(a.wa, h))));
    const Value score_row = tape.concat_cols(scores);       // 1 x T
    const Value weights = tape.softmax_rows(score_row);     // 1 x T
    const Value stacked = tape.concat_cols(states);         // H x T
    const Value pooled = tape.matmul_nt(stacked, weights);  // H x 1
    return AttentionTrace{pooled, weights};
}

} // namespace linkedrnn
