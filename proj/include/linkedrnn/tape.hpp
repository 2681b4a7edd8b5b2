#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/matrix.hpp"

namespace linkedrnn {

/// Handle to a node on a Tape. Only meaningful together with the tape that
/// produced it.
struct Value {
    std::uint32_t index = 0;
};

enum class OpKind : std::uint8_t {
    leaf,
    add,
    sub,
    hadamard,
    scale,
    scale_rows,
    add_row_vector,
    sigmoid,
    tanh_fn,
    relu,
    log_floor,
    matmul,
    matmul_nt, // a * b^T
    matmul_tn, // a^T * b
    softmax_rows,
    concat_cols,
    rows_from_cols,
    select_entries,
    mean_all,
};

/// Reverse-mode automatic differentiation over dense matrices.
///
/// Nodes are appended in creation order, which is also a topological order;
/// backward() walks it in reverse and accumulates (sums) gradients across
/// fan-out. Values are immutable once written. One tape is single-threaded;
/// independent tapes may live on different threads.
class Tape {
public:
    struct ParamBinding {
        Matrix* storage;  // persistent parameter this leaf was copied from
        Value node;
    };

    // ---- leaves ----

    /// Constant leaf; gradients are tracked but nothing consumes them.
    Value leaf(Matrix value) {
        return push(OpKind::leaf, std::move(value), {});
    }

    /// Trainable leaf bound to persistent storage. The tape records the
    /// binding so the training loop can read gradients back per parameter.
    Value param(Matrix& storage) {
        Value v = push(OpKind::leaf, storage, {});
        nodes_[v.index].trainable = true;
        bindings_.push_back({&storage, v});
        return v;
    }

    // ---- elementwise ----

    Value add(Value a, Value b) {
        detail::require_same_shape(value(a), value(b), "add");
        return push(OpKind::add, linkedrnn::add(value(a), value(b)), {a, b});
    }

    Value sub(Value a, Value b) {
        detail::require_same_shape(value(a), value(b), "sub");
        return push(OpKind::sub, subtract(value(a), value(b)), {a, b});
    }

    Value hadamard(Value a, Value b) {
        detail::require_same_shape(value(a), value(b), "hadamard");
        return push(OpKind::hadamard, linkedrnn::hadamard(value(a), value(b)), {a, b});
    }

    Value scale(Value a, double s) {
        Value v = push(OpKind::scale, scaled(value(a), s), {a});
        nodes_[v.index].aux = s;
        return v;
    }

    /// Row i multiplied by factors(i, 0); the diagonal-matrix product
    /// diag(factors) * a without materializing the diagonal.
    Value scale_rows(Value a, Value factors) {
        const Matrix& m = value(a);
        const Matrix& f = value(factors);
        if (f.cols() != 1 || f.rows() != m.rows())
            throw DimensionError("scale_rows: factors must be " +
                                 Matrix::shape_string(m.rows(), 1) + ", got " + f.shape());
        Matrix out = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) *= f(i, 0);
        return push(OpKind::scale_rows, std::move(out), {a, factors});
    }

    /// a + broadcast row vector; `vec` must hold exactly a.cols() entries
    /// (either orientation).
    Value add_row_vector(Value a, Value vec) {
        const Matrix& m = value(a);
        const Matrix& v = value(vec);
        if (v.size() != m.cols())
            throw DimensionError("add_row_vector: vector " + v.shape() +
                                 " does not span the columns of " + m.shape());
        Matrix out = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) += v.flat(j);
        return push(OpKind::add_row_vector, std::move(out), {a, vec});
    }

    Value sigmoid(Value a) {
        Matrix out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.flat(i) = 1.0 / (1.0 + std::exp(-out.flat(i)));
        return push(OpKind::sigmoid, std::move(out), {a});
    }

    Value tanh_act(Value a) {
        Matrix out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out.flat(i) = std::tanh(out.flat(i));
        return push(OpKind::tanh_fn, std::move(out), {a});
    }

    Value relu(Value a) {
        Matrix out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (out.flat(i) < 0.0) out.flat(i) = 0.0;
        return push(OpKind::relu, std::move(out), {a});
    }

    /// ln(max(x, floor)); the derivative is zero in the clamped region.
    Value log_floor(Value a, double floor) {
        Matrix out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.flat(i) = std::log(out.flat(i) > floor ? out.flat(i) : floor);
        Value v = push(OpKind::log_floor, std::move(out), {a});
        nodes_[v.index].aux = floor;
        return v;
    }

    // ---- products ----

    Value matmul(Value a, Value b) {
        return push(OpKind::matmul, multiply(value(a), value(b)), {a, b});
    }

    Value matmul_nt(Value a, Value b) {
        return push(OpKind::matmul_nt, multiply_nt(value(a), value(b)), {a, b});
    }

    Value matmul_tn(Value a, Value b) {
        return push(OpKind::matmul_tn, multiply_tn(value(a), value(b)), {a, b});
    }

    // ---- structured ----

    /// Row-wise softmax with max subtraction; rows sum to 1.
    Value softmax_rows(Value a) {
        Matrix out = value(a);
        for (std::size_t i = 0; i < out.rows(); ++i) {
            double mx = out(i, 0);
            for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
            double sum = 0.0;
            for (std::size_t j = 0; j < out.cols(); ++j) {
                out(i, j) = std::exp(out(i, j) - mx);
                sum += out(i, j);
            }
            for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= sum;
        }
        return push(OpKind::softmax_rows, std::move(out), {a});
    }

    /// Horizontal concatenation; all parts must share the row count.
    Value concat_cols(std::span<const Value> parts) {
        if (parts.empty()) throw ContractError("concat_cols: no inputs");
        const std::size_t rows = value(parts[0]).rows();
        std::size_t cols = 0;
        for (Value p : parts) {
            if (value(p).rows() != rows)
                throw DimensionError("concat_cols: row mismatch " + value(parts[0]).shape() +
                                     " vs " + value(p).shape());
            cols += value(p).cols();
        }
        Matrix out(rows, cols);
        std::size_t offset = 0;
        for (Value p : parts) {
            const Matrix& m = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) out(i, offset + j) = m(i, j);
            offset += m.cols();
        }
        return push(OpKind::concat_cols, std::move(out),
                    std::vector<Value>(parts.begin(), parts.end()));
    }

    /// Builds an n x k matrix whose row i is the transpose of the i-th
    /// column-vector input (all k x 1).
    Value rows_from_cols(std::span<const Value> columns) {
        if (columns.empty()) throw ContractError("rows_from_cols: no inputs");
        const std::size_t width = value(columns[0]).rows();
        Matrix out(columns.size(), width);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            const Matrix& c = value(columns[i]);
            if (c.cols() != 1 || c.rows() != width)
                throw DimensionError("rows_from_cols: expected " +
                                     Matrix::shape_string(width, 1) + " column, got " +
                                     c.shape());
            for (std::size_t j = 0; j < width; ++j) out(i, j) = c(j, 0);
        }
        return push(OpKind::rows_from_cols, std::move(out),
                    std::vector<Value>(columns.begin(), columns.end()));
    }

    /// Gathers the listed (row, col) entries into a K x 1 column.
    Value select_entries(Value a, std::vector<std::pair<std::uint32_t, std::uint32_t>> coords) {
        if (coords.empty()) throw ContractError("select_entries: empty coordinate list");
        const Matrix& m = value(a);
        Matrix out(coords.size(), 1);
        for (std::size_t k = 0; k < coords.size(); ++k) {
            const auto [r, c] = coords[k];
            if (r >= m.rows() || c >= m.cols())
                throw DimensionError("select_entries: (" + std::to_string(r) + "," +
                                     std::to_string(c) + ") outside " + m.shape());
            out(k, 0) = m(r, c);
        }
        Value v = push(OpKind::select_entries, std::move(out), {a});
        nodes_[v.index].coords = std::move(coords);
        return v;
    }

    /// Mean of all entries as a 1 x 1 scalar node.
    Value mean_all(Value a) {
        const Matrix& m = value(a);
        double sum = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) sum += m.flat(i);
        Matrix out(1, 1);
        out(0, 0) = sum / static_cast<double>(m.size());
        return push(OpKind::mean_all, std::move(out), {a});
    }

    // ---- gradients ----

    /// Reverse pass from a scalar root. Every node reachable from the root
    /// receives d(root)/d(node) in its grad, summed across fan-out.
    void backward(Value root) {
        const Matrix& r = value(root);
        if (r.rows() != 1 || r.cols() != 1)
            throw ContractError("backward: root must be a 1x1 scalar, got " + r.shape());

        std::vector<bool> reachable(nodes_.size(), false);
        mark_reachable(root, reachable);

        nodes_[root.index].grad(0, 0) += 1.0;
        for (std::uint32_t idx = root.index + 1; idx-- > 0;) {
            if (!reachable[idx]) continue;
            backward_step(idx);
        }
    }

    void zero_grads() {
        for (Node& n : nodes_) n.grad.fill(0.0);
    }

    const Matrix& value(Value v) const { return nodes_[v.index].value; }
    const Matrix& grad(Value v) const { return nodes_[v.index].grad; }
    OpKind op(Value v) const { return nodes_[v.index].op; }
    std::size_t size() const { return nodes_.size(); }
    std::span<const ParamBinding> params() const { return bindings_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        OpKind op;
        std::vector<Value> parents;
        double aux = 0.0; // scale factor or log floor
        std::vector<std::pair<std::uint32_t, std::uint32_t>> coords;
        bool trainable = false;
    };

    Value push(OpKind op, Matrix value, std::vector<Value> parents) {
        Node n;
        n.grad = Matrix(value.rows(), value.cols());
        n.value = std::move(value);
        n.op = op;
        n.parents = std::move(parents);
        nodes_.push_back(std::move(n));
        return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    void mark_reachable(Value root, std::vector<bool>& reachable) const {
        std::vector<std::uint32_t> stack{root.index};
        reachable[root.index] = true;
        while (!stack.empty()) {
            const std::uint32_t idx = stack.back();
            stack.pop_back();
            for (Value p : nodes_[idx].parents)
                if (!reachable[p.index]) {
                    reachable[p.index] = true;
                    stack.push_back(p.index);
                }
        }
    }

    Matrix& grad_of(Value v) { return nodes_[v.index].grad; }

    void backward_step(std::uint32_t idx) {
        Node& n = nodes_[idx];
        const Matrix& g = n.grad;
        switch (n.op) {
        case OpKind::leaf:
            break;
        case OpKind::add:
            add_inplace(grad_of(n.parents[0]), g);
            add_inplace(grad_of(n.parents[1]), g);
            break;
        case OpKind::sub:
            add_inplace(grad_of(n.parents[0]), g);
            axpy(grad_of(n.parents[1]), -1.0, g);
            break;
        case OpKind::hadamard:
            add_inplace(grad_of(n.parents[0]), linkedrnn::hadamard(g, nodes_[n.parents[1].index].value));
            add_inplace(grad_of(n.parents[1]), linkedrnn::hadamard(g, nodes_[n.parents[0].index].value));
            break;
        case OpKind::scale:
            axpy(grad_of(n.parents[0]), n.aux, g);
            break;
        case OpKind::scale_rows: {
            Matrix& ag = grad_of(n.parents[0]);
            Matrix& fg = grad_of(n.parents[1]);
            const Matrix& a = nodes_[n.parents[0].index].value;
            const Matrix& f = nodes_[n.parents[1].index].value;
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    ag(i, j) += g(i, j) * f(i, 0);
                    fg(i, 0) += g(i, j) * a(i, j);
                }
            break;
        }
        case OpKind::add_row_vector: {
            add_inplace(grad_of(n.parents[0]), g);
            Matrix& vg = grad_of(n.parents[1]);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) vg.flat(j) += g(i, j);
            break;
        }
        case OpKind::sigmoid: {
            Matrix& pg = grad_of(n.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = n.value.flat(i);
                pg.flat(i) += g.flat(i) * s * (1.0 - s);
            }
            break;
        }
        case OpKind::tanh_fn: {
            Matrix& pg = grad_of(n.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double t = n.value.flat(i);
                pg.flat(i) += g.flat(i) * (1.0 - t * t);
            }
            break;
        }
        case OpKind::relu: {
            Matrix& pg = grad_of(n.parents[0]);
            const Matrix& x = nodes_[n.parents[0].index].value;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.flat(i) > 0.0) pg.flat(i) += g.flat(i);
            break;
        }
        case OpKind::log_floor: {
            Matrix& pg = grad_of(n.parents[0]);
            const Matrix& x = nodes_[n.parents[0].index].value;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.flat(i) > n.aux) pg.flat(i) += g.flat(i) / x.flat(i);
            break;
        }
        case OpKind::matmul:
            add_inplace(grad_of(n.parents[0]), multiply_nt(g, nodes_[n.parents[1].index].value));
            add_inplace(grad_of(n.parents[1]), multiply_tn(nodes_[n.parents[0].index].value, g));
            break;
        case OpKind::matmul_nt:
            add_inplace(grad_of(n.parents[0]), multiply(g, nodes_[n.parents[1].index].value));
            add_inplace(grad_of(n.parents[1]), multiply_tn(g, nodes_[n.parents[0].index].value));
            break;
        case OpKind::matmul_tn:
            add_inplace(grad_of(n.parents[0]), multiply_nt(nodes_[n.parents[1].index].value, g));
            add_inplace(grad_of(n.parents[1]), multiply(nodes_[n.parents[0].index].value, g));
            break;
        case OpKind::softmax_rows: {
            // exact Jacobian per row: dx_j = s_j * (g_j - sum_k g_k s_k)
            Matrix& pg = grad_of(n.parents[0]);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * n.value(i, j);
                for (std::size_t j = 0; j < g.cols(); ++j)
                    pg(i, j) += n.value(i, j) * (g(i, j) - dot);
            }
            break;
        }
        case OpKind::concat_cols: {
            std::size_t offset = 0;
            for (Value p : n.parents) {
                Matrix& pg = grad_of(p);
                for (std::size_t i = 0; i < pg.rows(); ++i)
                    for (std::size_t j = 0; j < pg.cols(); ++j) pg(i, j) += g(i, offset + j);
                offset += pg.cols();
            }
            break;
        }
        case OpKind::rows_from_cols:
            for (std::size_t i = 0; i < n.parents.size(); ++i) {
                Matrix& pg = grad_of(n.parents[i]);
                for (std::size_t j = 0; j < pg.rows(); ++j) pg(j, 0) += g(i, j);
            }
            break;
        case OpKind::select_entries: {
            Matrix& pg = grad_of(n.parents[0]);
            for (std::size_t k = 0; k < n.coords.size(); ++k)
                pg(n.coords[k].first, n.coords[k].second) += g(k, 0);
            break;
        }
        case OpKind::mean_all: {
            Matrix& pg = grad_of(n.parents[0]);
            const double w = g(0, 0) / static_cast<double>(pg.size());
            for (std::size_t i = 0; i < pg.size(); ++i) pg.flat(i) += w;
            break;
        }
        }
    }

    std::vector<Node> nodes_;
    std::vector<ParamBinding> bindings_;
};

/// Central-difference gradient of `loss` with respect to `param`, entry by
/// entry: (L(x+eps) - L(x-eps)) / (2 eps). The loss closure must be
/// deterministic and must read `param` afresh on every call.
inline Matrix finite_diff_grad(const std::function<double()>& loss, Matrix& param,
                               double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("finite_diff_grad: epsilon must be positive");
    Matrix grad(param.rows(), param.cols());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param.flat(i);
        param.flat(i) = saved + epsilon;
        const double up = loss();
        param.flat(i) = saved - epsilon;
        const double down = loss();
        param.flat(i) = saved;
        grad.flat(i) = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

/// Relative error with a guard against vanishing denominators, used by all
/// gradient checks: |a - f| / max(|a|, |f|, 1e-8).
inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

} // namespace linkedrnn
