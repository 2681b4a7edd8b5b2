#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/rng.hpp"

namespace linkedrnn {

/// Dense row-major matrix of 64-bit floats. Column vectors are H x 1
/// matrices, row vectors 1 x W; there is no separate vector type.
class Matrix {
public:
    Matrix() = default; // empty sentinel; real matrices have rows, cols >= 1

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0)
            throw DimensionError("Matrix dimensions must be at least 1x1, got " +
                                 shape_string(rows, cols));
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c)
                throw DimensionError("ragged initializer: row " + std::to_string(i) +
                                     " has " + std::to_string(row.size()) +
                                     " entries, expected " + std::to_string(c));
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    static Matrix column(std::span<const double> values) {
        Matrix m(values.size(), 1);
        for (std::size_t i = 0; i < values.size(); ++i) m(i, 0) = values[i];
        return m;
    }

    static Matrix row(std::span<const double> values) {
        Matrix m(1, values.size());
        for (std::size_t j = 0; j < values.size(); ++j) m(0, j) = values[j];
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Entries drawn uniformly from [lo, hi] in row-major order.
    static Matrix uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
        Matrix m(rows, cols);
        for (double& v : m.data_) v = rng.uniform(lo, hi);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double& flat(std::size_t i) { return data_[i]; }
    double flat(std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    std::string shape() const { return shape_string(rows_, cols_); }

    static std::string shape_string(std::size_t r, std::size_t c) {
        return std::to_string(r) + "x" + std::to_string(c);
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// One variable-length sequence per node, stored as a T_i x d matrix with one
/// event vector per row.
using SequenceSet = std::vector<Matrix>;

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() +
                             " vs " + b.shape());
}
} // namespace detail

// ---- plain (non-tape) arithmetic, shared by kernels, oracles and the optimizer ----

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape() +
                             " * " + b.shape());
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.data() + i * c.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// a * b^T
inline Matrix multiply_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: inner dimensions disagree, " + a.shape() +
                             " * " + b.shape() + "^T");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            const double* arow = a.data() + i * a.cols();
            const double* brow = b.data() + j * b.cols();
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    return c;
}

/// a^T * b
inline Matrix multiply_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: inner dimensions disagree, " + a.shape() +
                             "^T * " + b.shape());
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "add");
    for (std::size_t i = 0; i < a.size(); ++i) a.flat(i) += b.flat(i);
}

/// a += s * b
inline void axpy(Matrix& a, double s, const Matrix& b) {
    detail::require_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a.flat(i) += s * b.flat(i);
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    add_inplace(c, b);
    return c;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.flat(i) -= b.flat(i);
    return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    detail::require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.flat(i) *= b.flat(i);
    return c;
}

inline Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.flat(i) *= s;
    return c;
}

} // namespace linkedrnn
