#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "linkedrnn/matrix.hpp"
#include "linkedrnn/rng.hpp"
#include "linkedrnn/tape.hpp"

using namespace linkedrnn;
using Catch::Approx;

TEST_CASE("matmul values") {
    Tape tape;
    const Value id = tape.leaf(Matrix::identity(2));
    const Value v = tape.leaf(Matrix::from_rows({{1.0}, {2.0}}));
    const Matrix& r = tape.value(tape.matmul(id, v));
    CHECK(r(0, 0) == 1.0);
    CHECK(r(1, 0) == 2.0);

    const Value a = tape.leaf(Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    const Value ones = tape.leaf(Matrix::from_rows({{1.0}, {1.0}}));
    const Matrix& p = tape.value(tape.matmul(a, ones));
    CHECK(p(0, 0) == 3.0);
    CHECK(p(1, 0) == 7.0);
}

TEST_CASE("matmul gradient of a linear form") {
    // d(a^T b)/da = b
    Tape tape;
    Matrix a_store = Matrix::from_rows({{1.0}, {2.0}});
    const Value a = tape.param(a_store);
    const Value b = tape.leaf(Matrix::from_rows({{5.0}, {7.0}}));
    const Value dot = tape.matmul_tn(a, b);
    tape.backward(dot);
    CHECK(tape.grad(a)(0, 0) == 5.0);
    CHECK(tape.grad(a)(1, 0) == 7.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    const Value a = tape.leaf(Matrix(2, 3));
    const Value b = tape.leaf(Matrix(2, 2));
    REQUIRE_THROWS_AS(tape.matmul(a, b), DimensionError);
    REQUIRE_THROWS_WITH(tape.matmul(a, b),
                        Catch::Matchers::ContainsSubstring("2x3") &&
                            Catch::Matchers::ContainsSubstring("2x2"));
}

TEST_CASE("elementwise basics") {
    Tape tape;
    CHECK(tape.value(tape.sigmoid(tape.leaf(Matrix(1, 1, 0.0))))(0, 0) == 0.5);
    CHECK(tape.value(tape.tanh_act(tape.leaf(Matrix(1, 1, 0.0))))(0, 0) == 0.0);
    const Value h = tape.hadamard(tape.leaf(Matrix::from_rows({{2.0, 3.0}})),
                                  tape.leaf(Matrix::from_rows({{4.0, 5.0}})));
    CHECK(tape.value(h)(0, 0) == 8.0);
    CHECK(tape.value(h)(0, 1) == 15.0);
    const Value bad = tape.leaf(Matrix(1, 3));
    REQUIRE_THROWS_AS(tape.add(h, bad), DimensionError);
}

TEST_CASE("softmax rows") {
    Tape tape;
    const Matrix& uniform = tape.value(tape.softmax_rows(tape.leaf(Matrix(1, 3, 0.0))));
    for (int j = 0; j < 3; ++j) CHECK(uniform(0, j) == Approx(1.0 / 3.0).margin(1e-15));

    const Value logits =
        tape.leaf(Matrix::from_rows({{std::log(1.0), std::log(3.0)}}));
    const Matrix& probs = tape.value(tape.softmax_rows(logits));
    CHECK(probs(0, 0) == Approx(0.25).margin(1e-12));
    CHECK(probs(0, 1) == Approx(0.75).margin(1e-12));

    const Matrix& big = tape.value(tape.softmax_rows(tape.leaf(Matrix(1, 2, 1000.0))));
    CHECK(big(0, 0) == 0.5);
    CHECK(big(0, 1) == 0.5);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix logits(3, 4);
        for (std::size_t i = 0; i < logits.size(); ++i) logits.flat(i) = rng.uniform(-5, 5);
        Tape tape;
        const Matrix& p = tape.value(tape.softmax_rows(tape.leaf(logits)));
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) sum += p(i, j);
            CHECK(sum == Approx(1.0).margin(1e-12));
        }
        Matrix shifted = logits;
        const double c = rng.uniform(-100, 100);
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted.flat(i) += c;
        const Matrix& q = tape.value(tape.softmax_rows(tape.leaf(shifted)));
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(std::abs(p.flat(i) - q.flat(i)) < 1e-12);
    }
}

TEST_CASE("backward basics") {
    SECTION("square via hadamard fan-in") {
        Tape tape;
        Matrix x_store(1, 1, 3.0);
        const Value x = tape.param(x_store);
        tape.backward(tape.hadamard(x, x));
        CHECK(tape.grad(x)(0, 0) == 6.0);
    }
    SECTION("fan-out accumulates") {
        Tape tape;
        Matrix x_store(1, 1, 1.0);
        const Value x = tape.param(x_store);
        tape.backward(tape.add(x, x));
        CHECK(tape.grad(x)(0, 0) == 2.0);
    }
    SECTION("sigmoid slope at zero") {
        Tape tape;
        Matrix x_store(1, 1, 0.0);
        const Value x = tape.param(x_store);
        tape.backward(tape.sigmoid(x));
        CHECK(tape.grad(x)(0, 0) == 0.25);
    }
    SECTION("k-fold fan-out") {
        Tape tape;
        Matrix x_store(1, 1, 2.5);
        const Value x = tape.param(x_store);
        Value acc = x;
        const int k = 7;
        for (int i = 1; i < k; ++i) acc = tape.add(acc, x);
        tape.backward(acc);
        CHECK(tape.grad(x)(0, 0) == static_cast<double>(k));
    }
    SECTION("non-scalar root rejected") {
        Tape tape;
        const Value m = tape.leaf(Matrix(2, 2));
        REQUIRE_THROWS_AS(tape.backward(m), ContractError);
    }
}

TEST_CASE("tape replay after grad reset is bitwise identical") {
    Rng rng(7);
    Tape tape;
    Matrix w_store = Matrix::uniform(3, 3, -1, 1, rng);
    Matrix x_store = Matrix::uniform(3, 1, -1, 1, rng);
    const Value w = tape.param(w_store);
    const Value x = tape.param(x_store);
    const Value loss = tape.mean_all(tape.tanh_act(tape.matmul(w, x)));
    tape.backward(loss);
    const Matrix first_w = tape.grad(w);
    const Matrix first_x = tape.grad(x);
    tape.zero_grads();
    tape.backward(loss);
    CHECK(tape.grad(w) == first_w);
    CHECK(tape.grad(x) == first_x);
}

TEST_CASE("finite difference oracle on closed forms") {
    SECTION("quadratic") {
        Matrix theta(1, 1, 3.0);
        const auto loss = [&] { return theta(0, 0) * theta(0, 0); };
        const Matrix g = finite_diff_grad(loss, theta, 1e-5);
        CHECK(g(0, 0) == Approx(6.0).margin(1e-8));
        CHECK(theta(0, 0) == 3.0); // restored
    }
    SECTION("constant") {
        Matrix theta(2, 2, 1.0);
        const Matrix g = finite_diff_grad([] { return 4.2; }, theta, 1e-5);
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flat(i) == 0.0);
    }
    SECTION("epsilon must be positive") {
        Matrix theta(1, 1, 1.0);
        REQUIRE_THROWS_AS(finite_diff_grad([] { return 0.0; }, theta, 0.0), ContractError);
    }
}

namespace {

// Generic analytic-vs-central-difference check: `build` must construct the
// same scalar graph from the given input storages on every call.
void check_op_gradients(std::vector<Matrix>& inputs,
                        const std::function<Value(Tape&, std::vector<Value>&)>& build,
                        double tolerance = 1e-6) {
    Tape tape;
    std::vector<Value> bound;
    for (Matrix& m : inputs) bound.push_back(tape.param(m));
    const Value root = build(tape, bound);
    tape.backward(root);

    const auto loss = [&]() {
        Tape fresh;
        std::vector<Value> vals;
        for (Matrix& m : inputs) vals.push_back(fresh.param(m));
        return fresh.value(build(fresh, vals))(0, 0);
    };
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Matrix numeric = finite_diff_grad(loss, inputs[k], 1e-5);
        const Matrix& analytic = tape.grad(bound[k]);
        for (std::size_t i = 0; i < numeric.size(); ++i)
            CHECK(relative_error(analytic.flat(i), numeric.flat(i)) <= tolerance);
    }
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0,
                     double hi = 2.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.flat(i) = rng.uniform(lo, hi);
    return m;
}

// scalarize a matrix node with a fixed random weighting
Value scalarize(Tape& tape, Value v, const Matrix& weights) {
    return tape.mean_all(tape.hadamard(v, tape.leaf(weights)));
}

} // namespace

TEST_CASE("every differentiable op matches central finite differences") {
    Rng rng(123);

    SECTION("binary elementwise and scale") {
        for (int trial = 0; trial < 3; ++trial) {
            const Matrix w = random_matrix(2, 3, rng);
            std::vector<Matrix> inputs{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
            check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
                const Value mixed =
                    t.scale(t.add(t.hadamard(v[0], v[1]), t.sub(v[0], v[1])), 1.7);
                return scalarize(t, mixed, w);
            });
        }
    }
    SECTION("sigmoid tanh") {
        const Matrix w = random_matrix(3, 2, rng);
        std::vector<Matrix> inputs{random_matrix(3, 2, rng)};
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.tanh_act(t.sigmoid(v[0])), w);
        });
    }
    SECTION("relu away from the kink") {
        Matrix in = random_matrix(3, 3, rng);
        for (std::size_t i = 0; i < in.size(); ++i)
            if (std::abs(in.flat(i)) < 1e-3) in.flat(i) = 0.5;
        const Matrix w = random_matrix(3, 3, rng);
        std::vector<Matrix> inputs{in};
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.relu(v[0]), w);
        });
    }
    SECTION("log with floor") {
        std::vector<Matrix> inputs{random_matrix(2, 2, rng, 0.5, 2.0)};
        const Matrix w = random_matrix(2, 2, rng);
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.log_floor(v[0], 1e-12), w);
        });
    }
    SECTION("products") {
        const Matrix w = random_matrix(2, 2, rng);
        std::vector<Matrix> inputs{random_matrix(2, 3, rng), random_matrix(3, 2, rng)};
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.matmul(v[0], v[1]), w);
        });
        const Matrix w2 = random_matrix(2, 4, rng);
        std::vector<Matrix> inputs_nt{random_matrix(2, 3, rng), random_matrix(4, 3, rng)};
        check_op_gradients(inputs_nt, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.matmul_nt(v[0], v[1]), w2);
        });
        const Matrix w3 = random_matrix(3, 4, rng);
        std::vector<Matrix> inputs_tn{random_matrix(2, 3, rng), random_matrix(2, 4, rng)};
        check_op_gradients(inputs_tn, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.matmul_tn(v[0], v[1]), w3);
        });
    }
    SECTION("softmax rows") {
        const Matrix w = random_matrix(2, 3, rng);
        std::vector<Matrix> inputs{random_matrix(2, 3, rng)};
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.softmax_rows(v[0]), w);
        });
    }
    SECTION("structural ops") {
        const Matrix w = random_matrix(2, 5, rng);
        std::vector<Matrix> inputs{random_matrix(2, 2, rng), random_matrix(2, 3, rng)};
        check_op_gradients(inputs, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.concat_cols(std::vector<Value>{v[0], v[1]}), w);
        });

        const Matrix w2 = random_matrix(2, 3, rng);
        std::vector<Matrix> cols{random_matrix(3, 1, rng), random_matrix(3, 1, rng)};
        check_op_gradients(cols, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.rows_from_cols(v), w2);
        });

        std::vector<Matrix> sel{random_matrix(3, 3, rng)};
        check_op_gradients(sel, [&](Tape& t, std::vector<Value>& v) {
            const Value picked = t.select_entries(v[0], {{0, 1}, {2, 2}, {1, 0}});
            return t.mean_all(picked);
        });

        const Matrix vec = random_matrix(1, 4, rng);
        const Matrix w3 = random_matrix(3, 4, rng);
        std::vector<Matrix> arv{random_matrix(3, 4, rng), vec};
        check_op_gradients(arv, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.add_row_vector(v[0], v[1]), w3);
        });

        const Matrix w4 = random_matrix(3, 2, rng);
        std::vector<Matrix> sr{random_matrix(3, 2, rng), random_matrix(3, 1, rng)};
        check_op_gradients(sr, [&](Tape& t, std::vector<Value>& v) {
            return scalarize(t, t.scale_rows(v[0], v[1]), w4);
        });
    }
}
