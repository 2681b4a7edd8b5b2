#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "linkedrnn/checkpoint.hpp"
#include "linkedrnn/model.hpp"
#include "linkedrnn/rng.hpp"

using namespace linkedrnn;
using Catch::Approx;

namespace {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

SequenceSet tiny_sequences(std::size_t n, std::size_t d, Rng& rng, std::size_t max_len = 4) {
    SequenceSet seqs;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t len = 1 + static_cast<std::size_t>(rng.integer(max_len));
        seqs.push_back(Matrix::uniform(len, d, -1.5, 1.5, rng));
    }
    return seqs;
}

ModelConfig classification_config(std::size_t d, std::size_t h, std::size_t classes) {
    ModelConfig cfg;
    cfg.input_dim = d;
    cfg.hidden_dim = h;
    cfg.classes = classes;
    cfg.task = TaskKind::classification;
    return cfg;
}

} // namespace

TEST_CASE("zero parameters give uniform class distributions") {
    ModelConfig cfg = classification_config(2, 3, 3);
    cfg.link_rounds = 1;
    cfg.agg2 = Aggregation2::last;
    cfg.pooling = PoolingKind::last;
    LinkedRnn model = LinkedRnn::create(cfg, 1);
    ParamRegistry registry = model.registry();
    for (ParamRef& p : registry) p.value->fill(0.0);

    Rng rng(2);
    const SequenceSet seqs = tiny_sequences(4, 2, rng);
    const LinkGraph graph(4, std::vector<Edge>{{0, 1}, {2, 3}});
    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, graph);
    const Matrix& probs = tape.value(pass.prediction);
    REQUIRE(probs.rows() == 4);
    REQUIRE(probs.cols() == 3);
    for (std::size_t i = 0; i < probs.size(); ++i)
        CHECK(probs.flat(i) == Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("class distributions sum to one") {
    ModelConfig cfg = classification_config(2, 4, 5);
    LinkedRnn model = LinkedRnn::create(cfg, 3);
    Rng rng(4);
    const SequenceSet seqs = tiny_sequences(5, 2, rng);
    const LinkGraph graph(5, std::vector<Edge>{{0, 1}, {1, 2}, {3, 4}});
    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, graph);
    const Matrix& probs = tape.value(pass.prediction);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) sum += probs(i, j);
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("disabled propagation with last aggregation exposes the pooled states") {
    // with M=0 and aggregation2 = last, z_i is exactly the pooled RNN output
    ModelConfig cfg = classification_config(2, 3, 2);
    cfg.link_rounds = 0;
    cfg.agg2 = Aggregation2::last;
    cfg.pooling = PoolingKind::last;
    LinkedRnn model = LinkedRnn::create(cfg, 7);

    Rng rng(8);
    const SequenceSet seqs = tiny_sequences(3, 2, rng);
    const LinkGraph graph(3, std::vector<Edge>{{0, 1}});
    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, graph);
    REQUIRE(pass.layers.size() == 1);
    CHECK(pass.z.index == pass.layers[0].index);

    // row i equals the last hidden state of an independent encoding
    Tape probe;
    const GruWeights w = bind(probe, model.params().gru);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto states = encode_sequence(probe, w, seqs[i], Matrix(3, 1));
        const Matrix& last = probe.value(states.back());
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(tape.value(pass.z)(i, c) == last(c, 0));
    }
}

TEST_CASE("two-node hand trace at scalar dimensions") {
    ModelConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dim = 1;
    cfg.link_rounds = 1;
    cfg.pooling = PoolingKind::last;
    cfg.agg2 = Aggregation2::last;
    cfg.activation = LinkActivation::identity;
    cfg.task = TaskKind::regression;

    ModelParams params = ModelParams::init(cfg, 1);
    params.gru.wz = Matrix(1, 1, 0.3);
    params.gru.uz = Matrix(1, 1, -0.2);
    params.gru.bz = Matrix(1, 1, 0.1);
    params.gru.wr = Matrix(1, 1, 0.4);
    params.gru.ur = Matrix(1, 1, 0.15);
    params.gru.br = Matrix(1, 1, -0.05);
    params.gru.w = Matrix(1, 1, 0.7);
    params.gru.u = Matrix(1, 1, 0.25);
    params.gru.bc = Matrix(1, 1, 0.05);
    params.head.weight = Matrix(1, 1, 1.2);
    params.head.bias = Matrix(1, 1, -0.1);
    LinkedRnn model(cfg, std::move(params));

    SequenceSet seqs;
    seqs.push_back(Matrix(1, 1, 0.5));
    Matrix s1(2, 1);
    s1(0, 0) = -0.3;
    s1(1, 0) = 0.8;
    seqs.push_back(s1);
    const LinkGraph graph(2, std::vector<Edge>{{0, 1}});

    // plain-double replay of the same arithmetic
    const auto sigma = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    const auto step = [&](double h, double x) {
        const double z = sigma(0.3 * x + -0.2 * h + 0.1);
        const double r = sigma(0.4 * x + 0.15 * h + -0.05);
        const double cand = std::tanh(0.7 * x + 0.25 * (r * h) + 0.05);
        return z * h + (1.0 - z) * cand;
    };
    const double h0 = step(0.0, 0.5);
    const double h1 = step(step(0.0, -0.3), 0.8);
    const double v_mean = (h0 + h1) / 2.0;
    const double expected_pred = 1.2 * v_mean + -0.1;

    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, graph);
    CHECK(tape.value(pass.prediction)(0, 0) == Approx(expected_pred).margin(1e-14));
    CHECK(tape.value(pass.prediction)(1, 0) == Approx(expected_pred).margin(1e-14));
    CHECK(tape.value(pass.z)(0, 0) == Approx(v_mean).margin(1e-14));
}

TEST_CASE("classification loss examples") {
    ModelConfig cfg = classification_config(1, 1, 4);
    LinkedRnn model = LinkedRnn::create(cfg, 1);
    Tape tape;
    ForwardPass pass;

    SECTION("uniform predictions") {
        pass.prediction = tape.leaf(Matrix(3, 4, 0.25));
        const std::vector<int> labels{0, 1, 3};
        const std::vector<std::uint32_t> idx{0, 1, 2};
        const Value loss = model.loss_classification(tape, pass, labels, idx);
        CHECK(tape.value(loss)(0, 0) == Approx(std::log(4.0)).margin(1e-12));
        CHECK(tape.value(loss)(0, 0) == Approx(1.386294).margin(1e-6));
    }
    SECTION("perfect one-hot predictions") {
        Matrix p(2, 4, 0.0);
        p(0, 2) = 1.0;
        p(1, 0) = 1.0;
        pass.prediction = tape.leaf(p);
        const std::vector<int> labels{2, 0};
        const std::vector<std::uint32_t> idx{0, 1};
        CHECK(tape.value(model.loss_classification(tape, pass, labels, idx))(0, 0) <=
              1e-10);
    }
    SECTION("direct evaluation") {
        ModelConfig cfg2 = classification_config(1, 1, 2);
        LinkedRnn model2 = LinkedRnn::create(cfg2, 1);
        Matrix p(1, 2);
        p(0, 0) = 0.7;
        p(0, 1) = 0.3;
        pass.prediction = tape.leaf(p);
        const std::vector<int> labels{0};
        const std::vector<std::uint32_t> idx{0};
        const Value loss = model2.loss_classification(tape, pass, labels, idx);
        CHECK(tape.value(loss)(0, 0) == Approx(-std::log(0.7)).margin(1e-12));
        CHECK(tape.value(loss)(0, 0) == Approx(0.356675).margin(1e-6));
    }
    SECTION("empty labeled set rejected") {
        pass.prediction = tape.leaf(Matrix(2, 4, 0.25));
        const std::vector<int> labels{0, 1};
        CHECK_THROWS_AS(
            model.loss_classification(tape, pass, labels, std::vector<std::uint32_t>{}),
            DomainError);
    }
    SECTION("label out of range rejected") {
        pass.prediction = tape.leaf(Matrix(1, 4, 0.25));
        const std::vector<int> labels{4};
        const std::vector<std::uint32_t> idx{0};
        CHECK_THROWS_AS(model.loss_classification(tape, pass, labels, idx), DomainError);
    }
}

TEST_CASE("regression loss examples") {
    ModelConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dim = 1;
    cfg.task = TaskKind::regression;
    LinkedRnn model = LinkedRnn::create(cfg, 1);
    Tape tape;
    ForwardPass pass;

    SECTION("zero residual") {
        Matrix p(2, 1);
        p(0, 0) = 1.5;
        p(1, 0) = -2.0;
        pass.prediction = tape.leaf(p);
        const std::vector<double> y{1.5, -2.0};
        const std::vector<std::uint32_t> idx{0, 1};
        CHECK(tape.value(model.loss_regression(tape, pass, y, idx))(0, 0) == 0.0);
    }
    SECTION("direct arithmetic") {
        Matrix p(2, 1);
        p(0, 0) = 2.0;
        p(1, 0) = 1.0;
        pass.prediction = tape.leaf(p);
        const std::vector<double> y{1.0, 3.0};
        const std::vector<std::uint32_t> idx{0, 1};
        CHECK(tape.value(model.loss_regression(tape, pass, y, idx))(0, 0) == 2.5);
    }
    SECTION("single labeled node") {
        pass.prediction = tape.leaf(Matrix(3, 1, 0.8));
        const std::vector<double> y{0.0, 0.0, 0.0};
        const std::vector<std::uint32_t> idx{1};
        CHECK(tape.value(model.loss_regression(tape, pass, y, idx))(0, 0) ==
              Approx(0.64).margin(1e-15));
    }
}

TEST_CASE("prediction rules") {
    SECTION("argmax with lowest-index tie break") {
        Matrix p(2, 3);
        p(0, 0) = 0.1;
        p(0, 1) = 0.7;
        p(0, 2) = 0.2;
        p(1, 0) = 0.5;
        p(1, 1) = 0.5;
        p(1, 2) = 0.0;
        const std::vector<int> classes = predict_classes(p);
        CHECK(classes[0] == 1);
        CHECK(classes[1] == 0);
    }
    SECTION("constant regression head") {
        ModelConfig cfg;
        cfg.input_dim = 2;
        cfg.hidden_dim = 2;
        cfg.task = TaskKind::regression;
        cfg.link_rounds = 0;
        cfg.agg2 = Aggregation2::last;
        LinkedRnn model = LinkedRnn::create(cfg, 5);
        model.params().head.weight.fill(0.0);
        model.params().head.bias(0, 0) = 0.37;
        Rng rng(6);
        const SequenceSet seqs = tiny_sequences(3, 2, rng);
        const LinkGraph graph(3, std::vector<Edge>{{0, 2}});
        Tape tape;
        const ForwardPass pass = model.forward(tape, seqs, graph);
        for (double v : predict_values(tape.value(pass.prediction)))
            CHECK(v == Approx(0.37).margin(1e-15));
    }
    SECTION("adding a constant to the logits leaves classes unchanged") {
        ModelConfig cfg = classification_config(2, 3, 4);
        LinkedRnn model = LinkedRnn::create(cfg, 9);
        Rng rng(10);
        const SequenceSet seqs = tiny_sequences(5, 2, rng);
        const LinkGraph graph(5, std::vector<Edge>{{0, 1}, {2, 3}, {3, 4}});
        Tape tape;
        const std::vector<int> before =
            predict_classes(tape.value(model.forward(tape, seqs, graph).prediction));
        for (std::size_t c = 0; c < 4; ++c) model.params().head.bias(c, 0) += 3.21;
        Tape tape2;
        const std::vector<int> after =
            predict_classes(tape2.value(model.forward(tape2, seqs, graph).prediction));
        CHECK(before == after);
    }
}

TEST_CASE("node relabeling leaves the loss unchanged") {
    ModelConfig cfg = classification_config(2, 3, 3);
    cfg.link_rounds = 2;
    LinkedRnn model = LinkedRnn::create(cfg, 11);
    Rng rng(12);
    const SequenceSet seqs = tiny_sequences(5, 2, rng);
    const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
    const std::vector<int> labels{0, 1, 2, 0, 1};
    const std::vector<std::uint32_t> train{0, 2, 4};

    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, LinkGraph(5, edges));
    const double base =
        tape.value(model.loss_classification(tape, pass, labels, train))(0, 0);

    const std::vector<std::uint32_t> perm{2, 4, 0, 3, 1};
    SequenceSet pseqs(5);
    std::vector<int> plabels(5);
    for (std::size_t i = 0; i < 5; ++i) {
        pseqs[perm[i]] = seqs[i];
        plabels[perm[i]] = labels[i];
    }
    std::vector<Edge> pedges;
    for (const auto& [a, b] : edges) pedges.emplace_back(perm[a], perm[b]);
    std::vector<std::uint32_t> ptrain;
    for (std::uint32_t i : train) ptrain.push_back(perm[i]);

    Tape ptape;
    const ForwardPass ppass = model.forward(ptape, pseqs, LinkGraph(5, pedges));
    const double permuted =
        ptape.value(model.loss_classification(ptape, ppass, plabels, ptrain))(0, 0);
    CHECK(std::abs(base - permuted) <= 1e-12);
}

TEST_CASE("end-to-end gradients on a 3-node path graph") {
    ModelConfig cfg = classification_config(2, 3, 3);
    cfg.link_rounds = 2;
    cfg.pooling = PoolingKind::attention;
    cfg.agg2 = Aggregation2::ffn_all;
    LinkedRnn model = LinkedRnn::create(cfg, 13);
    Rng rng(14);
    const SequenceSet seqs = tiny_sequences(3, 2, rng);
    const LinkGraph graph(3, std::vector<Edge>{{0, 1}, {1, 2}});
    const std::vector<int> labels{0, 1, 2};
    const std::vector<std::uint32_t> train{0, 1, 2};

    const auto loss_value = [&]() {
        Tape tape;
        const ForwardPass pass = model.forward(tape, seqs, graph);
        return tape.value(model.loss_classification(tape, pass, labels, train))(0, 0);
    };

    Tape tape;
    const ForwardPass pass = model.forward(tape, seqs, graph);
    tape.backward(model.loss_classification(tape, pass, labels, train));

    for (const auto& binding : tape.params()) {
        const Matrix numeric = finite_diff_grad(loss_value, *binding.storage, 1e-5);
        const Matrix& analytic = tape.grad(binding.node);
        for (std::size_t i = 0; i < numeric.size(); ++i)
            CHECK(relative_error(analytic.flat(i), numeric.flat(i)) <= 1e-5);
    }
}

TEST_CASE("forward validates node counts") {
    ModelConfig cfg = classification_config(2, 2, 2);
    LinkedRnn model = LinkedRnn::create(cfg, 15);
    Rng rng(16);
    const SequenceSet seqs = tiny_sequences(3, 2, rng);
    const LinkGraph graph(4, std::vector<Edge>{{0, 1}});
    Tape tape;
    CHECK_THROWS_AS(model.forward(tape, seqs, graph), DimensionError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    ModelConfig cfg = classification_config(3, 4, 3);
    cfg.agg2 = Aggregation2::ffn_all;
    cfg.link_rounds = 2;
    LinkedRnn model = LinkedRnn::create(cfg, 17);

    const std::string path = "checkpoint_roundtrip_test.json";
    save_checkpoint(model.config(), model.params(), path);
    LinkedRnn loaded = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(loaded.config().hidden_dim == cfg.hidden_dim);
    CHECK(loaded.config().agg2 == cfg.agg2);
    ParamRegistry a = model.registry();
    ParamRegistry b = loaded.registry();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].name == b[k].name);
        CHECK(*a[k].value == *b[k].value); // bitwise
    }
}

TEST_CASE("inductive prediction") {
    SECTION("no neighbors and no rounds equals the transductive single node") {
        ModelConfig cfg = classification_config(2, 3, 2);
        cfg.link_rounds = 0;
        cfg.agg2 = Aggregation2::last;
        LinkedRnn model = LinkedRnn::create(cfg, 19);
        Rng rng(20);
        const SequenceSet seqs = tiny_sequences(1, 2, rng);
        const LinkGraph graph(1, std::vector<Edge>{});
        Tape tape;
        const ModelOutput out = model.output(tape, model.forward(tape, seqs, graph));
        const InductivePrediction ind = model.predict_inductive(seqs[0], {});
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(ind.prediction(0, j) == Approx(out.predictions(0, j)).margin(1e-12));
    }
    SECTION("empty neighborhood with rounds reduces to self-only propagation") {
        ModelConfig cfg = classification_config(2, 3, 2);
        cfg.link_rounds = 2;
        cfg.agg2 = Aggregation2::last;
        LinkedRnn model = LinkedRnn::create(cfg, 25);
        Rng rng(26);
        const SequenceSet seqs = tiny_sequences(1, 2, rng);
        const LinkGraph graph(1, std::vector<Edge>{});
        Tape tape;
        const ModelOutput out = model.output(tape, model.forward(tape, seqs, graph));
        const InductivePrediction ind = model.predict_inductive(seqs[0], {});
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(ind.prediction(0, j) == Approx(out.predictions(0, j)).margin(1e-12));
    }
    SECTION("one stored neighbor row, one identity round: pairwise mean") {
        ModelConfig cfg;
        cfg.input_dim = 1;
        cfg.hidden_dim = 1;
        cfg.link_rounds = 1;
        cfg.pooling = PoolingKind::last;
        cfg.agg2 = Aggregation2::last;
        cfg.activation = LinkActivation::identity;
        cfg.task = TaskKind::regression;
        LinkedRnn model = LinkedRnn::create(cfg, 21);

        const Matrix seq(1, 1, 0.4);
        Tape probe;
        const auto states =
            encode_sequence(probe, bind(probe, model.params().gru), seq, Matrix(1, 1));
        const double pooled = probe.value(states.back())(0, 0);

        const Matrix stored(1, 1, 0.9);
        const InductivePrediction ind =
            model.predict_inductive(seq, {std::vector<Matrix>{stored}});
        CHECK(ind.representation(0, 0) == Approx((pooled + 0.9) / 2.0).margin(1e-14));
    }
    SECTION("duplicated node matches its transductive prediction") {
        ModelConfig cfg = classification_config(2, 3, 3);
        cfg.link_rounds = 2;
        cfg.pooling = PoolingKind::attention;
        cfg.agg2 = Aggregation2::ffn_all;
        LinkedRnn model = LinkedRnn::create(cfg, 23);
        Rng rng(24);
        const SequenceSet seqs = tiny_sequences(5, 2, rng);
        const LinkGraph graph(5, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 3}});
        Tape tape;
        const ModelOutput out = model.output(tape, model.forward(tape, seqs, graph));

        for (std::size_t node = 0; node < 5; ++node) {
            const auto stored = LinkedRnn::neighborhood_rows(out, graph, node);
            const InductivePrediction ind = model.predict_inductive(seqs[node], stored);
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(std::abs(ind.prediction(0, j) - out.predictions(node, j)) <= 1e-9);
        }
    }
}
