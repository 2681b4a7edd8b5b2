#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "linkedrnn/errors.hpp"
#include "linkedrnn/linklayer.hpp"
#include "linkedrnn/matrix.hpp"
#include "linkedrnn/rng.hpp"
#include "linkedrnn/task.hpp"

namespace linkedrnn {

/// N variable-length event-vector sequences plus an undirected, deduplicated
/// edge list and optional per-node labels. Self-loops never appear in the
/// edge list; they are injected by LinkGraph construction only.
struct LinkedSequenceDataset {
    std::size_t event_dim = 0;
    TaskKind task = TaskKind::classification;
    SequenceSet sequences;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    bool has_labels = false;
    std::vector<int> class_labels;     // classification
    std::vector<double> value_labels;  // regression

    std::size_t size() const { return sequences.size(); }

    LinkGraph graph() const { return LinkGraph(size(), edges); }
};

namespace detail {

inline std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace detail

inline void validate_dataset(const LinkedSequenceDataset& ds) {
    if (ds.event_dim < 1) throw DataError("event dimension must be at least 1");
    if (ds.sequences.empty()) throw DataError("dataset has no sequences");
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        if (ds.sequences[i].rows() == 0 || ds.sequences[i].empty())
            throw DataError("sequence " + std::to_string(i) + " is empty");
        if (ds.sequences[i].cols() != ds.event_dim)
            throw DataError("sequence " + std::to_string(i) + " has event width " +
                            std::to_string(ds.sequences[i].cols()) + ", expected " +
                            std::to_string(ds.event_dim));
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& [a, b] : ds.edges) {
        if (a >= ds.size() || b >= ds.size())
            throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") outside node range [0," + std::to_string(ds.size()) + ")");
        if (a == b) throw DataError("self-loop on node " + std::to_string(a));
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second)
            throw DataError("duplicate edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ")");
    }
    if (ds.has_labels) {
        const std::size_t arity = ds.task == TaskKind::classification
                                      ? ds.class_labels.size()
                                      : ds.value_labels.size();
        if (arity != ds.size())
            throw DataError("label count " + std::to_string(arity) +
                            " does not match node count " + std::to_string(ds.size()));
    }
}

inline nlohmann::json dataset_to_json(const LinkedSequenceDataset& ds) {
    nlohmann::json j;
    j["d"] = ds.event_dim;
    j["task"] = task_name(ds.task);
    nlohmann::json seqs = nlohmann::json::array();
    for (const Matrix& s : ds.sequences) {
        nlohmann::json seq = nlohmann::json::array();
        for (std::size_t t = 0; t < s.rows(); ++t) {
            nlohmann::json event = nlohmann::json::array();
            for (std::size_t k = 0; k < s.cols(); ++k) event.push_back(s(t, k));
            seq.push_back(std::move(event));
        }
        seqs.push_back(std::move(seq));
    }
    j["sequences"] = std::move(seqs);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : ds.edges) edges.push_back(nlohmann::json::array({a, b}));
    j["edges"] = std::move(edges);
    if (ds.has_labels) {
        if (ds.task == TaskKind::classification)
            j["labels"] = ds.class_labels;
        else
            j["labels"] = ds.value_labels;
    }
    return j;
}

/// Parses and validates a dataset document. Edges may appear in either
/// orientation and are deduplicated to one undirected edge; hard invariant
/// violations are rejected with the offending index in the message.
inline LinkedSequenceDataset dataset_from_json(const nlohmann::json& j) {
    LinkedSequenceDataset ds;
    if (!j.contains("d") || !j["d"].is_number_unsigned())
        throw DataError("missing or invalid \"d\" field");
    ds.event_dim = j["d"].get<std::size_t>();
    if (!j.contains("task")) throw DataError("missing \"task\" field");
    ds.task = parse_task(j["task"].get<std::string>());

    if (!j.contains("sequences") || !j["sequences"].is_array())
        throw DataError("missing or invalid \"sequences\" array");
    for (const auto& seq : j["sequences"]) {
        if (!seq.is_array() || seq.empty())
            throw DataError("sequence " + std::to_string(ds.sequences.size()) +
                            " must be a nonempty array of events");
        Matrix m(seq.size(), ds.event_dim);
        std::size_t t = 0;
        for (const auto& event : seq) {
            if (!event.is_array() || event.size() != ds.event_dim)
                throw DataError("sequence " + std::to_string(ds.sequences.size()) +
                                ", event " + std::to_string(t) + ": expected " +
                                std::to_string(ds.event_dim) + " floats");
            for (std::size_t k = 0; k < ds.event_dim; ++k)
                m(t, k) = event[k].get<double>();
            ++t;
        }
        ds.sequences.push_back(std::move(m));
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> undirected;
    if (j.contains("edges")) {
        for (const auto& e : j["edges"]) {
            if (!e.is_array() || e.size() != 2)
                throw DataError("edge " + std::to_string(undirected.size()) +
                                " must be a pair [i,j]");
            const auto a = e[0].get<std::int64_t>();
            const auto b = e[1].get<std::int64_t>();
            if (a < 0 || b < 0 ||
                a >= static_cast<std::int64_t>(ds.size()) ||
                b >= static_cast<std::int64_t>(ds.size()))
                throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") outside node range [0," + std::to_string(ds.size()) +
                                ")");
            if (a == b)
                throw DataError("self-loop on node " + std::to_string(a));
            undirected.insert({static_cast<std::uint32_t>(std::min(a, b)),
                               static_cast<std::uint32_t>(std::max(a, b))});
        }
    }
    ds.edges.assign(undirected.begin(), undirected.end());

    if (j.contains("labels") && !j["labels"].is_null()) {
        ds.has_labels = true;
        if (j["labels"].size() != ds.size())
            throw DataError("label count " + std::to_string(j["labels"].size()) +
                            " does not match node count " + std::to_string(ds.size()));
        if (ds.task == TaskKind::classification)
            ds.class_labels = j["labels"].get<std::vector<int>>();
        else
            ds.value_labels = j["labels"].get<std::vector<double>>();
    }
    validate_dataset(ds);
    return ds;
}

inline LinkedSequenceDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ":" + std::to_string(detail::line_of_byte(text, e.byte)) +
                        ": " + e.what());
    }
    try {
        return dataset_from_json(j);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void save_dataset(const LinkedSequenceDataset& ds, const std::string& path) {
    validate_dataset(ds);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path);
    out << dataset_to_json(ds).dump(2) << "\n";
}

// ---- transductive split protocol ----

struct SplitSpec {
    double test_fraction = 0.30;
    double train_fraction = 0.50; // share of the non-test remainder
    std::uint64_t seed = 1;
};

struct Split {
    std::vector<std::uint32_t> train, val, test;
};

/// Seeded shuffle, then test_fraction for test and train_fraction of the
/// remainder for training; the rest is validation. Deterministic given the
/// seed; the three sets partition [0, n).
inline Split make_split(std::size_t n, const SplitSpec& spec) {
    if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0)
        throw ConfigError("test fraction must be in (0,1), got " +
                          std::to_string(spec.test_fraction));
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw ConfigError("train fraction must be in (0,1), got " +
                          std::to_string(spec.train_fraction));
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(spec.seed);
    rng.shuffle(order);

    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    const std::size_t rest = n - n_test;
    const std::size_t n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(rest)));

    Split split;
    split.test.assign(order.begin(), order.begin() + n_test);
    split.train.assign(order.begin() + n_test, order.begin() + n_test + n_train);
    split.val.assign(order.begin() + n_test + n_train, order.end());
    if (split.test.empty() || split.train.empty() || split.val.empty())
        throw DataError("too few labeled nodes (" + std::to_string(n) +
                        ") to populate train, validation and test sets");
    return split;
}

// ---- synthetic homophilous linked sequences ----

/// Stochastic-block-model links (p_in within a class, p_out across) over
/// class-conditioned linear sequence dynamics: x_{t+1} = R_c x_t + noise,
/// where R_c rotates consecutive coordinate pairs by a class-specific angle.
/// Initial events are class-independent, so with zero noise and a shared
/// rotation the sequences carry no class signal and only the links do.
/// Labels are the block memberships.
struct SyntheticSpec {
    std::size_t nodes = 300;
    std::size_t classes = 4;
    std::size_t event_dim = 4;
    double p_in = 0.05;
    double p_out = 0.005;
    std::size_t min_length = 6;
    std::size_t max_length = 12;
    double angle_min = 0.25; // class 0 rotation angle, radians per step
    double angle_max = 1.25; // class C-1 rotation angle
    double noise = 0.35;     // isotropic per-step noise level
    std::uint64_t seed = 1;

    void validate() const {
        if (nodes < classes) throw ConfigError("need at least one node per class");
        if (classes < 2) throw ConfigError("need at least 2 classes");
        if (event_dim < 1) throw ConfigError("event dimension must be at least 1");
        if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0))
            throw ConfigError("edge probabilities must satisfy 0 <= p_out < p_in <= 1, "
                              "got p_in=" + std::to_string(p_in) +
                              " p_out=" + std::to_string(p_out));
        if (min_length < 1 || max_length < min_length)
            throw ConfigError("invalid sequence length range");
    }
};

inline double synthetic_rotation_angle(const SyntheticSpec& spec, std::size_t cls) {
    if (spec.classes == 1) return spec.angle_min;
    const double step = (spec.angle_max - spec.angle_min) /
                        static_cast<double>(spec.classes - 1);
    return spec.angle_min + step * static_cast<double>(cls);
}

inline LinkedSequenceDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    LinkedSequenceDataset ds;
    ds.event_dim = spec.event_dim;
    ds.task = TaskKind::classification;
    ds.has_labels = true;

    // contiguous blocks: node i belongs to class i / block_size
    const std::size_t block_size =
        (spec.nodes + spec.classes - 1) / spec.classes;
    ds.class_labels.resize(spec.nodes);
    for (std::size_t i = 0; i < spec.nodes; ++i)
        ds.class_labels[i] = static_cast<int>(std::min(i / block_size, spec.classes - 1));

    // per-class plane rotations
    std::vector<Matrix> rotations;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const double angle = synthetic_rotation_angle(spec, c);
        Matrix r = Matrix::identity(spec.event_dim);
        for (std::size_t p = 0; p + 1 < spec.event_dim; p += 2) {
            r(p, p) = std::cos(angle);
            r(p, p + 1) = -std::sin(angle);
            r(p + 1, p) = std::sin(angle);
            r(p + 1, p + 1) = std::cos(angle);
        }
        rotations.push_back(std::move(r));
    }

    ds.sequences.reserve(spec.nodes);
    for (std::size_t i = 0; i < spec.nodes; ++i) {
        const Matrix& rot = rotations[static_cast<std::size_t>(ds.class_labels[i])];
        const std::size_t len =
            spec.min_length +
            static_cast<std::size_t>(rng.integer(spec.max_length - spec.min_length + 1));
        Matrix seq(len, spec.event_dim);
        Matrix x(spec.event_dim, 1);
        for (std::size_t k = 0; k < spec.event_dim; ++k) x(k, 0) = rng.normal();
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t k = 0; k < spec.event_dim; ++k) seq(t, k) = x(k, 0);
            x = multiply(rot, x);
            for (std::size_t k = 0; k < spec.event_dim; ++k)
                x(k, 0) += spec.noise * rng.normal();
        }
        ds.sequences.push_back(std::move(seq));
    }

    for (std::uint32_t i = 0; i < spec.nodes; ++i)
        for (std::uint32_t j = i + 1; j < spec.nodes; ++j) {
            const double p =
                ds.class_labels[i] == ds.class_labels[j] ? spec.p_in : spec.p_out;
            if (rng.uniform() < p) ds.edges.emplace_back(i, j);
        }

    validate_dataset(ds);
    return ds;
}

// ---- evaluation metrics ----

/// Micro-F1 from globally pooled confusion counts and macro-F1 as the
/// unweighted mean of per-class F1. A class absent from both the truth and
/// the predictions contributes zero to the macro mean.
inline std::pair<double, double> micro_macro_f1(std::span<const int> y_true,
                                                std::span<const int> y_pred,
                                                std::size_t classes) {
    if (y_true.size() != y_pred.size())
        throw DimensionError("micro_macro_f1: " + std::to_string(y_true.size()) +
                             " labels vs " + std::to_string(y_pred.size()) +
                             " predictions");
    std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || static_cast<std::size_t>(t) >= classes || p < 0 ||
            static_cast<std::size_t>(p) >= classes)
            throw DomainError("label outside [0," + std::to_string(classes) + ") at index " +
                              std::to_string(i));
        if (t == p)
            ++tp[static_cast<std::size_t>(t)];
        else {
            ++fp[static_cast<std::size_t>(p)];
            ++fn[static_cast<std::size_t>(t)];
        }
    }
    double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0, macro = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        tp_all += static_cast<double>(tp[c]);
        fp_all += static_cast<double>(fp[c]);
        fn_all += static_cast<double>(fn[c]);
        const double denom = 2.0 * static_cast<double>(tp[c]) +
                             static_cast<double>(fp[c]) + static_cast<double>(fn[c]);
        macro += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    macro /= static_cast<double>(classes);
    const double micro_denom = 2.0 * tp_all + fp_all + fn_all;
    const double micro = micro_denom > 0.0 ? 2.0 * tp_all / micro_denom : 0.0;
    return {micro, macro};
}

inline double mean_squared_error(std::span<const double> y_true,
                                 std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size())
        throw DimensionError("mse: " + std::to_string(y_true.size()) + " labels vs " +
                             std::to_string(y_pred.size()) + " predictions");
    if (y_true.empty()) throw DomainError("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_true[i] - y_pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y_true.size());
}

} // namespace linkedrnn
