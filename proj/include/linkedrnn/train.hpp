#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "linkedrnn/data.hpp"
#include "linkedrnn/errors.hpp"
#include "linkedrnn/model.hpp"
#include "linkedrnn/rng.hpp"

namespace linkedrnn {

enum class Optimizer { sgd, adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::uint64_t seed = 1;
    double clip_norm = 0.0; // global-norm gradient clip; 0 disables

    void validate() const {
        if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
        if (patience < 1) throw ConfigError("patience must be at least 1");
        if (max_epochs < 1) throw ConfigError("max epochs must be at least 1");
    }
};

struct EvalMetrics {
    TaskKind task = TaskKind::classification;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double mse = 0.0;

    /// Validation score oriented so that higher is always better.
    double score() const {
        return task == TaskKind::classification ? micro_f1 : -mse;
    }
};

inline nlohmann::json metrics_to_json(const EvalMetrics& m) {
    if (m.task == TaskKind::classification)
        return nlohmann::json{{"micro_f1", m.micro_f1}, {"macro_f1", m.macro_f1}};
    return nlohmann::json{{"mse", m.mse}};
}

inline std::size_t num_classes(const LinkedSequenceDataset& ds) {
    int top = -1;
    for (int y : ds.class_labels) top = std::max(top, y);
    return static_cast<std::size_t>(top + 1);
}

/// Metrics of the given predictions restricted to `indices`.
inline EvalMetrics evaluate_predictions(const LinkedSequenceDataset& ds,
                                        const Matrix& predictions,
                                        std::span<const std::uint32_t> indices) {
    if (!ds.has_labels) throw DomainError("evaluate: dataset has no labels");
    EvalMetrics metrics;
    metrics.task = ds.task;
    if (ds.task == TaskKind::classification) {
        const std::vector<int> all = predict_classes(predictions);
        std::vector<int> y_true, y_pred;
        y_true.reserve(indices.size());
        for (std::uint32_t i : indices) {
            y_true.push_back(ds.class_labels[i]);
            y_pred.push_back(all[i]);
        }
        const auto [micro, macro] = micro_macro_f1(y_true, y_pred, num_classes(ds));
        metrics.micro_f1 = micro;
        metrics.macro_f1 = macro;
    } else {
        std::vector<double> y_true, y_pred;
        y_true.reserve(indices.size());
        for (std::uint32_t i : indices) {
            y_true.push_back(ds.value_labels[i]);
            y_pred.push_back(predictions(i, 0));
        }
        metrics.mse = mean_squared_error(y_true, y_pred);
    }
    return metrics;
}

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_metric; // validation score per epoch (higher = better)
    std::size_t best_epoch = 0;     // 1-based
    EvalMetrics test_metrics;
    double wall_seconds = 0.0;

    std::size_t epochs_run() const { return train_loss.size(); }
};

/// Serialized report. Wall-clock time is deliberately left out so repeated
/// runs with the same seed produce byte-identical files; timing travels in
/// the run manifest instead.
inline nlohmann::json report_to_json(const TrainReport& r) {
    return nlohmann::json{{"train_loss", r.train_loss},
                          {"val_metric", r.val_metric},
                          {"best_epoch", r.best_epoch},
                          {"test_metrics", metrics_to_json(r.test_metrics)}};
}

namespace detail {

class OptimizerState {
public:
    OptimizerState(const TrainConfig& cfg, const ParamRegistry& registry) : cfg_(cfg) {
        if (cfg.optimizer == Optimizer::adam) {
            for (const ParamRef& p : registry) {
                m_.emplace_back(p.value->rows(), p.value->cols());
                v_.emplace_back(p.value->rows(), p.value->cols());
            }
        }
    }

    void apply(const ParamRegistry& registry, const std::vector<Matrix>& grads) {
        if (cfg_.optimizer == Optimizer::sgd) {
            for (std::size_t k = 0; k < registry.size(); ++k)
                axpy(*registry[k].value, -cfg_.learning_rate, grads[k]);
            return;
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t k = 0; k < registry.size(); ++k) {
            Matrix& theta = *registry[k].value;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double g = grads[k].flat(i);
                double& m = m_[k].flat(i);
                double& v = v_[k].flat(i);
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
                theta.flat(i) -=
                    cfg_.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg_.epsilon);
            }
        }
    }

private:
    TrainConfig cfg_;
    std::vector<Matrix> m_, v_;
    std::size_t step_ = 0;
};

inline void clip_gradients(std::vector<Matrix>& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const Matrix& g : grads)
        for (std::size_t i = 0; i < g.size(); ++i) sq += g.flat(i) * g.flat(i);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (Matrix& g : grads)
        for (std::size_t i = 0; i < g.size(); ++i) g.flat(i) *= s;
}

} // namespace detail

/// Full-batch training with validation-based model selection.
///
/// Each epoch runs one forward over all nodes, takes the loss on the train
/// indices only, and applies one optimizer step. The validation score is
/// read from the same forward pass (i.e. it rates the parameters entering
/// the epoch), and the parameters are restored to the best-validation epoch
/// on exit. Deterministic given the seed.
inline TrainReport train(LinkedRnn& model, const LinkedSequenceDataset& ds,
                         const Split& split, const TrainConfig& cfg) {
    cfg.validate();
    if (!ds.has_labels) throw DomainError("train: dataset has no labels");
    const auto started = std::chrono::steady_clock::now();
    const LinkGraph graph = ds.graph();
    ParamRegistry registry = model.registry();
    detail::OptimizerState optimizer(cfg, registry);

    TrainReport report;
    double best_score = 0.0;
    std::vector<Matrix> best_params;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Tape tape;
        ForwardPass pass = model.forward(tape, ds.sequences, graph);
        const Value loss =
            ds.task == TaskKind::classification
                ? model.loss_classification(tape, pass, ds.class_labels, split.train)
                : model.loss_regression(tape, pass, ds.value_labels, split.train);
        const double loss_value = tape.value(loss)(0, 0);
        if (!std::isfinite(loss_value))
            throw NumericError("non-finite training loss at epoch " +
                               std::to_string(epoch));
        const EvalMetrics val =
            evaluate_predictions(ds, tape.value(pass.prediction), split.val);

        report.train_loss.push_back(loss_value);
        report.val_metric.push_back(val.score());

        if (best_params.empty() || val.score() > best_score) {
            best_score = val.score();
            report.best_epoch = epoch;
            best_params.clear();
            for (const ParamRef& p : registry) best_params.push_back(*p.value);
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;

        tape.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(registry.size());
        for (const auto& binding : tape.params()) grads.push_back(tape.grad(binding.node));
        if (grads.size() != registry.size())
            throw ContractError("tape bindings do not match the parameter registry");
        detail::clip_gradients(grads, cfg.clip_norm);
        optimizer.apply(registry, grads);
    }

    for (std::size_t k = 0; k < registry.size(); ++k) *registry[k].value = best_params[k];

    {
        Tape tape;
        ForwardPass pass = model.forward(tape, ds.sequences, graph);
        report.test_metrics =
            evaluate_predictions(ds, tape.value(pass.prediction), split.test);
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

// ---- gradient verification harness ----

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> params;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares backward() against central finite differences for every
/// parameter of a freshly initialized model on the given (tiny) dataset.
/// Parameters with at most 64 entries are checked exhaustively, larger ones
/// on a seeded sample of 24 entries.
inline GradCheckReport grad_check(const ModelConfig& cfg, const LinkedSequenceDataset& ds,
                                  std::span<const std::uint32_t> labeled, double tolerance,
                                  double epsilon = 1e-5, std::uint64_t seed = 7) {
    LinkedRnn model = LinkedRnn::create(cfg, seed);
    const LinkGraph graph = ds.graph();
    ParamRegistry registry = model.registry();

    const auto loss_value = [&]() {
        Tape tape;
        ForwardPass pass = model.forward(tape, ds.sequences, graph);
        const Value loss =
            cfg.task == TaskKind::classification
                ? model.loss_classification(tape, pass, ds.class_labels, labeled)
                : model.loss_regression(tape, pass, ds.value_labels, labeled);
        return tape.value(loss)(0, 0);
    };

    // analytic gradients from one backward pass
    std::vector<Matrix> analytic;
    {
        Tape tape;
        ForwardPass pass = model.forward(tape, ds.sequences, graph);
        const Value loss =
            cfg.task == TaskKind::classification
                ? model.loss_classification(tape, pass, ds.class_labels, labeled)
                : model.loss_regression(tape, pass, ds.value_labels, labeled);
        tape.backward(loss);
        for (const auto& binding : tape.params()) analytic.push_back(tape.grad(binding.node));
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    Rng sampler(derive_seed(seed, 1));
    for (std::size_t k = 0; k < registry.size(); ++k) {
        Matrix& theta = *registry[k].value;
        std::vector<std::size_t> picks;
        if (theta.size() <= 64) {
            picks.resize(theta.size());
            for (std::size_t i = 0; i < theta.size(); ++i) picks[i] = i;
        } else {
            std::set<std::size_t> chosen;
            while (chosen.size() < 24)
                chosen.insert(static_cast<std::size_t>(sampler.integer(theta.size())));
            picks.assign(chosen.begin(), chosen.end());
        }
        GradCheckEntry entry{registry[k].name, 0.0, picks.size()};
        for (std::size_t i : picks) {
            const double saved = theta.flat(i);
            theta.flat(i) = saved + epsilon;
            const double up = loss_value();
            theta.flat(i) = saved - epsilon;
            const double down = loss_value();
            theta.flat(i) = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            entry.max_rel_error =
                std::max(entry.max_rel_error, relative_error(analytic[k].flat(i), numeric));
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.params.push_back(std::move(entry));
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

/// Built-in 3-node instance for command-line gradient checks: a path graph
/// with short random sequences and one label per node. Event magnitudes are
/// kept large enough that no gradient entry sits near the central-difference
/// noise floor, which would swamp the relative-error comparison.
inline LinkedSequenceDataset tiny_gradcheck_dataset(TaskKind task, std::uint64_t seed = 11) {
    Rng rng(seed);
    LinkedSequenceDataset ds;
    ds.event_dim = 2;
    ds.task = task;
    ds.has_labels = true;
    const std::size_t lengths[3] = {3, 4, 4};
    for (std::size_t i = 0; i < 3; ++i) {
        Matrix seq(lengths[i], ds.event_dim);
        for (std::size_t t = 0; t < seq.rows(); ++t)
            for (std::size_t j = 0; j < seq.cols(); ++j) {
                const double magnitude = rng.uniform(0.8, 2.2);
                seq(t, j) = rng.uniform() < 0.5 ? -magnitude : magnitude;
            }
        ds.sequences.push_back(std::move(seq));
    }
    ds.edges = {{0, 1}, {1, 2}};
    if (task == TaskKind::classification)
        ds.class_labels = {0, 1, 2};
    else
        ds.value_labels = {0.9, -1.1, 1.6};
    return ds;
}

} // namespace linkedrnn
