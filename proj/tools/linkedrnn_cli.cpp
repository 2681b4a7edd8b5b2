// linkedrnn command-line tool: synthetic data generation, training,
// evaluation, experiment sweeps and gradient checks.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "linkedrnn/checkpoint.hpp"
#include "linkedrnn/data.hpp"
#include "linkedrnn/model.hpp"
#include "linkedrnn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace linkedrnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
    if (const fs::path dir = fs::path(path).parent_path(); !dir.empty())
        fs::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

/// Content hash of a file the way git hashes blobs:
/// sha1("blob <size>\0" + bytes), hex encoded.
std::string git_blob_sha1(const std::string& bytes) {
    std::string header = "blob " + std::to_string(bytes.size());
    header.push_back('\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string hash_file(const std::string& path) { return git_blob_sha1(read_file_bytes(path)); }

// ---- flag bundles ----

struct ModelFlags {
    std::size_t hidden = 100;
    std::size_t layers = 2;
    std::string agg1 = "attention";
    std::string agg2 = "ffn_all";
    std::string activation = "tanh";
    std::string baseline; // "", "rnn" or "link"

    void attach(CLI::App* cmd) {
        cmd->add_option("--hidden", hidden, "Hidden representation width")
            ->capture_default_str();
        cmd->add_option("--layers", layers, "Link-layer propagation rounds M")
            ->capture_default_str();
        cmd->add_option("--agg1", agg1, "Sequence pooling: last | attn")
            ->capture_default_str();
        cmd->add_option("--agg2", agg2, "Layer aggregation: last | ffn2 | ffnall")
            ->capture_default_str();
        cmd->add_option("--activation", activation,
                        "Link-layer activation: identity | tanh | relu")
            ->capture_default_str();
        cmd->add_option("--baseline", baseline,
                        "Ablation baseline: rnn (no propagation) | link (no RNN encoder)");
    }

    /// Resolves flags against the dataset. Baselines rewrite the variant
    /// fields, so combining them with explicit variant flags is rejected.
    ModelConfig resolve(const CLI::App* cmd, const LinkedSequenceDataset& ds) const {
        ModelConfig cfg;
        cfg.input_dim = ds.event_dim;
        cfg.hidden_dim = hidden;
        cfg.link_rounds = layers;
        cfg.pooling = parse_pooling(agg1);
        cfg.agg2 = parse_aggregation2(agg2);
        cfg.activation = parse_activation(activation);
        cfg.task = ds.task;
        if (ds.task == TaskKind::classification) cfg.classes = num_classes(ds);

        if (baseline == "rnn") {
            if (cmd->count("--layers") || cmd->count("--agg2"))
                throw CLI::ValidationError(
                    "--baseline rnn conflicts with --layers/--agg2 (it fixes M=0, "
                    "aggregation2=last)");
            cfg.link_rounds = 0;
            cfg.agg2 = Aggregation2::last;
        } else if (baseline == "link") {
            if (cmd->count("--agg1"))
                throw CLI::ValidationError(
                    "--baseline link conflicts with --agg1 (it removes the RNN encoder)");
            cfg.encoder = EncoderKind::mean_of_events;
        } else if (!baseline.empty()) {
            throw CLI::ValidationError("unknown --baseline \"" + baseline +
                                       "\" (expected rnn or link)");
        }
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::size_t epochs = 200;
    std::size_t patience = 20;
    double clip = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--optimizer", optimizer, "sgd | adam")->capture_default_str();
        cmd->add_option("--lr", lr, "Learning rate")->capture_default_str();
        cmd->add_option("--epochs", epochs, "Maximum full-batch epochs")
            ->capture_default_str();
        cmd->add_option("--patience", patience, "Early-stopping patience")
            ->capture_default_str();
        cmd->add_option("--clip", clip, "Global gradient-norm clip (0 = off)")
            ->capture_default_str();
    }

    TrainConfig resolve(std::uint64_t seed) const {
        TrainConfig cfg;
        if (optimizer == "sgd")
            cfg.optimizer = Optimizer::sgd;
        else if (optimizer == "adam")
            cfg.optimizer = Optimizer::adam;
        else
            throw CLI::ValidationError("unknown --optimizer \"" + optimizer + "\"");
        cfg.learning_rate = lr;
        cfg.max_epochs = epochs;
        cfg.patience = patience;
        cfg.clip_norm = clip;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }

    json to_json() const {
        return json{{"optimizer", optimizer}, {"lr", lr},       {"epochs", epochs},
                    {"patience", patience},   {"clip", clip}};
    }
};

struct SplitFlags {
    double test_frac = 0.30;
    unsigned train_frac = 50; // percent of the non-test remainder

    void attach(CLI::App* cmd) {
        cmd->add_option("--test-frac", test_frac, "Held-out test fraction")
            ->capture_default_str();
        cmd->add_option("--train-frac", train_frac,
                        "Training percentage of the non-test remainder")
            ->capture_default_str();
    }

    SplitSpec resolve(std::uint64_t seed) const {
        SplitSpec spec;
        spec.test_fraction = test_frac;
        spec.train_fraction = static_cast<double>(train_frac) / 100.0;
        spec.seed = seed;
        return spec;
    }

    json to_json() const {
        return json{{"test_frac", test_frac}, {"train_frac", train_frac}};
    }
};

void write_manifest(const std::string& dir, json manifest, double wall_seconds) {
    manifest["wall_seconds"] = wall_seconds;
    write_text((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

// one row of seed-level metrics for the sweep CSV
std::string csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct RunOutcome {
    EvalMetrics metrics;
    TrainReport report;
};

RunOutcome run_training(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                        const LinkedSequenceDataset& ds, const SplitSpec& split_spec,
                        std::uint64_t init_seed, ModelParams* trained = nullptr) {
    const Split split = make_split(ds.size(), split_spec);
    LinkedRnn model = LinkedRnn::create(model_cfg, init_seed);
    RunOutcome outcome;
    outcome.report = train(model, ds, split, train_cfg);
    outcome.metrics = outcome.report.test_metrics;
    if (trained) *trained = model.params();
    return outcome;
}

// ---- subcommands ----

int cmd_generate(const SyntheticSpec& spec, const std::string& out_path) {
    const auto started = std::chrono::steady_clock::now();
    const LinkedSequenceDataset ds = generate_synthetic(spec);
    save_dataset(ds, out_path);

    json manifest{{"command", "generate"},
                  {"seed", spec.seed},
                  {"config",
                   {{"nodes", spec.nodes},
                    {"classes", spec.classes},
                    {"dim", spec.event_dim},
                    {"p_in", spec.p_in},
                    {"p_out", spec.p_out},
                    {"len_min", spec.min_length},
                    {"len_max", spec.max_length},
                    {"angle_min", spec.angle_min},
                    {"angle_max", spec.angle_max},
                    {"noise", spec.noise}}},
                  {"outputs", {{"dataset", out_path}, {"dataset_sha1", hash_file(out_path)}}}};
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");

    std::cout << "wrote " << out_path << " (" << ds.size() << " nodes, " << ds.edges.size()
              << " edges)\n";
    return kExitOk;
}

int cmd_train(const CLI::App* cmd, const std::string& data_path, const ModelFlags& mf,
              const TrainFlags& tf, const SplitFlags& sf, std::uint64_t seed,
              const std::string& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    const LinkedSequenceDataset ds = load_dataset(data_path);
    const ModelConfig model_cfg = mf.resolve(cmd, ds);
    const TrainConfig train_cfg = tf.resolve(seed);
    const SplitSpec split_spec = sf.resolve(seed);

    ModelParams trained = ModelParams::init(model_cfg, 0);
    const RunOutcome outcome = run_training(model_cfg, train_cfg, ds, split_spec,
                                            derive_seed(seed, 17), &trained);

    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.json").string();
    const std::string report_path = (fs::path(out_dir) / "report.json").string();
    const std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    save_checkpoint(model_cfg, trained, ckpt_path);
    write_text(report_path, report_to_json(outcome.report).dump(2) + "\n");
    write_text(metrics_path, metrics_to_json(outcome.metrics).dump(2) + "\n");

    json manifest{{"command", "train"},
                  {"seed", seed},
                  {"config",
                   {{"model", config_to_json(model_cfg)},
                    {"train", tf.to_json()},
                    {"split", sf.to_json()}}},
                  {"inputs", {{"dataset", data_path}, {"dataset_sha1", hash_file(data_path)}}},
                  {"outputs",
                   {{"checkpoint", ckpt_path}, {"report", report_path}, {"metrics", metrics_path}}}};
    write_manifest(out_dir, std::move(manifest),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                       .count());

    std::cout << "best epoch " << outcome.report.best_epoch << "/"
              << outcome.report.epochs_run() << ", test metrics "
              << metrics_to_json(outcome.metrics).dump() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& subset, const SplitFlags& sf, std::uint64_t seed,
             const std::string& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    const LinkedSequenceDataset ds = load_dataset(data_path);
    LinkedRnn model = load_checkpoint(ckpt_path);
    if (model.config().input_dim != ds.event_dim)
        throw DataError("checkpoint expects event width " +
                        std::to_string(model.config().input_dim) + ", dataset has " +
                        std::to_string(ds.event_dim));
    if (model.config().task != ds.task)
        throw DataError("checkpoint task does not match dataset task");

    std::vector<std::uint32_t> indices;
    if (subset == "all") {
        indices.resize(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) indices[i] = static_cast<std::uint32_t>(i);
    } else {
        const Split split = make_split(ds.size(), sf.resolve(seed));
        if (subset == "test")
            indices = split.test;
        else if (subset == "train")
            indices = split.train;
        else if (subset == "val")
            indices = split.val;
        else
            throw CLI::ValidationError("unknown --split \"" + subset + "\"");
    }

    Tape tape;
    const ForwardPass pass = model.forward(tape, ds.sequences, ds.graph());
    const EvalMetrics metrics =
        evaluate_predictions(ds, tape.value(pass.prediction), indices);
    std::cout << metrics_to_json(metrics).dump(2) << "\n";

    fs::create_directories(out_dir);
    const std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    write_text(metrics_path, metrics_to_json(metrics).dump(2) + "\n");
    json manifest{{"command", "eval"},
                  {"seed", seed},
                  {"config", {{"split", subset}, {"split_flags", sf.to_json()}}},
                  {"inputs",
                   {{"dataset", data_path},
                    {"dataset_sha1", hash_file(data_path)},
                    {"checkpoint", ckpt_path}}},
                  {"outputs", {{"metrics", metrics_path}}}};
    write_manifest(out_dir, std::move(manifest),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                       .count());
    return kExitOk;
}

struct SweepRow {
    std::string config;
    std::uint64_t seed;
    EvalMetrics metrics;
};

int cmd_sweep(const CLI::App* cmd, const std::string& data_path, const std::string& axis,
              std::size_t seeds, std::size_t max_layers, const ModelFlags& mf,
              const TrainFlags& tf, const SplitFlags& sf, std::uint64_t base_seed,
              const std::string& out_path) {
    const auto started = std::chrono::steady_clock::now();
    const LinkedSequenceDataset ds = load_dataset(data_path);
    std::vector<SweepRow> rows;

    const auto run_one = [&](const ModelConfig& cfg, const SplitSpec& split_spec,
                             std::uint64_t seed, const std::string& label) {
        TrainConfig train_cfg = tf.resolve(seed);
        const RunOutcome outcome =
            run_training(cfg, train_cfg, ds, split_spec, derive_seed(seed, 17));
        rows.push_back({label, seed, outcome.metrics});
    };

    if (axis == "layers") {
        for (std::size_t m = 0; m <= max_layers; ++m) {
            ModelFlags flags = mf;
            flags.layers = m;
            const ModelConfig cfg = flags.resolve(cmd, ds);
            for (std::uint64_t s = 0; s < seeds; ++s)
                run_one(cfg, sf.resolve(base_seed + s), base_seed + s, std::to_string(m));
        }
    } else if (axis == "aggregations") {
        const std::pair<const char*, const char*> variants[6] = {
            {"last", "last"},      {"last", "ffn2"},      {"last", "ffnall"},
            {"attention", "last"}, {"attention", "ffn2"}, {"attention", "ffnall"}};
        const char* names[6] = {"LinkedRNN11", "LinkedRNN12", "LinkedRNN13",
                                "LinkedRNN21", "LinkedRNN22", "LinkedRNN23"};
        for (std::size_t v = 0; v < 6; ++v) {
            ModelFlags flags = mf;
            flags.agg1 = variants[v].first;
            flags.agg2 = variants[v].second;
            const ModelConfig cfg = flags.resolve(cmd, ds);
            for (std::uint64_t s = 0; s < seeds; ++s)
                run_one(cfg, sf.resolve(base_seed + s), base_seed + s, names[v]);
        }
    } else if (axis == "train-frac") {
        const ModelConfig cfg = mf.resolve(cmd, ds);
        for (unsigned frac : {10u, 30u, 50u, 70u}) {
            SplitFlags flags = sf;
            flags.train_frac = frac;
            for (std::uint64_t s = 0; s < seeds; ++s)
                run_one(cfg, flags.resolve(base_seed + s), base_seed + s,
                        std::to_string(frac));
        }
    } else {
        throw CLI::ValidationError("unknown --axis \"" + axis +
                                   "\" (expected layers, aggregations or train-frac)");
    }

    std::string csv = ds.task == TaskKind::classification
                          ? "axis,config,seed,micro_f1,macro_f1\n"
                          : "axis,config,seed,mse\n";
    for (const SweepRow& row : rows) {
        csv += axis + "," + row.config + "," + std::to_string(row.seed);
        if (ds.task == TaskKind::classification)
            csv += "," + csv_number(row.metrics.micro_f1) + "," +
                   csv_number(row.metrics.macro_f1);
        else
            csv += "," + csv_number(row.metrics.mse);
        csv += "\n";
    }
    write_text(out_path, csv);

    json manifest{{"command", "sweep"},
                  {"seed", base_seed},
                  {"config",
                   {{"axis", axis},
                    {"seeds", seeds},
                    {"max_layers", max_layers},
                    {"train", tf.to_json()},
                    {"split", sf.to_json()}}},
                  {"inputs", {{"dataset", data_path}, {"dataset_sha1", hash_file(data_path)}}},
                  {"outputs", {{"csv", out_path}}}};
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_text(out_path + ".manifest.json", manifest.dump(2) + "\n");

    std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
    return kExitOk;
}

int cmd_gradcheck(const CLI::App* cmd, const ModelFlags& mf, const std::string& task_name_str,
                  double tolerance, double epsilon, std::uint64_t seed,
                  const std::string& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    const TaskKind task = parse_task(task_name_str);
    const LinkedSequenceDataset ds = tiny_gradcheck_dataset(task, derive_seed(seed, 3));
    ModelFlags flags = mf;
    if (!cmd->count("--hidden")) flags.hidden = 3;
    const ModelConfig cfg = flags.resolve(cmd, ds);
    const std::vector<std::uint32_t> labeled{0, 1, 2};

    const GradCheckReport report =
        grad_check(cfg, ds, labeled, tolerance, epsilon, derive_seed(seed, 17));

    json params = json::array();
    for (const GradCheckEntry& e : report.params) {
        std::printf("  %-18s max rel err %.3e  (%zu entries)\n", e.name.c_str(),
                    e.max_rel_error, e.entries_checked);
        params.push_back({{"name", e.name},
                          {"max_rel_error", e.max_rel_error},
                          {"entries", e.entries_checked}});
    }
    std::printf("%s: max rel err %.3e vs tolerance %.3e\n",
                report.passed ? "PASS" : "FAIL", report.max_rel_error, tolerance);

    fs::create_directories(out_dir);
    const std::string report_path = (fs::path(out_dir) / "gradcheck.json").string();
    write_text(report_path, json{{"passed", report.passed},
                                 {"max_rel_error", report.max_rel_error},
                                 {"tolerance", tolerance},
                                 {"params", params}}
                                    .dump(2) +
                                "\n");
    json manifest{{"command", "gradcheck"},
                  {"seed", seed},
                  {"config",
                   {{"model", config_to_json(cfg)},
                    {"tolerance", tolerance},
                    {"epsilon", epsilon},
                    {"task", task_name_str}}},
                  {"outputs", {{"report", report_path}}}};
    write_manifest(out_dir, std::move(manifest),
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                       .count());
    return report.passed ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LinkedRNN: recurrent sequence learning over linked sequences"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
    SyntheticSpec gen_spec;
    std::string gen_out = "dataset.json";
    generate->add_option("--nodes", gen_spec.nodes)->capture_default_str();
    generate->add_option("--classes", gen_spec.classes)->capture_default_str();
    generate->add_option("--dim", gen_spec.event_dim, "Event vector width")
        ->capture_default_str();
    generate->add_option("--p-in", gen_spec.p_in, "Intra-class edge probability")
        ->capture_default_str();
    generate->add_option("--p-out", gen_spec.p_out, "Inter-class edge probability")
        ->capture_default_str();
    generate->add_option("--len-min", gen_spec.min_length)->capture_default_str();
    generate->add_option("--len-max", gen_spec.max_length)->capture_default_str();
    generate->add_option("--angle-min", gen_spec.angle_min, "Smallest class rotation angle")
        ->capture_default_str();
    generate->add_option("--angle-max", gen_spec.angle_max, "Largest class rotation angle")
        ->capture_default_str();
    generate->add_option("--noise", gen_spec.noise)->capture_default_str();
    generate->add_option("--seed", gen_spec.seed)->capture_default_str();
    generate->add_option("--out", gen_out)->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
    std::string train_data, train_out = "runs/train";
    std::uint64_t train_seed = 1;
    ModelFlags train_mf;
    TrainFlags train_tf;
    SplitFlags train_sf;
    train_cmd->add_option("--data", train_data, "Dataset JSON")->required();
    train_mf.attach(train_cmd);
    train_tf.attach(train_cmd);
    train_sf.attach(train_cmd);
    train_cmd->add_option("--seed", train_seed)->capture_default_str();
    train_cmd->add_option("--out-dir", train_out)->capture_default_str();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_out = "runs/eval";
    std::uint64_t eval_seed = 1;
    SplitFlags eval_sf;
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--data", eval_data)->required();
    eval_cmd->add_option("--split", eval_split, "test | train | val | all")
        ->capture_default_str();
    eval_sf.attach(eval_cmd);
    eval_cmd->add_option("--seed", eval_seed)->capture_default_str();
    eval_cmd->add_option("--out-dir", eval_out)->capture_default_str();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment grid, emit CSV");
    std::string sweep_data, sweep_axis, sweep_out = "sweep.csv";
    std::size_t sweep_seeds = 5, sweep_max_layers = 4;
    std::uint64_t sweep_seed = 1;
    ModelFlags sweep_mf;
    TrainFlags sweep_tf;
    SplitFlags sweep_sf;
    sweep_cmd->add_option("--data", sweep_data)->required();
    sweep_cmd->add_option("--axis", sweep_axis, "layers | aggregations | train-frac")
        ->required();
    sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds per configuration")
        ->capture_default_str();
    sweep_cmd->add_option("--max-layers", sweep_max_layers, "Upper end of the layers axis")
        ->capture_default_str();
    sweep_mf.attach(sweep_cmd);
    sweep_tf.attach(sweep_cmd);
    sweep_sf.attach(sweep_cmd);
    sweep_cmd->add_option("--seed", sweep_seed, "Base seed")->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out)->capture_default_str();

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck",
                                      "Verify analytic gradients on a tiny instance");
    std::string gc_task = "classification", gc_out = "runs/gradcheck";
    double gc_tolerance = 1e-5, gc_epsilon = 1e-5;
    std::uint64_t gc_seed = 1;
    ModelFlags gc_mf;
    gc_cmd->add_option("--task", gc_task, "classification | regression")
        ->capture_default_str();
    gc_mf.attach(gc_cmd);
    gc_cmd->add_option("--tolerance", gc_tolerance)->capture_default_str();
    gc_cmd->add_option("--epsilon", gc_epsilon, "Finite-difference step")
        ->capture_default_str();
    gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
    gc_cmd->add_option("--out-dir", gc_out)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen_spec, gen_out);
        if (train_cmd->parsed())
            return cmd_train(train_cmd, train_data, train_mf, train_tf, train_sf,
                             train_seed, train_out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_data, eval_split, eval_sf, eval_seed, eval_out);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_cmd, sweep_data, sweep_axis, sweep_seeds,
                             sweep_max_layers, sweep_mf, sweep_tf, sweep_sf, sweep_seed,
                             sweep_out);
        if (gc_cmd->parsed())
            return cmd_gradcheck(gc_cmd, gc_mf, gc_task, gc_tolerance, gc_epsilon, gc_seed,
                                 gc_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
