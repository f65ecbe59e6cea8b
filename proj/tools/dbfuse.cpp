#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dbfuse/config.hpp"
#include "dbfuse/errors.hpp"
#include "dbfuse/json_conv.hpp"
#include "dbfuse/metrics.hpp"
#include "dbfuse/pipeline.hpp"
#include "dbfuse/plots.hpp"

namespace fs = std::filesystem;
using namespace dbfuse;

namespace {

// Exit code taxonomy: 0 success, 2 config/usage, 3 data, 4 training, 5 evaluation.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kTrainingError = 4;
constexpr int kEvalError = 5;

int run_synth(int n, int side, uint64_t seed, double noise, const std::string& out_dir) {
    write_synthetic_dataset(out_dir, n, side, seed, noise);
    std::cout << "wrote synthetic dataset (" << 3 * n << " images) to " << out_dir << "\n";
    return kOk;
}

RunConfig load_cli_config(const std::string& config_path, const std::vector<std::string>& sets,
                          const std::optional<uint64_t>& seed) {
    RunConfig cfg = config_path.empty() ? run_config_from_json(nlohmann::json::object(), sets)
                                        : load_run_config(config_path, sets);
    if (seed) {
        cfg.seed = *seed;
        cfg.train.seed = *seed;
    }
    return cfg;
}

LabeledDataset ingest_for_config(const RunConfig& cfg) {
    if (cfg.data.root.empty()) {
        throw DataError("no data.root configured; point data.root at an image-folder dataset");
    }
    std::optional<std::vector<std::string>> names;
    if (!cfg.data.class_names.empty()) names = cfg.data.class_names;
    return ingest_dataset(cfg.data.root, names);
}

int run_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::optional<uint64_t>& seed, bool ablation) {
    RunConfig cfg = load_cli_config(config_path, sets, seed);
    LabeledDataset ds = ingest_for_config(cfg);
    if (ablation) {
        AblationRun run = run_ablation(cfg, ds);
        std::cout << "ablation report written to " << cfg.output.dir << "\n";
        for (const auto& rep : run.reports) {
            std::cout << "  " << rep.model_name << ": test accuracy "
                      << static_cast<double>([&] {
                             long long diag = 0;
                             for (int c = 0; c < rep.cm.num_classes(); ++c)
                                 diag += rep.cm.counts[c][c];
                             return diag;
                         }()) / rep.cm.total()
                      << "\n";
        }
    } else {
        TrainRun run = run_training(cfg, ds);
        const auto& last = run.result.history.records.back();
        std::cout << "trained " << cfg.train.epochs << " epochs; final val accuracy "
                  << last.val_accuracy << "; outputs in " << cfg.output.dir << "\n";
    }
    return kOk;
}

int run_evaluate(const std::string& checkpoint_dir, const std::string& data_root,
                 std::optional<double> train_fraction, std::optional<uint64_t> seed,
                 int batch_size, const std::string& out_dir,
                 const std::vector<std::string>& formats) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_dir);
    const auto& model_classes = ckpt.model->class_names();

    // The dataset's class directories must agree with the manifest.
    std::vector<std::string> dirs;
    if (!fs::is_directory(data_root)) {
        throw DataError("dataset root is not a directory: " + data_root);
    }
    for (const auto& entry : fs::directory_iterator(data_root)) {
        if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<std::string> sorted_classes = model_classes;
    std::sort(sorted_classes.begin(), sorted_classes.end());
    if (dirs != sorted_classes) {
        std::string got, expect;
        for (const auto& n : dirs) got += n + " ";
        for (const auto& n : model_classes) expect += n + " ";
        throw EvalError("dataset classes [" + got + "] do not match checkpoint classes [" +
                        expect + "]");
    }

    LabeledDataset ds = ingest_dataset(data_root, model_classes);
    LabeledDataset eval_set = ds;
    if (train_fraction) {
        DataSplit split = stratified_split(ds, *train_fraction, seed.value_or(0));
        eval_set = split.test;
    }

    MetricsReport rep = evaluate_model(*ckpt.model, eval_set, batch_size, "model");
    emit_evaluation_outputs({rep}, out_dir, formats);
    std::cout << "evaluated " << eval_set.samples.size() << " images; reports in " << out_dir
              << "\n";
    return kOk;
}

int run_predict(const std::string& checkpoint_dir, const std::string& input,
                const std::string& out_path) {
    LoadedCheckpoint ckpt = load_checkpoint(checkpoint_dir);
    std::vector<std::string> files;
    if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input)) {
            if (entry.is_regular_file()) files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(input);
    }
    if (files.empty()) {
        throw DataError("no input files under " + input);
    }

    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        out_file.open(out_path);
        if (!out_file) throw DataError("cannot write " + out_path);
        out = &out_file;
    }

    const int side = ckpt.model->input_side();
    int errors = 0;
    for (const auto& file : files) {
        nlohmann::json line;
        line["file"] = file;
        try {
            ImageSample s;
            s.pixels = load_image(file);
            s.source_id = file;
            s.label = 0;
            s = preprocess(s, side);
            std::vector<const ImageSample*> ptrs = {&s};
            PredictionBatch pb = forward(*ckpt.model, to_batch(ptrs, side));
            nlohmann::json probs = nlohmann::json::object();
            for (int c = 0; c < ckpt.model->num_classes(); ++c) {
                probs[ckpt.model->class_names()[c]] = pb.probabilities.at(0, c);
            }
            line["predicted_class"] = ckpt.model->class_names()[pb.predicted_labels[0]];
            line["probabilities"] = probs;
        } catch (const std::exception& e) {
            line["error"] = e.what();
            ++errors;
        }
        *out << line.dump() << "\n";
    }
    return errors == 0 ? kOk : kDataError;
}

int run_report(const std::vector<std::string>& metrics_files, const std::string& out_dir,
               const std::vector<std::string>& formats) {
    std::vector<MetricsReport> reports;
    for (const auto& path : metrics_files) {
        std::ifstream f(path);
        if (!f) throw EvalError("cannot open " + path);
        nlohmann::json arr;
        try {
            f >> arr;
        } catch (const nlohmann::json::exception& e) {
            throw EvalError("malformed metrics file " + path + ": " + e.what());
        }
        for (const auto& j : arr) {
            MetricsReport rep;
            rep.model_name = j.at("model").get<std::string>();
            rep.class_names = j.at("class_names").get<std::vector<std::string>>();
            rep.cm.class_names = rep.class_names;
            rep.cm.counts = j.at("confusion_matrix").get<std::vector<std::vector<long long>>>();
            for (const auto& name : rep.class_names) {
                const auto& m = j.at("per_class").at(name);
                ClassMetrics cm;
                cm.accuracy = m.at("accuracy").get<double>();
                cm.precision = m.at("precision").get<double>();
                cm.recall = m.at("recall").get<double>();
                cm.specificity = m.at("specificity").get<double>();
                cm.f1 = m.at("f1").get<double>();
                for (const auto& flag : m.at("degenerate_flags")) {
                    cm.degenerate_flags.insert(flag.get<std::string>());
                }
                rep.per_class.push_back(cm);
            }
            rep.average = macro_average(rep.per_class);
            rep.roc.per_class.resize(rep.class_names.size());
            rep.roc.macro_auc = j.value("macro_auc", 0.0);
            reports.push_back(std::move(rep));
        }
    }
    if (reports.empty()) {
        throw EvalError("no metric blocks found in the given files");
    }
    fs::create_directories(out_dir);
    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), reports);
    for (const auto& rep : reports) {
        std::string suffix = reports.size() > 1 ? "_" + rep.model_name : "";
        for (auto& c : suffix) {
            if (c == '/' || c == ' ') c = '-';
        }
        plot_confusion_matrix(rep.cm, out_dir, "confusion_matrix" + suffix, formats);
    }
    std::cout << "combined report (" << reports.size() << " blocks) written to " << out_dir
              << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-backbone image classification pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    int synth_n = 50, synth_side = 64;
    uint64_t synth_seed = 0;
    double synth_noise = 0.1;
    std::string synth_out = "synthetic_data";
    synth->add_option("--n", synth_n, "images per class")->check(CLI::PositiveNumber);
    synth->add_option("--side", synth_side, "image side length");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--noise", synth_noise, "additive noise amplitude")
        ->check(CLI::Range(0.0, 0.4999));
    synth->add_option("--out", synth_out, "output directory");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the configured model");
    std::string train_config;
    std::vector<std::string> train_sets;
    std::optional<uint64_t> train_seed;
    bool ablation = false;
    train_cmd->add_option("--config", train_config, "JSON config file");
    train_cmd->add_option("--set", train_sets, "flat override, e.g. train.epochs=5");
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_flag("--ablation", ablation,
                        "also train single-backbone heads and emit the three-way report");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, eval_out = "eval_out";
    std::optional<double> eval_fraction;
    std::optional<uint64_t> eval_seed;
    int eval_batch = 32;
    std::vector<std::string> eval_formats = {"png"};
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--data", eval_data, "dataset root")->required();
    eval_cmd->add_option("--train-fraction", eval_fraction,
                         "evaluate only the held-out part of this split");
    eval_cmd->add_option("--seed", eval_seed, "split seed (with --train-fraction)");
    eval_cmd->add_option("--batch-size", eval_batch, "prediction batch size")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--format", eval_formats, "plot formats (png, svg)");

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "predict classes for images");
    std::string pred_ckpt, pred_input, pred_out;
    pred_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint directory")->required();
    pred_cmd->add_option("--input", pred_input, "image file or directory")->required();
    pred_cmd->add_option("--out", pred_out, "JSONL output path (default stdout)");

    // report
    auto* report_cmd = app.add_subcommand("report", "merge metrics files into one report");
    std::vector<std::string> report_inputs, report_formats = {"png"};
    std::string report_out = "report_out";
    report_cmd->add_option("--metrics", report_inputs, "metrics.json files")->required();
    report_cmd->add_option("--out", report_out, "output directory");
    report_cmd->add_option("--format", report_formats, "plot formats (png, svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (synth->parsed()) {
            return run_synth(synth_n, synth_side, synth_seed, synth_noise, synth_out);
        }
        if (train_cmd->parsed()) {
            return run_train(train_config, train_sets, train_seed, ablation);
        }
        if (eval_cmd->parsed()) {
            return run_evaluate(eval_ckpt, eval_data, eval_fraction, eval_seed, eval_batch,
                                eval_out, eval_formats);
        }
        if (pred_cmd->parsed()) {
            return run_predict(pred_ckpt, pred_input, pred_out);
        }
        if (report_cmd->parsed()) {
            return run_report(report_inputs, report_out, report_formats);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kTrainingError;
    } catch (const EvalError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return kEvalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
