#include "dbfuse/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "dbfuse/errors.hpp"
#include "dbfuse/plots.hpp"

namespace fs = std::filesystem;

namespace dbfuse {

std::string backbone_display_name(const BackboneSpec& spec) {
    return to_string(spec.family) + "-" + spec.variant;
}

std::unique_ptr<ConcatenatedModel> build_model_from_config(const RunConfig& cfg,
                                                           std::vector<std::string> class_names) {
    BackboneSpec a = cfg.model.backbone_a;
    BackboneSpec b = cfg.model.backbone_b;
    a.weights_path = resolve_weights_path(a.weights_path);
    b.weights_path = resolve_weights_path(b.weights_path);
    HeadConfig head{cfg.model.head_hidden, cfg.model.dropout};
    const int num_classes = static_cast<int>(class_names.size());
    return build_concatenated_model(a, b, num_classes, cfg.seed, std::move(class_names), head);
}

namespace {

nlohmann::json summary_json(const RunConfig& cfg, const ConcatenatedModel& model,
                            const DataSplit& split, const TrainingHistory& history) {
    nlohmann::json summary = {
        {"protocol", run_summary_protocol(cfg, model.num_classes())},
        {"seed", cfg.seed},
        {"class_names", model.class_names()},
        {"dataset",
         {{"train_count", split.train.samples.size()},
          {"test_count", split.test.samples.size()},
          {"train_per_class", split.train.class_counts()},
          {"test_per_class", split.test.class_counts()}}},
        {"model",
         {{"backbone_a", backbone_display_name(model.backbone_a().spec())},
          {"backbone_b", model.backbone_b()
                             ? nlohmann::json(backbone_display_name(model.backbone_b()->spec()))
                             : nlohmann::json(nullptr)},
          {"fused_dim", model.fused_dim()}}},
    };
    if (!history.records.empty()) {
        const auto& last = history.records.back();
        summary["final"] = {{"train_loss", last.train_loss},
                            {"train_accuracy", last.train_accuracy},
                            {"val_loss", last.val_loss},
                            {"val_accuracy", last.val_accuracy}};
    }
    return summary;
}

}  // namespace

TrainRun run_training(const RunConfig& cfg, const LabeledDataset& ds) {
    TrainRun run;
    run.split = stratified_split(ds, cfg.data.train_fraction, cfg.seed);
    run.model = build_model_from_config(cfg, ds.class_names);

    TrainingConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    tcfg.flip_augment = cfg.data.flip_augment;
    tcfg.output_dir = cfg.output.dir;
    run.result = train(*run.model, run.split, tcfg);
    run.run_summary = summary_json(cfg, *run.model, run.split, run.result.history);

    if (!cfg.output.dir.empty()) {
        fs::create_directories(cfg.output.dir);
        plot_training_curves(run.result.history, cfg.output.dir, cfg.output.plot_formats);
        std::ofstream f(fs::path(cfg.output.dir) / "run_summary.json");
        if (!f) throw DataError("cannot write run_summary.json under " + cfg.output.dir);
        f << run.run_summary.dump(2) << "\n";
    }
    return run;
}

MetricsReport evaluate_model(ConcatenatedModel& model, const LabeledDataset& ds, int batch_size,
                             const std::string& model_name) {
    if (ds.class_names != model.class_names()) {
        std::string got, expect;
        for (const auto& n : ds.class_names) got += n + " ";
        for (const auto& n : model.class_names()) expect += n + " ";
        throw EvalError("class names mismatch: model has [" + expect + "], dataset has [" + got +
                        "]");
    }
    DatasetPredictions pred = predict(model, ds, batch_size);
    std::vector<int> y_true;
    for (const auto& s : ds.samples) y_true.push_back(s.label);
    return build_report(model_name, y_true, pred.labels, pred.probabilities, ds.class_names);
}

void emit_evaluation_outputs(const std::vector<MetricsReport>& reports, const std::string& dir,
                             const std::vector<std::string>& formats,
                             const std::string& stem_prefix) {
    fs::create_directories(dir);
    write_metrics_json((fs::path(dir) / (stem_prefix + "metrics.json")).string(), reports);
    write_metrics_csv((fs::path(dir) / (stem_prefix + "metrics.csv")).string(), reports);
    for (const auto& rep : reports) {
        std::string suffix = reports.size() > 1 ? "_" + rep.model_name : "";
        for (auto& c : suffix) {
            if (c == '/' || c == ' ') c = '-';
        }
        write_confusion_matrix_json(
            (fs::path(dir) / (stem_prefix + "confusion_matrix" + suffix + ".json")).string(),
            rep.cm);
        plot_confusion_matrix(rep.cm, dir, stem_prefix + "confusion_matrix" + suffix, formats);
        plot_roc_curves(rep.roc, rep.class_names, dir, stem_prefix + "roc" + suffix, formats);
    }
}

AblationRun run_ablation(const RunConfig& cfg, const LabeledDataset& ds) {
    AblationRun out;
    DataSplit split = stratified_split(ds, cfg.data.train_fraction, cfg.seed);
    HeadConfig head{cfg.model.head_hidden, cfg.model.dropout};

    TrainingConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    tcfg.flip_augment = cfg.data.flip_augment;

    auto train_single = [&](const BackboneSpec& spec_in, const std::string& subdir) {
        BackboneSpec spec = spec_in;
        spec.weights_path = resolve_weights_path(spec.weights_path);
        auto model = build_single_model(spec, ds.num_classes(), cfg.seed, ds.class_names, head);
        TrainingConfig single_cfg = tcfg;
        single_cfg.output_dir =
            cfg.output.dir.empty() ? "" : (fs::path(cfg.output.dir) / subdir).string();
        train(*model, split, single_cfg);
        return model;
    };

    auto model_a = train_single(cfg.model.backbone_a, "ablation_a");
    auto model_b = train_single(cfg.model.backbone_b, "ablation_b");

    RunConfig concat_cfg = cfg;
    out.concatenated = run_training(concat_cfg, ds);

    const int bs = cfg.train.batch_size;
    out.reports.push_back(evaluate_model(*model_a, split.test, bs,
                                         backbone_display_name(cfg.model.backbone_a)));
    out.reports.push_back(evaluate_model(*model_b, split.test, bs,
                                         backbone_display_name(cfg.model.backbone_b)));
    out.reports.push_back(
        evaluate_model(*out.concatenated.model, out.concatenated.split.test, bs, "Concatenated"));

    if (!cfg.output.dir.empty()) {
        emit_evaluation_outputs(out.reports, cfg.output.dir, cfg.output.plot_formats, "ablation_");
    }
    return out;
}

}  // namespace dbfuse
