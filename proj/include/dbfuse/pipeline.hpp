#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbfuse/config.hpp"
#include "dbfuse/dataset.hpp"
#include "dbfuse/fusion.hpp"
#include "dbfuse/metrics.hpp"
#include "dbfuse/training.hpp"

namespace dbfuse {

// Builds the concatenated model described by cfg (resolving pretrained weight
// paths through $DBFUSE_WEIGHTS_DIR).
std::unique_ptr<ConcatenatedModel> build_model_from_config(const RunConfig& cfg,
                                                           std::vector<std::string> class_names);

struct TrainRun {
    std::unique_ptr<ConcatenatedModel> model;
    DataSplit split;
    TrainResult result;
    nlohmann::json run_summary;
};

// Split + build + train + (when cfg.output.dir is set) history, checkpoints,
// training-curve plots and run_summary.json.
TrainRun run_training(const RunConfig& cfg, const LabeledDataset& ds);

// Predicts on a dataset and assembles the full metric report.
MetricsReport evaluate_model(ConcatenatedModel& model, const LabeledDataset& ds, int batch_size,
                             const std::string& model_name);

// metrics.{json,csv}, confusion matrix JSON + heatmap, ROC plot.
void emit_evaluation_outputs(const std::vector<MetricsReport>& reports, const std::string& dir,
                             const std::vector<std::string>& formats,
                             const std::string& stem_prefix = "");

// Trains backbone-a-only, backbone-b-only and concatenated heads on the same
// split/seed/config and reports all three on the held-out set.
struct AblationRun {
    std::vector<MetricsReport> reports;  // [backbone_a, backbone_b, concatenated]
    TrainRun concatenated;
};
AblationRun run_ablation(const RunConfig& cfg, const LabeledDataset& ds);

std::string backbone_display_name(const BackboneSpec& spec);

}  // namespace dbfuse
