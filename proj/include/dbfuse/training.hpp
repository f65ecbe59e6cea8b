#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbfuse/dataset.hpp"
#include "dbfuse/fusion.hpp"

namespace dbfuse {

enum class OptimizerKind { adam, sgd_momentum };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainingConfig {
    int epochs = 50;
    int batch_size = 5;
    double learning_rate = 1e-3;  // 1e-4 is the end-to-end fine-tune default
    OptimizerKind optimizer = OptimizerKind::adam;
    bool freeze_backbones = true;
    bool flip_augment = false;
    uint64_t seed = 0;
    std::string output_dir;  // empty = keep everything in memory
};

// Conventional defaults: 1e-3 for a head-only run, 1e-4 end-to-end.
double default_learning_rate(bool freeze_backbones);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> records;
};

struct Checkpoint {
    std::string dir;  // contains weights.bin + manifest.json
    nlohmann::json manifest;
};

struct TrainResult {
    TrainingHistory history;
    Checkpoint final_checkpoint;   // dir empty when cfg.output_dir is empty
    Checkpoint best_checkpoint;    // by validation accuracy
};

// Minimizes cross-entropy on split.train; split.test doubles as the
// per-epoch validation set. Mutates the model in place. With output_dir set,
// writes history.csv plus checkpoint_final/ and checkpoint_best/.
TrainResult train(ConcatenatedModel& model, const DataSplit& split, const TrainingConfig& cfg);

// Mean cross-entropy and top-1 accuracy over a dataset.
std::pair<double, double> evaluate_loss_accuracy(ConcatenatedModel& model,
                                                 const LabeledDataset& ds, int batch_size);

Checkpoint save_checkpoint(ConcatenatedModel& model, const TrainingConfig& cfg,
                           const TrainingHistory& history, const std::string& dir);

struct LoadedCheckpoint {
    std::unique_ptr<ConcatenatedModel> model;
    nlohmann::json manifest;
};
LoadedCheckpoint load_checkpoint(const std::string& dir);

void write_history_csv(const std::string& path, const TrainingHistory& history);
TrainingHistory read_history_csv(const std::string& path);

}  // namespace dbfuse
