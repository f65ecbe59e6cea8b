#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbfuse/backbone.hpp"
#include "dbfuse/dataset.hpp"
#include "dbfuse/training.hpp"

namespace dbfuse {

// Full pipeline configuration; defaults reproduce the reference protocol
// (80/20 split, 128x128 input, 3 classes, 50 epochs, batch size 5).
struct RunConfig {
    uint64_t seed = 42;

    struct Data {
        std::string root;
        double train_fraction = 0.8;
        int side = 128;
        bool flip_augment = false;
        // Empty = derive from class directories in alphabetical order.
        std::vector<std::string> class_names = kDefaultClassNames;
    } data;

    struct Model {
        BackboneSpec backbone_a;
        BackboneSpec backbone_b;
        int head_hidden = 0;
        double dropout = 0.0;
    } model;

    TrainingConfig train;

    struct Output {
        std::string dir = "runs/out";
        std::vector<std::string> plot_formats = {"png"};
    } output;
};

RunConfig default_run_config();

// Parses a JSON config file, then applies flat "section.key=value" command
// line overrides. Throws ConfigError on parse or validation failure.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

RunConfig run_config_from_json(nlohmann::json j, const std::vector<std::string>& overrides = {});

nlohmann::json to_json(const RunConfig& cfg);

// The protocol block of the run summary (split fractions, input side, class
// count, epochs, batch size).
nlohmann::json run_summary_protocol(const RunConfig& cfg, int num_classes);

// Resolves a relative pretrained-weights path against $DBFUSE_WEIGHTS_DIR.
std::string resolve_weights_path(const std::string& path);

}  // namespace dbfuse
