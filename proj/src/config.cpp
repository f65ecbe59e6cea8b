#include "dbfuse/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dbfuse/errors.hpp"
#include "dbfuse/json_conv.hpp"

namespace fs = std::filesystem;

namespace dbfuse {

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.model.backbone_a = {BackboneFamily::convnext, "tiny", false, cfg.data.side, ""};
    cfg.model.backbone_b = {BackboneFamily::efficientnet, "b0", false, cfg.data.side, ""};
    cfg.train.seed = cfg.seed;
    return cfg;
}

namespace {

void apply_override(nlohmann::json& j, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like section.key=value, got '" + kv + "'");
    }
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    std::string pointer = "/" + key;
    for (auto& c : pointer) {
        if (c == '.') c = '/';
    }
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value;  // plain string
    }
    j[nlohmann::json::json_pointer(pointer)] = parsed;
}

BackboneSpec backbone_from_json_or(const nlohmann::json& j, const char* key,
                                   const BackboneSpec& fallback, int side) {
    BackboneSpec spec = fallback;
    if (j.contains(key)) {
        spec = backbone_spec_from_json(j.at(key));
    }
    spec.input_side = side;
    return spec;
}

}  // namespace

RunConfig run_config_from_json(nlohmann::json j, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        apply_override(j, kv);
    }

    RunConfig cfg = default_run_config();
    try {
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            cfg.data.root = d.value("root", cfg.data.root);
            cfg.data.train_fraction = d.value("train_fraction", cfg.data.train_fraction);
            cfg.data.side = d.value("side", cfg.data.side);
            cfg.data.flip_augment = d.value("flip_augment", cfg.data.flip_augment);
            if (d.contains("class_names")) {
                cfg.data.class_names = d.at("class_names").get<std::vector<std::string>>();
            }
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            cfg.model.backbone_a =
                backbone_from_json_or(m, "backbone_a", cfg.model.backbone_a, cfg.data.side);
            cfg.model.backbone_b =
                backbone_from_json_or(m, "backbone_b", cfg.model.backbone_b, cfg.data.side);
            if (m.contains("pretrained")) {
                bool p = m.at("pretrained").get<bool>();
                cfg.model.backbone_a.pretrained = p;
                cfg.model.backbone_b.pretrained = p;
            }
            cfg.model.head_hidden = m.value("head_hidden", cfg.model.head_hidden);
            cfg.model.dropout = m.value("dropout", cfg.model.dropout);
        } else {
            cfg.model.backbone_a.input_side = cfg.data.side;
            cfg.model.backbone_b.input_side = cfg.data.side;
        }
        if (j.contains("train")) {
            cfg.train = training_config_from_json(j.at("train"));
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            cfg.output.dir = o.value("dir", cfg.output.dir);
            if (o.contains("plot_formats")) {
                cfg.output.plot_formats = o.at("plot_formats").get<std::vector<std::string>>();
            }
        }
        if (j.contains("seed")) {
            cfg.train.seed = cfg.seed;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }

    cfg.model.backbone_a.input_side = cfg.data.side;
    cfg.model.backbone_b.input_side = cfg.data.side;
    if (cfg.train.output_dir.empty()) {
        cfg.train.output_dir = cfg.output.dir;
    }
    if (!(cfg.data.train_fraction > 0.0 && cfg.data.train_fraction < 1.0)) {
        throw ConfigError("data.train_fraction must be in (0,1)");
    }
    if (cfg.data.side <= 0) {
        throw ConfigError("data.side must be positive");
    }
    if (cfg.train.epochs < 1 || cfg.train.batch_size < 1) {
        throw ConfigError("train.epochs and train.batch_size must be >= 1");
    }
    if (cfg.train.learning_rate <= 0.0) {
        throw ConfigError("train.learning_rate must be positive");
    }
    if (!(cfg.model.dropout >= 0.0 && cfg.model.dropout < 1.0)) {
        throw ConfigError("model.dropout must be in [0,1)");
    }
    cfg.train.flip_augment = cfg.data.flip_augment;
    return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return run_config_from_json(std::move(j), overrides);
}

nlohmann::json to_json(const RunConfig& cfg) {
    return {
        {"seed", cfg.seed},
        {"data",
         {{"root", cfg.data.root},
          {"train_fraction", cfg.data.train_fraction},
          {"side", cfg.data.side},
          {"flip_augment", cfg.data.flip_augment},
          {"class_names", cfg.data.class_names}}},
        {"model",
         {{"backbone_a", to_json(cfg.model.backbone_a)},
          {"backbone_b", to_json(cfg.model.backbone_b)},
          {"head_hidden", cfg.model.head_hidden},
          {"dropout", cfg.model.dropout}}},
        {"train", to_json(cfg.train)},
        {"output", {{"dir", cfg.output.dir}, {"plot_formats", cfg.output.plot_formats}}},
    };
}

nlohmann::json run_summary_protocol(const RunConfig& cfg, int num_classes) {
    return {
        {"train_fraction", cfg.data.train_fraction},
        {"test_fraction", 1.0 - cfg.data.train_fraction},
        {"input_side", cfg.data.side},
        {"num_classes", num_classes},
        {"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
    };
}

std::string resolve_weights_path(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) {
        return path;
    }
    if (const char* dir = std::getenv("DBFUSE_WEIGHTS_DIR")) {
        fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) {
            return candidate.string();
        }
    }
    return path;
}

}  // namespace dbfuse
