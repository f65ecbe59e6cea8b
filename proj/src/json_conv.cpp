#include "dbfuse/json_conv.hpp"

namespace dbfuse {

nlohmann::json to_json(const BackboneSpec& spec) {
    return {
        {"family", to_string(spec.family)},
        {"variant", spec.variant},
        {"pretrained", spec.pretrained},
        {"input_side", spec.input_side},
        {"weights_path", spec.weights_path},
        {"embedding_dim", spec.embedding_dim()},
    };
}

BackboneSpec backbone_spec_from_json(const nlohmann::json& j) {
    BackboneSpec spec;
    spec.family = backbone_family_from_string(j.at("family").get<std::string>());
    spec.variant = j.at("variant").get<std::string>();
    spec.pretrained = j.value("pretrained", false);
    spec.input_side = j.value("input_side", 128);
    spec.weights_path = j.value("weights_path", std::string());
    return spec;
}

nlohmann::json to_json(const HeadConfig& cfg) {
    return {{"hidden", cfg.hidden}, {"dropout", cfg.dropout}};
}

HeadConfig head_config_from_json(const nlohmann::json& j) {
    HeadConfig cfg;
    cfg.hidden = j.value("hidden", 0);
    cfg.dropout = j.value("dropout", 0.0);
    return cfg;
}

nlohmann::json to_json(const TrainingConfig& cfg) {
    return {
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"optimizer", to_string(cfg.optimizer)},
        {"freeze_backbones", cfg.freeze_backbones},
        {"flip_augment", cfg.flip_augment},
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
    };
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
    TrainingConfig cfg;
    cfg.epochs = j.value("epochs", 50);
    cfg.batch_size = j.value("batch_size", 5);
    cfg.freeze_backbones = j.value("freeze_backbones", true);
    cfg.learning_rate = j.value("learning_rate", default_learning_rate(cfg.freeze_backbones));
    cfg.optimizer = optimizer_from_string(j.value("optimizer", std::string("adam")));
    cfg.flip_augment = j.value("flip_augment", false);
    cfg.seed = j.value("seed", 0ULL);
    cfg.output_dir = j.value("output_dir", std::string());
    return cfg;
}

}  // namespace dbfuse
