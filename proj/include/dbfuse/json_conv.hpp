#pragma once

#include <nlohmann/json.hpp>

#include "dbfuse/backbone.hpp"
#include "dbfuse/fusion.hpp"
#include "dbfuse/training.hpp"

namespace dbfuse {

nlohmann::json to_json(const BackboneSpec& spec);
BackboneSpec backbone_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const HeadConfig& cfg);
HeadConfig head_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const nlohmann::json& j);

}  // namespace dbfuse
