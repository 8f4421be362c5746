#pragma once

#include <nlohmann/json.hpp>

#include "fscil/core/report.hpp"
#include "fscil/core/schedule.hpp"
#include "fscil/core/types.hpp"

namespace fscil {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const SessionSchedule& schedule);
SessionSchedule schedule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FeatureMap& map);
FeatureMap feature_map_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PatchMask& mask);
PatchMask patch_mask_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PooledFeature& feature);
PooledFeature pooled_feature_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CosineClassifier& classifier);
CosineClassifier cosine_classifier_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PrototypeStore& store);
PrototypeStore prototype_store_from_json(const nlohmann::json& j);

}  // namespace fscil
