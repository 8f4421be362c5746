#include "fscil/core/serialization.hpp"

#include <stdexcept>
#include <string>

namespace fscil {

using nlohmann::json;

namespace {

void check_version(const json& j, const char* what) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw std::invalid_argument(std::string(what) + ": unsupported or missing schema_version");
  }
}

json manifest_to_json(const std::vector<ClassManifest>& sessions) {
  json out = json::object();
  for (std::size_t t = 0; t < sessions.size(); ++t) {
    json per_class = json::object();
    for (const auto& [cls, samples] : sessions[t]) per_class[std::to_string(cls)] = samples;
    out[std::to_string(t)] = std::move(per_class);
  }
  return out;
}

std::vector<ClassManifest> manifest_from_json(const json& j) {
  std::vector<ClassManifest> sessions(j.size());
  for (const auto& [key, per_class] : j.items()) {
    const auto t = static_cast<std::size_t>(std::stoul(key));
    if (t >= sessions.size()) throw std::invalid_argument("manifest: session keys are not dense");
    for (const auto& [cls, samples] : per_class.items()) {
      sessions[t][std::stoi(cls)] = samples.get<std::vector<std::size_t>>();
    }
  }
  return sessions;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const json& j) {
  auto values = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json to_json(const SessionSchedule& schedule) {
  json sessions = json::array();
  for (const auto& s : schedule.incremental_sessions) {
    sessions.push_back({{"way", s.way}, {"shot", s.shot}, {"classes", s.classes}});
  }
  return {{"schema_version", kSchemaVersion},
          {"base_classes", schedule.base_classes},
          {"incremental_sessions", std::move(sessions)},
          {"train_manifest", manifest_to_json(schedule.train_manifest)},
          {"test_manifest", manifest_to_json(schedule.test_manifest)},
          {"source_classes", schedule.source_classes}};
}

SessionSchedule schedule_from_json(const json& j) {
  check_version(j, "SessionSchedule");
  SessionSchedule s;
  s.base_classes = j.at("base_classes").get<std::vector<int>>();
  for (const auto& entry : j.at("incremental_sessions")) {
    s.incremental_sessions.push_back({entry.at("way").get<int>(), entry.at("shot").get<int>(),
                                      entry.at("classes").get<std::vector<int>>()});
  }
  s.train_manifest = manifest_from_json(j.at("train_manifest"));
  s.test_manifest = manifest_from_json(j.at("test_manifest"));
  if (j.contains("source_classes")) s.source_classes = j.at("source_classes").get<std::vector<int>>();
  return s;
}

json to_json(const EvalReport& report) {
  json j = {{"schema_version", kSchemaVersion},
            {"session", report.session()},
            {"session_top1", report.session_top1()},
            {"ba_acc", report.ba_acc()},
            {"aa_acc", report.aa_acc()}};
  if (report.na_acc()) j["na_acc"] = *report.na_acc();
  if (report.nn_acc()) j["nn_acc"] = *report.nn_acc();
  if (report.confusion_gap()) j["confusion_gap"] = *report.confusion_gap();
  if (report.diagnostics()) j["diagnostics"] = *report.diagnostics();
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  check_version(j, "EvalReport");
  const int session = j.at("session").get<int>();
  EvalReport r = session == 0
                     ? EvalReport::base_session(j.at("session_top1").get<double>(),
                                                j.at("ba_acc").get<double>())
                     : EvalReport::incremental(session, j.at("session_top1").get<double>(),
                                               j.at("ba_acc").get<double>(),
                                               j.at("na_acc").get<double>(),
                                               j.at("aa_acc").get<double>(),
                                               j.at("nn_acc").get<double>());
  if (session == 0) r.aa_acc_ = j.at("aa_acc").get<double>();
  if (j.contains("diagnostics")) r.diagnostics_ = j.at("diagnostics");
  return r;
}

json to_json(const FeatureMap& map) {
  const auto data = map.tensor().data();
  return {{"schema_version", kSchemaVersion},
          {"shape", {map.height(), map.width(), map.channels()}},
          {"values", std::vector<double>(data.begin(), data.end())}};
}

FeatureMap feature_map_from_json(const json& j) {
  check_version(j, "FeatureMap");
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 3) throw std::invalid_argument("FeatureMap: shape must have 3 entries");
  return FeatureMap(Tensor3({shape[0], shape[1], shape[2]}, j.at("values").get<std::vector<double>>()));
}

json to_json(const PatchMask& mask) {
  const auto bits = mask.bits();
  return {{"schema_version", kSchemaVersion},
          {"height", mask.height()},
          {"width", mask.width()},
          {"kind", to_string(mask.kind())},
          {"bits", std::vector<int>(bits.begin(), bits.end())}};
}

PatchMask patch_mask_from_json(const json& j) {
  check_version(j, "PatchMask");
  auto raw = j.at("bits").get<std::vector<int>>();
  std::vector<std::uint8_t> bits;
  bits.reserve(raw.size());
  for (int b : raw) {
    if (b != 0 && b != 1) throw std::invalid_argument("PatchMask: entries must be 0 or 1");
    bits.push_back(static_cast<std::uint8_t>(b));
  }
  return PatchMask(j.at("height").get<int>(), j.at("width").get<int>(), std::move(bits),
                   mask_kind_from_string(j.at("kind").get<std::string>()));
}

json to_json(const PooledFeature& feature) {
  return {{"schema_version", kSchemaVersion},
          {"vector", vector_to_json(feature.vector())},
          {"source_mask_kind", to_string(feature.source())},
          {"support_count", feature.support_count()}};
}

PooledFeature pooled_feature_from_json(const json& j) {
  check_version(j, "PooledFeature");
  return PooledFeature(vector_from_json(j.at("vector")),
                       mask_kind_from_string(j.at("source_mask_kind").get<std::string>()),
                       j.at("support_count").get<int>());
}

json to_json(const CosineClassifier& classifier) {
  const auto& w = classifier.weights();
  json columns = json::array();
  for (Eigen::Index c = 0; c < w.cols(); ++c) columns.push_back(vector_to_json(w.col(c)));
  json j = {{"schema_version", kSchemaVersion},
            {"temperature", classifier.temperature()},
            {"columns", std::move(columns)}};
  j["dummy_index"] = classifier.dummy_index() ? json(*classifier.dummy_index()) : json(nullptr);
  return j;
}

CosineClassifier cosine_classifier_from_json(const json& j) {
  check_version(j, "CosineClassifier");
  const auto& columns = j.at("columns");
  if (columns.empty()) throw std::invalid_argument("CosineClassifier: no columns");
  Eigen::MatrixXd w(static_cast<Eigen::Index>(columns.at(0).size()),
                    static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto col = vector_from_json(columns[c]);
    if (col.size() != w.rows()) throw std::invalid_argument("CosineClassifier: ragged columns");
    w.col(static_cast<Eigen::Index>(c)) = col;
  }
  std::optional<int> dummy;
  if (!j.at("dummy_index").is_null()) dummy = j.at("dummy_index").get<int>();
  return CosineClassifier(std::move(w), j.at("temperature").get<double>(), dummy);
}

json to_json(const PrototypeStore& store) {
  json entries = json::array();
  for (const auto& [cls, proto] : store.entries()) {
    entries.push_back({{"class_id", cls},
                       {"mean", vector_to_json(proto.mean)},
                       {"sample_count", proto.sample_count}});
  }
  return {{"schema_version", kSchemaVersion},
          {"feature_dim", store.feature_dim()},
          {"prototypes", std::move(entries)}};
}

PrototypeStore prototype_store_from_json(const json& j) {
  check_version(j, "PrototypeStore");
  PrototypeStore store(j.at("feature_dim").get<int>());
  for (const auto& e : j.at("prototypes")) {
    store.insert(e.at("class_id").get<int>(),
                 Prototype{vector_from_json(e.at("mean")), e.at("sample_count").get<int>()});
  }
  return store;
}

}  // namespace fscil
