#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/analysis/distances.hpp"
#include "fscil/data/synthetic.hpp"
#include "fscil/model/backbone.hpp"
#include "fscil/protocol/session.hpp"
#include "fscil/protocol/trainer.hpp"
#include "fscil/rdi/config.hpp"

namespace fscil::cli {

// Bad configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataSource { kSynthetic, kDirectory, kIndexOnly };
std::string to_string(DataSource source);

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::string root;           // directory source
  std::string name = "index";  // index-only source
  int train_per_class = 500;  // index-only source
  int test_per_class = 100;   // index-only source
  int class_count = 24;       // synthetic and index-only
  data::SyntheticSpec synthetic;  // class_count is mirrored from above
  int base_classes = 8;
  int sessions = 8;
  int way = 2;
  int shot = 5;
  bool schedule_only = false;
};

struct AnalysisConfig {
  bool enabled = true;
  int export_masks = 8;  // base test samples written under masks/
  analysis::InterClassMode inter_mode = analysis::InterClassMode::kClassMeans;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DataConfig data;
  model::BackboneConfig model{.input = {32, 32, 1}};  // synthetic images are gray
  double temperature = 16.0;
  rdi::RdiConfig rdi;
  protocol::TrainingConfig training;  // seed is derived from the master seed
  protocol::PrototypePooling prototype_pooling = protocol::PrototypePooling::kGlobal;
  bool save_checkpoints = true;
  AnalysisConfig analysis;

  // Cross-field checks; throws ConfigError.
  void validate() const;
  // Sub-seeds fanned out from the master seed.
  std::uint64_t data_seed() const;
  std::uint64_t schedule_seed() const;
  std::uint64_t init_seed() const;
  std::uint64_t train_seed() const;
};

// Every field, defaults materialized. Feeding this back reproduces the run.
nlohmann::json to_json(const ExperimentConfig& config);
// Strict: unknown sections or keys and wrong types are ConfigErrors.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// TOML tables and arrays as the equivalent JSON document.
nlohmann::json parse_toml(const std::string& text, const std::string& source_name = "config");
nlohmann::json read_config_document(const std::filesystem::path& path);
// .json files are read as JSON, anything else as TOML.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace fscil::cli
