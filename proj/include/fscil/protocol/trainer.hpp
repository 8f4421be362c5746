#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/core/schedule.hpp"
#include "fscil/core/types.hpp"
#include "fscil/data/dataset.hpp"
#include "fscil/model/backbone.hpp"
#include "fscil/protocol/optimizer.hpp"
#include "fscil/rdi/config.hpp"
#include "fscil/rdi/losses.hpp"

namespace fscil::protocol {

// Starting point of the stage-1 head. CLASS_MEANS copies the class means of
// the initial backbone's pooled features, so training starts from the
// prototype classifier. NORMAL draws i.i.d. N(0, 1).
enum class HeadInit { kNormal, kClassMeans };

std::string to_string(HeadInit init);
HeadInit head_init_from_string(const std::string& text);

struct TrainingConfig {
  int pretrain_epochs = 20;  // stage 1, base loss only
  int decouple_epochs = 30;  // stage 2, full objective with the dummy column
  double temperature = 16.0;
  HeadInit head_init = HeadInit::kClassMeans;
  OptimizerConfig optimizer;
  bool random_crop = false;
  int crop_padding = 4;
  bool random_flip = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  int stage = 1;
  int epoch = 0;
  double learning_rate = 0.0;
  rdi::LossBreakdown mean;
  // Largest pre-clipping gradient norm of any step in the epoch.
  double max_grad_norm = 0.0;
};

// Thrown when any loss term turns non-finite. `dump` says where and carries
// the parameter norms at that step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, nlohmann::json dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const nlohmann::json& dump() const { return dump_; }

 private:
  nlohmann::json dump_;
};

struct BaseTrainingResult {
  model::Backbone backbone;
  CosineClassifier classifier;           // base columns plus the dummy
  CosineClassifier pretrain_classifier;  // end of stage 1, no dummy
  std::vector<EpochLog> log;
  // Full-set objective (no augmentation) immediately before the first and
  // after the last stage-2 update.
  double stage2_start_loss = 0.0;
  double stage2_end_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Base samples of session 0 as dense-label examples, no augmentation.
std::vector<rdi::Example> base_examples(const SessionSchedule& schedule,
                                        const data::DatasetAdapter& adapter);

BaseTrainingResult train_base(const SessionSchedule& schedule, const data::DatasetAdapter& adapter,
                              model::Backbone backbone, const rdi::RdiConfig& rdi,
                              const TrainingConfig& config, const EpochCallback& on_epoch = {});

// Masks and predictions from a fixed model, for the FROZEN_PRETRAIN source.
rdi::MaskProvider frozen_mask_provider(const model::Backbone& backbone,
                                       const CosineClassifier& classifier, double threshold);

}  // namespace fscil::protocol
