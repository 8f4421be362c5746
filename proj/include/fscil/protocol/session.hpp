#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fscil/analysis/accuracy.hpp"
#include "fscil/core/report.hpp"
#include "fscil/core/schedule.hpp"
#include "fscil/core/types.hpp"
#include "fscil/data/dataset.hpp"
#include "fscil/model/backbone.hpp"

namespace fscil::protocol {

enum class PrototypePooling { kGlobal, kAlr };
std::string to_string(PrototypePooling pooling);
PrototypePooling prototype_pooling_from_string(const std::string& text);

struct PrototypeOptions {
  PrototypePooling pooling = PrototypePooling::kGlobal;
  // Only for kAlr: the head that picks each sample's predicted class and
  // the patch threshold. Must not be null then.
  const CosineClassifier* mask_head = nullptr;
  double threshold = 0.0;
};

// Arithmetic mean per class. Every class needs at least one feature.
PrototypeStore prototypes_from_features(const std::map<int, std::vector<Eigen::VectorXd>>& features,
                                        int feature_dim);

// Prototypes of the classes introduced in `session`, from its training samples.
PrototypeStore compute_prototypes(const model::Backbone& backbone, const SessionSchedule& schedule,
                                  const data::DatasetAdapter& adapter, int session,
                                  const PrototypeOptions& options = {});

struct SessionState {
  int session = 0;
  CosineClassifier classifier;  // inference-visible, no dummy
  std::uint64_t backbone_hash = 0;
};

struct IncrementalResult {
  std::vector<SessionState> states;
  std::vector<EvalReport> reports;
  std::vector<std::vector<analysis::Prediction>> predictions;
  // Globally pooled test features of every class, keyed by test index.
  std::map<std::size_t, Eigen::VectorXd> test_features;
};

// Replaces the base columns by prototypes, drops the dummy, then grows the
// classifier session by session and evaluates over all seen classes. The
// backbone is only read.
IncrementalResult run_incremental(const SessionSchedule& schedule,
                                  const data::DatasetAdapter& adapter,
                                  const model::Backbone& backbone,
                                  const CosineClassifier& trained,
                                  const PrototypeOptions& options = {});

}  // namespace fscil::protocol
