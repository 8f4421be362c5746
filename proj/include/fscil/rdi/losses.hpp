#pragma once

#include <functional>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "fscil/core/types.hpp"
#include "fscil/model/backbone.hpp"
#include "fscil/rdi/config.hpp"

namespace fscil::rdi {

struct Example {
  Tensor3 image;
  int label = 0;
};

// Cross-entropy of an ALR feature against its real label over every column,
// dummy included. Throws if the classifier has no dummy or the feature has
// empty support (policies are resolved by the caller, see sample_loss).
double loss_alr_dummy(const CosineClassifier& classifier, const PooledFeature& f_alr, int label);

// Cross-entropy of an ALI feature against the dummy column.
double loss_ali_dummy(const CosineClassifier& classifier, const PooledFeature& f_ali);

// Masks and predicted label fixed from outside, e.g. a frozen snapshot or a
// gradient check that must not let masks flip between evaluations.
struct FixedMasks {
  int predicted = 0;
  PatchMask alr;
};

struct SampleLoss {
  double total = 0.0;
  double base = 0.0;
  std::optional<double> alr;  // nullopt: term skipped
  std::optional<double> ali;
  int predicted = 0;
  PatchMask alr_mask = PatchMask::filled(1, 1, true, MaskKind::kAlr);
  bool alr_fell_back = false;
  Tensor3 grad_map;              // d total / d feature map
  Eigen::MatrixXd grad_weights;  // d total / d weights, all columns
};

// Per-sample objective: base + lambda * alr + beta * ali, with gradients.
// `weights` holds base_count base columns and, after extension, one dummy
// column at the end. Masks are constants of the step.
SampleLoss sample_loss(const FeatureMap& map, const Eigen::MatrixXd& weights, double temperature,
                       int label, int base_count, const RdiConfig& cfg,
                       const FixedMasks* masks = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double base = 0.0;
  double alr = 0.0;
  double ali = 0.0;
  int alr_terms = 0;
  int ali_terms = 0;
  int alr_fallbacks = 0;
};

using MaskProvider = std::function<FixedMasks(const Tensor3& image)>;

// Batch mean of sample_loss; when `grad_weights` is given, gradients are
// accumulated into it and into the backbone parameters (scaled by 1/B).
LossBreakdown total_loss(std::span<const Example> batch, model::Backbone& backbone,
                         const Eigen::MatrixXd& weights, double temperature, int base_count,
                         const RdiConfig& cfg, Eigen::MatrixXd* grad_weights,
                         const MaskProvider& masks = {});

// Value-only convenience over an immutable model.
LossBreakdown total_loss(std::span<const Example> batch, const model::Backbone& backbone,
                         const CosineClassifier& classifier, int base_count, const RdiConfig& cfg);

}  // namespace fscil::rdi
