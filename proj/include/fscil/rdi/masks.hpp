#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fscil/core/types.hpp"
#include "fscil/rdi/config.hpp"

namespace fscil::rdi {

// Class whose normalized base column best matches the globally pooled map.
// The dummy column, if any, never wins.
int predicted_label(const CosineClassifier& classifier, const FeatureMap& map);

// Cosine of every patch against one class column, row-major over (a, b).
std::vector<double> patch_scores(const FeatureMap& map, const Eigen::VectorXd& column);

// 1 where the patch's cosine to column y_p reaches the threshold.
PatchMask alr_mask(const FeatureMap& map, const CosineClassifier& classifier, int predicted,
                   double threshold);
PatchMask alr_mask_from_scores(int height, int width, const std::vector<double>& scores,
                               double threshold);

PatchMask ali_mask(const PatchMask& alr);

// MASKED_MEAN divides by max(1, selected patches); GLOBAL_MEAN by h * w. An
// empty mask gives a zero vector with support 0.
PooledFeature masked_pool(const FeatureMap& map, const PatchMask& mask, PoolingMode mode);

// Spreads a gradient w.r.t. the pooled vector back over the selected patches.
Tensor3 masked_pool_backward(const Shape3& shape, const PatchMask& mask, PoolingMode mode,
                             const Eigen::VectorXd& grad_pooled);

// Appends one unit-norm random column as the dummy class.
CosineClassifier extend_with_dummy(const CosineClassifier& classifier, std::uint64_t seed);

}  // namespace fscil::rdi
