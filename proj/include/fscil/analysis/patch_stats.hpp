#pragma once

#include <optional>
#include <span>

#include "fscil/core/types.hpp"

namespace fscil::analysis {

struct PatchCategory {
  long count = 0;
  // Means of exp(tau * cos(x, w_c)) for the true class c and of the sum of
  // exp(tau * cos(x, w_m)) over the other real classes m.
  std::optional<double> own;
  std::optional<double> others;
};

struct PatchSimilarityStats {
  double threshold = 0.0;
  PatchCategory central;    // cos(x, w_c) >= threshold
  PatchCategory redundant;  // the rest
};

// Patches are split by their cosine to the ground-truth class column. The
// dummy column, if present, is ignored. An empty category reports no means.
PatchSimilarityStats patch_similarity_stats(std::span<const FeatureMap> maps,
                                            std::span<const int> labels,
                                            const CosineClassifier& classifier, double threshold);

}  // namespace fscil::analysis
