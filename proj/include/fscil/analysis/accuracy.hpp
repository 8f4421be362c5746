#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace fscil::analysis {

// One test sample's outcome. `novel_only` is the prediction with the argmax
// restricted to the novel columns seen so far; set for novel samples only.
struct Prediction {
  int label = 0;
  int predicted = 0;
  std::optional<int> novel_only;
};

struct AccuracyDecomposition {
  double ba = 0.0;
  double aa = 0.0;
  std::optional<double> na;
  std::optional<double> nn;
  std::optional<double> gap;  // nn - na
  std::size_t base_samples = 0;
  std::size_t novel_samples = 0;
};

// Base ids are [0, base_count). With session >= 1 every novel sample must
// carry a novel_only prediction and at least one must exist.
AccuracyDecomposition accuracy_decomposition(std::span<const Prediction> predictions,
                                             int base_count, int session);

}  // namespace fscil::analysis
