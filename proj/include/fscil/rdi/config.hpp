#pragma once

#include <string>

namespace fscil::rdi {

enum class PoolingMode { kMaskedMean, kGlobalMean };
enum class MaskSource { kOnline, kFrozenPretrain };
enum class EmptyMaskPolicy { kFallbackGlobal, kSkipTerm };

std::string to_string(PoolingMode mode);
std::string to_string(MaskSource source);
std::string to_string(EmptyMaskPolicy policy);
PoolingMode pooling_mode_from_string(const std::string& text);
MaskSource mask_source_from_string(const std::string& text);
EmptyMaskPolicy empty_mask_policy_from_string(const std::string& text);

struct RdiConfig {
  // Patches whose cosine to the predicted class column is >= threshold are ALR.
  double threshold = 0.0;
  double lambda = 1.0;  // weight of the ALR-feature term
  double beta = 1.0;    // weight of the ALI-feature (dummy target) term
  PoolingMode pooling_mode = PoolingMode::kMaskedMean;
  MaskSource mask_source = MaskSource::kOnline;
  EmptyMaskPolicy alr_empty_policy = EmptyMaskPolicy::kFallbackGlobal;
  EmptyMaskPolicy ali_empty_policy = EmptyMaskPolicy::kSkipTerm;
  // Score the plain-feature term over the dummy column too.
  bool base_loss_includes_dummy = false;

  void validate() const;
};

}  // namespace fscil::rdi
