#include "fscil/rdi/config.hpp"

#include <cmath>
#include <stdexcept>

namespace fscil::rdi {

std::string to_string(PoolingMode mode) {
  return mode == PoolingMode::kMaskedMean ? "MASKED_MEAN" : "GLOBAL_MEAN";
}

std::string to_string(MaskSource source) {
  return source == MaskSource::kOnline ? "ONLINE" : "FROZEN_PRETRAIN";
}

std::string to_string(EmptyMaskPolicy policy) {
  return policy == EmptyMaskPolicy::kFallbackGlobal ? "FALLBACK_GLOBAL" : "SKIP_TERM";
}

PoolingMode pooling_mode_from_string(const std::string& text) {
  if (text == "MASKED_MEAN") return PoolingMode::kMaskedMean;
  if (text == "GLOBAL_MEAN") return PoolingMode::kGlobalMean;
  throw std::invalid_argument("unknown pooling_mode '" + text + "'");
}

MaskSource mask_source_from_string(const std::string& text) {
  if (text == "ONLINE") return MaskSource::kOnline;
  if (text == "FROZEN_PRETRAIN") return MaskSource::kFrozenPretrain;
  throw std::invalid_argument("unknown mask_source '" + text + "'");
}

EmptyMaskPolicy empty_mask_policy_from_string(const std::string& text) {
  if (text == "FALLBACK_GLOBAL") return EmptyMaskPolicy::kFallbackGlobal;
  if (text == "SKIP_TERM") return EmptyMaskPolicy::kSkipTerm;
  throw std::invalid_argument("unknown empty mask policy '" + text + "'");
}

void RdiConfig::validate() const {
  if (!std::isfinite(threshold)) throw std::invalid_argument("rdi.threshold must be finite");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("rdi.lambda must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("rdi.beta must be >= 0");
}

}  // namespace fscil::rdi
