#pragma once

#include <span>

#include "fscil/core/types.hpp"
#include "fscil/data/dataset.hpp"

namespace fscil::analysis {

struct AlignmentScores {
  // Share of mask mass inside a box. Patch (a, b) covers the pixel window
  // [b*s, (b+1)*s) x [a*s, (a+1)*s) and contributes its overlap fraction.
  double alr_in_signal = 0.0;
  double ali_in_nuisance = 0.0;
  double alr_in_nuisance = 0.0;
  double ali_in_signal = 0.0;
  // What a mask that ignores content would score: box area over image area.
  double signal_base_rate = 0.0;
  double nuisance_base_rate = 0.0;
  double alr_mass = 0.0;
  double ali_mass = 0.0;
  std::size_t samples = 0;
};

// `regions[i]` annotates the sample whose ALR mask is `alr[i]`; a null
// entry (unannotated data) is an error. ALI is the complement of ALR.
AlignmentScores planted_redundancy_alignment(std::span<const PatchMask> alr,
                                             std::span<const data::RegionAnnotation* const> regions,
                                             int stride);

}  // namespace fscil::analysis
