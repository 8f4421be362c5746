#pragma once

#include <cstdint>
#include <memory>

#include "fscil/data/dataset.hpp"

namespace fscil::data {

enum class NuisanceSharing {
  // One nuisance texture, carried by every image of every other class.
  kSharedAcrossClasses,
  // Two nuisance textures; every class carries exactly one of them.
  kPerClassSubset,
};

std::string to_string(NuisanceSharing sharing);
NuisanceSharing nuisance_sharing_from_string(const std::string& text);

// Planted-redundancy images: noisy gray background, one class-specific
// grating (the signal) and one nuisance texture shared by several classes.
struct SyntheticSpec {
  int image_size = 32;
  int class_count = 6;
  int samples_per_class = 60;
  int test_samples_per_class = 20;
  int signal_patch_size = 16;
  int nuisance_patch_size = 8;
  NuisanceSharing nuisance_sharing = NuisanceSharing::kSharedAcrossClasses;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  // Patch corners snap to multiples of this many pixels when possible.
  int placement_grid = 8;
  double signal_contrast = 0.35;
  double nuisance_contrast = 0.35;

  // Throws std::invalid_argument, naming the offending field.
  void validate() const;
};

// Grating parameters of a class signal texture.
struct SignalTexture {
  double orientation = 0.0;  // radians
  double period = 4.0;       // pixels
};

SignalTexture signal_texture_for(const SyntheticSpec& spec, int class_id);
// -1 when the class carries no nuisance patch.
int nuisance_texture_for(const SyntheticSpec& spec, int class_id);

std::unique_ptr<InMemoryDataset> generate_synthetic(const SyntheticSpec& spec);

}  // namespace fscil::data
