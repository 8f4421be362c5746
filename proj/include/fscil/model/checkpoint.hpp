#pragma once

#include <filesystem>

#include "fscil/core/types.hpp"
#include "fscil/model/backbone.hpp"

namespace fscil::model {

struct Checkpoint {
  Backbone backbone;
  CosineClassifier classifier;
};

// Binary layout: 8-byte magic "FSCILCK1", little-endian u64 header size, a
// JSON header (architecture id, d, tau, class count, dummy flag, blob index),
// then each parameter blob as raw doubles keyed by module path.
void save_checkpoint(const std::filesystem::path& path, const Backbone& backbone,
                     const CosineClassifier& classifier);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fscil::model
