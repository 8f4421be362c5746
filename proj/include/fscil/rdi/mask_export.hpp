#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/core/types.hpp"
#include "fscil/data/image.hpp"

namespace fscil::rdi {

// RGB copy of the image with every ALR patch tinted red. `stride` is the
// number of pixels each patch covers along an axis.
data::Image mask_overlay(const data::Image& image, const PatchMask& alr, int stride);

nlohmann::json mask_record(const std::string& sample_id, int label, int predicted,
                           double threshold, const PatchMask& alr,
                           const std::vector<double>& scores);

// Writes <dir>/<sample_id>.png and <dir>/<sample_id>.json.
void export_mask(const std::filesystem::path& dir, const std::string& sample_id,
                 const data::Image& image, int label, int predicted, double threshold,
                 const PatchMask& alr, const std::vector<double>& scores, int stride);

}  // namespace fscil::rdi
