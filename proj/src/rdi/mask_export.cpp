#include "fscil/rdi/mask_export.hpp"

#include <algorithm>
#include <fstream>

#include "fscil/core/serialization.hpp"

namespace fscil::rdi {

data::Image mask_overlay(const data::Image& image, const PatchMask& alr, int stride) {
  data::Image out = data::make_image(image.height, image.width, 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int gray = image.channels >= 3
                           ? (image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2)) / 3
                           : image.at(y, x, 0);
      const int a = std::min(y / stride, alr.height() - 1);
      const int b = std::min(x / stride, alr.width() - 1);
      const bool relevant = alr(a, b);
      out.at(y, x, 0) = static_cast<std::uint8_t>(relevant ? std::min(255, gray / 2 + 128) : gray);
      out.at(y, x, 1) = static_cast<std::uint8_t>(relevant ? gray / 2 : gray);
      out.at(y, x, 2) = static_cast<std::uint8_t>(relevant ? gray / 2 : gray);
    }
  }
  return out;
}

nlohmann::json mask_record(const std::string& sample_id, int label, int predicted,
                           double threshold, const PatchMask& alr,
                           const std::vector<double>& scores) {
  return {{"sample", sample_id},
          {"label", label},
          {"predicted", predicted},
          {"threshold", threshold},
          {"alr", to_json(alr)},
          {"scores", scores}};
}

void export_mask(const std::filesystem::path& dir, const std::string& sample_id,
                 const data::Image& image, int label, int predicted, double threshold,
                 const PatchMask& alr, const std::vector<double>& scores, int stride) {
  std::filesystem::create_directories(dir);
  data::write_png(dir / (sample_id + ".png"), mask_overlay(image, alr, stride));
  std::ofstream(dir / (sample_id + ".json"))
      << mask_record(sample_id, label, predicted, threshold, alr, scores).dump(1) << "\n";
}

}  // namespace fscil::rdi
