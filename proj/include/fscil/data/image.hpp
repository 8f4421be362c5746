#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fscil/core/tensor.hpp"

namespace fscil::data {

// 8-bit interleaved image.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

Image make_image(int height, int width, int channels, std::uint8_t fill = 0);

// Maps pixels to [-1, 1].
Tensor3 to_tensor(const Image& image);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace fscil::data
