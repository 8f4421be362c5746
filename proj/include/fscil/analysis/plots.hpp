#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fscil/analysis/distances.hpp"
#include "fscil/data/image.hpp"

namespace fscil::analysis {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed palette, cycled by series index.
Rgb palette(std::size_t index);

struct LineSeries {
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0, 0, 0};
};

// Step lines on white with a black frame. y spans [0, 1]; x spans the data.
// No text is drawn, the caller documents axes and legend alongside.
data::Image line_plot(std::span<const LineSeries> series, int width = 480, int height = 320);

struct BarSeries {
  std::vector<double> values;  // one per group, in [0, 1]
  Rgb color{0, 0, 0};
};

// Grouped bars: one cluster per group, one bar per series within it.
data::Image bar_plot(std::span<const BarSeries> series, int width = 480, int height = 320);

// Two columns: distance, cumulative frequency.
void write_cdf_csv(const std::filesystem::path& path, const Cdf& cdf);

}  // namespace fscil::analysis
