#include "fscil/analysis/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace fscil::analysis {

namespace {

constexpr int kMargin = 16;

void put(data::Image& img, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[static_cast<std::size_t>(k)];
}

void line(data::Image& img, int x0, int y0, int x1, int y1, const Rgb& c) {
  const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  for (int i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    put(img, x, y, c);
    put(img, x, y + 1, c);
  }
}

void frame(data::Image& img) {
  const Rgb black{0, 0, 0};
  const int x1 = img.width - kMargin, y1 = img.height - kMargin;
  line(img, kMargin, kMargin, x1, kMargin, black);
  line(img, kMargin, y1, x1, y1, black);
  line(img, kMargin, kMargin, kMargin, y1, black);
  line(img, x1, kMargin, x1, y1, black);
}

data::Image canvas(int width, int height) {
  if (width < 4 * kMargin || height < 4 * kMargin) throw std::invalid_argument("plot: canvas too small");
  return data::make_image(height, width, 3, 255);
}

}  // namespace

Rgb palette(std::size_t index) {
  static constexpr Rgb colors[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44},
                                   {255, 127, 14}, {148, 103, 189}, {140, 86, 75}};
  return colors[index % std::size(colors)];
}

data::Image line_plot(std::span<const LineSeries> series, int width, int height) {
  data::Image img = canvas(width, height);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("line_plot: x and y differ in length");
    for (double v : s.x) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo = std::isfinite(lo) ? lo - 0.5 : 0.0;
    hi = lo + 1.0;
  }
  const double pw = width - 2 * kMargin, ph = height - 2 * kMargin;
  const auto px = [&](double x) { return kMargin + static_cast<int>(std::lround((x - lo) / (hi - lo) * pw)); };
  const auto py = [&](double y) {
    return height - kMargin - static_cast<int>(std::lround(std::clamp(y, 0.0, 1.0) * ph));
  };
  for (const auto& s : series) {
    int prev_x = px(lo), prev_y = py(0.0);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const int x = px(s.x[i]), y = py(s.y[i]);
      line(img, prev_x, prev_y, x, prev_y, s.color);
      line(img, x, prev_y, x, y, s.color);
      prev_x = x;
      prev_y = y;
    }
    line(img, prev_x, prev_y, px(hi), prev_y, s.color);
  }
  frame(img);
  return img;
}

data::Image bar_plot(std::span<const BarSeries> series, int width, int height) {
  data::Image img = canvas(width, height);
  std::size_t groups = 0;
  for (const auto& s : series) groups = std::max(groups, s.values.size());
  if (groups > 0 && !series.empty()) {
    const double pw = width - 2 * kMargin, ph = height - 2 * kMargin;
    const double group_w = pw / static_cast<double>(groups);
    const double bar_w = 0.8 * group_w / static_cast<double>(series.size());
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t k = 0; k < series.size(); ++k) {
        if (g >= series[k].values.size()) continue;
        const double v = std::clamp(series[k].values[g], 0.0, 1.0);
        const int x0 = kMargin + static_cast<int>(g * group_w + 0.1 * group_w + k * bar_w);
        const int x1 = x0 + std::max(1, static_cast<int>(bar_w) - 1);
        const int y0 = height - kMargin - static_cast<int>(std::lround(v * ph));
        for (int y = y0; y < height - kMargin; ++y) {
          for (int x = x0; x < x1; ++x) put(img, x, y, series[k].color);
        }
      }
    }
  }
  frame(img);
  return img;
}

void write_cdf_csv(const std::filesystem::path& path, const Cdf& cdf) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "distance,cumulative_frequency\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cdf.values.size(); ++i) out << cdf.values[i] << ',' << cdf.cumulative[i] << '\n';
}

}  // namespace fscil::analysis
