#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fscil/core/types.hpp"
#include "oracles.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline oracle::Vec random_vec(Rng& rng, int d) {
  oracle::Vec v(static_cast<std::size_t>(d));
  for (double& x : v) x = uniform(rng);
  return v;
}

inline oracle::Mat random_columns(Rng& rng, int d, int m) {
  oracle::Mat cols;
  for (int j = 0; j < m; ++j) cols.push_back(random_vec(rng, d));
  return cols;
}

inline oracle::Grid random_grid(Rng& rng, int h, int w, int d) {
  oracle::Grid g(static_cast<std::size_t>(h), std::vector<oracle::Vec>(static_cast<std::size_t>(w)));
  for (auto& row : g)
    for (auto& p : row) p = random_vec(rng, d);
  return g;
}

inline Eigen::VectorXd to_eigen(const oracle::Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd to_eigen(const oracle::Mat& cols) {
  Eigen::MatrixXd W(static_cast<Eigen::Index>(cols[0].size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) W.col(static_cast<Eigen::Index>(j)) = to_eigen(cols[j]);
  return W;
}

inline fscil::FeatureMap to_map(const oracle::Grid& g) {
  const int h = static_cast<int>(g.size()), w = static_cast<int>(g[0].size());
  const int d = static_cast<int>(g[0][0].size());
  fscil::Tensor3 t({h, w, d});
  for (int a = 0; a < h; ++a)
    for (int b = 0; b < w; ++b)
      for (int k = 0; k < d; ++k) t(a, b, k) = g[a][b][k];
  return fscil::FeatureMap(std::move(t));
}

inline oracle::Bits to_bits(const fscil::PatchMask& m) {
  oracle::Bits out(static_cast<std::size_t>(m.height()), std::vector<int>(static_cast<std::size_t>(m.width())));
  for (int a = 0; a < m.height(); ++a)
    for (int b = 0; b < m.width(); ++b) out[a][b] = m(a, b) ? 1 : 0;
  return out;
}

inline fscil::PatchMask from_bits(const oracle::Bits& bits, fscil::MaskKind kind) {
  std::vector<std::uint8_t> flat;
  for (const auto& row : bits)
    for (int v : row) flat.push_back(static_cast<std::uint8_t>(v));
  return fscil::PatchMask(static_cast<int>(bits.size()), static_cast<int>(bits[0].size()), flat, kind);
}

// |a - b| <= tol * max(1, |a|, |b|): absolute near zero, relative elsewhere.
inline bool close(double a, double b, double tol = 1e-6) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-4) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

// Relative error used by every gradient check; tiny gradients compare
// absolutely against a floor so rounding noise cannot fail them.
inline double gradient_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace testing
