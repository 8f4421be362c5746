#include "fscil/rdi/masks.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "fscil/core/random.hpp"
#include "fscil/model/cosine.hpp"

namespace fscil::rdi {

int predicted_label(const CosineClassifier& classifier, const FeatureMap& map) {
  return model::predict(classifier, model::global_pool(map));
}

std::vector<double> patch_scores(const FeatureMap& map, const Eigen::VectorXd& column) {
  if (column.size() != map.channels()) {
    throw std::invalid_argument("patch_scores: column length does not match channel count");
  }
  const Eigen::VectorXd unit_w = model::l2_normalized(column);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(map.patch_count()));
  for (int a = 0; a < map.height(); ++a) {
    for (int b = 0; b < map.width(); ++b) {
      const auto p = map.patch(a, b);
      const Eigen::Map<const Eigen::VectorXd> patch(p.data(), static_cast<Eigen::Index>(p.size()));
      scores.push_back(model::l2_normalized(patch).dot(unit_w));
    }
  }
  return scores;
}

PatchMask alr_mask_from_scores(int height, int width, const std::vector<double>& scores,
                               double threshold) {
  std::vector<std::uint8_t> bits(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) bits[i] = scores[i] >= threshold ? 1 : 0;
  return PatchMask(height, width, std::move(bits), MaskKind::kAlr);
}

PatchMask alr_mask(const FeatureMap& map, const CosineClassifier& classifier, int predicted,
                   double threshold) {
  if (predicted < 0 || predicted >= classifier.real_class_count()) {
    throw std::out_of_range("alr_mask: predicted label " + std::to_string(predicted) +
                            " is not a base class");
  }
  return alr_mask_from_scores(map.height(), map.width(),
                              patch_scores(map, classifier.weights().col(predicted)), threshold);
}

PatchMask ali_mask(const PatchMask& alr) {
  if (alr.kind() != MaskKind::kAlr) throw std::invalid_argument("ali_mask: input must be an ALR mask");
  return alr.complement();
}

PooledFeature masked_pool(const FeatureMap& map, const PatchMask& mask, PoolingMode mode) {
  if (mask.height() != map.height() || mask.width() != map.width()) {
    throw std::invalid_argument("masked_pool: mask grid does not match feature map");
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(map.channels());
  int support = 0;
  for (int a = 0; a < map.height(); ++a) {
    for (int b = 0; b < map.width(); ++b) {
      if (!mask(a, b)) continue;
      ++support;
      const auto p = map.patch(a, b);
      for (int k = 0; k < map.channels(); ++k) sum[k] += p[static_cast<std::size_t>(k)];
    }
  }
  const double denom =
      mode == PoolingMode::kMaskedMean ? std::max(1, support) : map.patch_count();
  return PooledFeature(sum / denom, mask.kind(), support);
}

Tensor3 masked_pool_backward(const Shape3& shape, const PatchMask& mask, PoolingMode mode,
                             const Eigen::VectorXd& grad_pooled) {
  Tensor3 grad(shape);
  const int support = mask.count();
  const double denom = mode == PoolingMode::kMaskedMean ? std::max(1, support)
                                                        : shape.height * shape.width;
  for (int a = 0; a < shape.height; ++a) {
    for (int b = 0; b < shape.width; ++b) {
      if (!mask(a, b)) continue;
      double* g = grad.pixel(a, b);
      for (int k = 0; k < shape.channels; ++k) g[k] = grad_pooled[k] / denom;
    }
  }
  return grad;
}

CosineClassifier extend_with_dummy(const CosineClassifier& classifier, std::uint64_t seed) {
  if (classifier.has_dummy()) throw std::logic_error("extend_with_dummy: classifier already has a dummy column");
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd column(classifier.feature_dim());
  do {
    for (Eigen::Index k = 0; k < column.size(); ++k) column[k] = dist(rng);
  } while (column.norm() == 0.0);
  column.normalize();
  Eigen::MatrixXd grown(classifier.feature_dim(), classifier.column_count() + 1);
  grown << classifier.weights(), column;
  return CosineClassifier(std::move(grown), classifier.temperature(), classifier.column_count());
}

}  // namespace fscil::rdi
