#include "fscil/model/cosine.hpp"

#include <cmath>
#include <string>

namespace fscil::model {

PooledFeature global_pool(const FeatureMap& map) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(map.channels());
  for (int a = 0; a < map.height(); ++a) {
    for (int b = 0; b < map.width(); ++b) {
      const auto patch = map.patch(a, b);
      for (int k = 0; k < map.channels(); ++k) mean[k] += patch[static_cast<std::size_t>(k)];
    }
  }
  mean /= static_cast<double>(map.patch_count());
  return PooledFeature(std::move(mean), MaskKind::kNone, map.patch_count());
}

Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v) { return v / (v.norm() + kNormEpsilon); }

Eigen::VectorXd l2_normalize_backward(const Eigen::VectorXd& v, const Eigen::VectorXd& grad_unit) {
  const double n = v.norm();
  const double denom = n + kNormEpsilon;
  Eigen::VectorXd g = grad_unit / denom;
  if (n > 0.0) g -= v * (v.dot(grad_unit) / (n * denom * denom));
  return g;
}

namespace {

void require_feature(const CosineClassifier& classifier, const Eigen::VectorXd& f) {
  if (f.size() != classifier.feature_dim()) {
    throw std::invalid_argument("cosine scoring: feature has length " + std::to_string(f.size()) +
                                " but classifier expects " +
                                std::to_string(classifier.feature_dim()));
  }
  if (f.squaredNorm() == 0.0) throw DegenerateFeature();
}

Eigen::VectorXd cosines(const Eigen::MatrixXd& w, const Eigen::VectorXd& f) {
  const Eigen::VectorXd unit = l2_normalized(f);
  Eigen::VectorXd out(w.cols());
  for (Eigen::Index k = 0; k < w.cols(); ++k) out[k] = unit.dot(l2_normalized(w.col(k)));
  return out;
}

}  // namespace

Eigen::VectorXd cosine_logits(const CosineClassifier& classifier, const PooledFeature& feature) {
  require_feature(classifier, feature.vector());
  return classifier.temperature() * cosines(classifier.weights(), feature.vector());
}

double cross_entropy_cosine(const CosineClassifier& classifier, const PooledFeature& feature,
                            int label) {
  if (label < 0 || label >= classifier.column_count()) {
    throw std::out_of_range("cross_entropy_cosine: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classifier.column_count()) + ")");
  }
  if (classifier.dummy_index() && label == *classifier.dummy_index()) {
    throw std::invalid_argument("cross_entropy_cosine: label must be a real class, not the dummy");
  }
  require_feature(classifier, feature.vector());
  return cosine_cross_entropy(classifier.weights(), classifier.temperature(), feature.vector(),
                              label)
      .loss;
}

int predict_among(const CosineClassifier& classifier, const PooledFeature& feature,
                  std::span<const int> columns) {
  require_feature(classifier, feature.vector());
  if (columns.empty()) throw std::invalid_argument("predict: no candidate classes");
  const Eigen::VectorXd unit = l2_normalized(feature.vector());
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k : columns) {
    if (k < 0 || k >= classifier.real_class_count()) {
      throw std::out_of_range("predict: column " + std::to_string(k) + " is not a real class");
    }
    const double score = unit.dot(l2_normalized(classifier.weights().col(k)));
    if (score > best_score || (score == best_score && k < best)) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

int predict(const CosineClassifier& classifier, const PooledFeature& feature) {
  std::vector<int> columns(static_cast<std::size_t>(classifier.real_class_count()));
  for (std::size_t k = 0; k < columns.size(); ++k) columns[k] = static_cast<int>(k);
  return predict_among(classifier, feature, columns);
}

CosineLoss cosine_cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& weights,
                                double temperature, const Eigen::VectorXd& feature, int label) {
  const Eigen::Index m = weights.cols();
  if (label < 0 || label >= m) throw std::out_of_range("cosine_cross_entropy: label out of range");
  if (feature.size() != weights.rows()) {
    throw std::invalid_argument("cosine_cross_entropy: feature dimension mismatch");
  }
  if (feature.squaredNorm() == 0.0) throw DegenerateFeature();

  const Eigen::VectorXd unit_f = l2_normalized(feature);
  Eigen::MatrixXd unit_w(weights.rows(), m);
  for (Eigen::Index k = 0; k < m; ++k) unit_w.col(k) = l2_normalized(weights.col(k));

  const Eigen::VectorXd logits = temperature * (unit_w.transpose() * unit_f);
  const double peak = logits.maxCoeff();
  const Eigen::VectorXd shifted = (logits.array() - peak).exp().matrix();
  const double total = shifted.sum();
  Eigen::VectorXd dlogits = shifted / total;

  CosineLoss out;
  out.loss = -(logits[label] - peak - std::log(total));
  if (out.loss < 0.0) out.loss = 0.0;  // rounding when one class dominates
  dlogits[label] -= 1.0;

  const Eigen::VectorXd grad_unit_f = temperature * (unit_w * dlogits);
  out.grad_feature = l2_normalize_backward(feature, grad_unit_f);
  out.grad_weights.resize(weights.rows(), m);
  for (Eigen::Index k = 0; k < m; ++k) {
    out.grad_weights.col(k) =
        l2_normalize_backward(weights.col(k), temperature * dlogits[k] * unit_f);
  }
  return out;
}

}  // namespace fscil::model
