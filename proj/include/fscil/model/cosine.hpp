#pragma once

#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "fscil/core/types.hpp"

namespace fscil::model {

// Added to every L2-norm denominator.
inline constexpr double kNormEpsilon = 1e-12;

// Raised when a feature with zero norm reaches cosine scoring.
class DegenerateFeature : public std::domain_error {
 public:
  DegenerateFeature() : std::domain_error("degenerate feature: zero vector has no direction") {}
};

PooledFeature global_pool(const FeatureMap& map);

Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v);
// Pull a gradient w.r.t. v / (|v| + eps) back to a gradient w.r.t. v.
Eigen::VectorXd l2_normalize_backward(const Eigen::VectorXd& v, const Eigen::VectorXd& grad_unit);

// tau * cos(feature, w_k) for every column, the dummy included.
Eigen::VectorXd cosine_logits(const CosineClassifier& classifier, const PooledFeature& feature);

// Softmax cross-entropy of the cosine logits against a real class label.
double cross_entropy_cosine(const CosineClassifier& classifier, const PooledFeature& feature,
                            int label);

// argmax_k cos(feature, w_k) over real classes; ties go to the lowest id.
int predict(const CosineClassifier& classifier, const PooledFeature& feature);
// Same rule restricted to the listed columns.
int predict_among(const CosineClassifier& classifier, const PooledFeature& feature,
                  std::span<const int> columns);

struct CosineLoss {
  double loss = 0.0;
  Eigen::VectorXd grad_feature;  // d
  Eigen::MatrixXd grad_weights;  // d x m, same columns as the input
};

// Loss and gradients of -log softmax(tau * cos(feature, W))[label] over all
// columns of `weights`. Any label in [0, m) is accepted, dummy included.
CosineLoss cosine_cross_entropy(const Eigen::Ref<const Eigen::MatrixXd>& weights,
                                double temperature, const Eigen::VectorXd& feature, int label);

}  // namespace fscil::model
