#include "fscil/analysis/patch_stats.hpp"

#include <cmath>
#include <stdexcept>

#include "fscil/model/cosine.hpp"

namespace fscil::analysis {

PatchSimilarityStats patch_similarity_stats(std::span<const FeatureMap> maps,
                                            std::span<const int> labels,
                                            const CosineClassifier& classifier, double threshold) {
  if (maps.size() != labels.size()) {
    throw std::invalid_argument("patch_similarity_stats: maps and labels differ in length");
  }
  const CosineClassifier head = classifier.has_dummy() ? classifier.without_dummy() : classifier;
  const int m = head.column_count();
  Eigen::MatrixXd unit(head.feature_dim(), m);
  for (int j = 0; j < m; ++j) unit.col(j) = model::l2_normalized(head.weights().col(j));
  const double tau = head.temperature();

  double sums[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  PatchSimilarityStats out;
  out.threshold = threshold;
  for (std::size_t s = 0; s < maps.size(); ++s) {
    const FeatureMap& map = maps[s];
    const int c = labels[s];
    if (c < 0 || c >= m) throw std::out_of_range("patch_similarity_stats: label outside the classifier");
    if (map.channels() != head.feature_dim()) {
      throw std::invalid_argument("patch_similarity_stats: feature dimension mismatch");
    }
    for (int a = 0; a < map.height(); ++a) {
      for (int b = 0; b < map.width(); ++b) {
        const auto patch = map.patch(a, b);
        const Eigen::VectorXd x = model::l2_normalized(
            Eigen::Map<const Eigen::VectorXd>(patch.data(), static_cast<Eigen::Index>(patch.size())));
        const Eigen::VectorXd cos = unit.transpose() * x;
        double others = 0.0;
        for (int j = 0; j < m; ++j) {
          if (j != c) others += std::exp(tau * cos[j]);
        }
        const int k = cos[c] >= threshold ? 0 : 1;
        (k == 0 ? out.central : out.redundant).count += 1;
        sums[k][0] += std::exp(tau * cos[c]);
        sums[k][1] += others;
      }
    }
  }
  PatchCategory* cats[2] = {&out.central, &out.redundant};
  for (int k = 0; k < 2; ++k) {
    if (cats[k]->count == 0) continue;
    cats[k]->own = sums[k][0] / static_cast<double>(cats[k]->count);
    cats[k]->others = sums[k][1] / static_cast<double>(cats[k]->count);
  }
  return out;
}

}  // namespace fscil::analysis
