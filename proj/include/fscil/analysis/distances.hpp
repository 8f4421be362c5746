#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fscil::analysis {

// Empirical CDF over sorted values; cumulative[i] = (i + 1) / n.
struct Cdf {
  std::vector<double> values;
  std::vector<double> cumulative;
};

Cdf empirical_cdf(std::vector<double> values);

enum class InterClassMode { kClassMeans, kAllPairs };

struct DistanceReport {
  Cdf intra;
  Cdf inter;
  double intra_mean = 0.0;
  double inter_mean = 0.0;
  std::vector<std::string> warnings;
};

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Intra: every within-class pair. Inter: every pair of class means, or every
// cross-class sample pair with kAllPairs. Singleton classes are left out of
// the intra set with a warning.
DistanceReport class_distance_cdfs(const std::map<int, std::vector<Eigen::VectorXd>>& features,
                                   InterClassMode mode = InterClassMode::kClassMeans);

}  // namespace fscil::analysis
