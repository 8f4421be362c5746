#include "fscil/analysis/distances.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fscil/model/cosine.hpp"

namespace fscil::analysis {

Cdf empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  Cdf cdf;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) cdf.cumulative.push_back(static_cast<double>(i + 1) / n);
  cdf.values = std::move(values);
  return cdf;
}

double cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return 1.0 - model::l2_normalized(u).dot(model::l2_normalized(v));
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

DistanceReport class_distance_cdfs(const std::map<int, std::vector<Eigen::VectorXd>>& features,
                                   InterClassMode mode) {
  if (features.size() < 2) throw std::invalid_argument("class_distance_cdfs: needs at least 2 classes");
  DistanceReport out;
  std::vector<double> intra, inter;
  std::vector<Eigen::VectorXd> means;
  for (const auto& [label, list] : features) {
    if (list.empty()) throw std::invalid_argument("class_distance_cdfs: class " + std::to_string(label) + " is empty");
    if (list.size() == 1) {
      out.warnings.push_back("class " + std::to_string(label) +
                             " has a single sample and is excluded from intra-class distances");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) intra.push_back(cosine_distance(list[i], list[j]));
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(list.front().size());
    for (const auto& f : list) mean += f;
    means.push_back(mean / static_cast<double>(list.size()));
  }
  if (mode == InterClassMode::kClassMeans) {
    for (std::size_t i = 0; i < means.size(); ++i) {
      for (std::size_t j = i + 1; j < means.size(); ++j) inter.push_back(cosine_distance(means[i], means[j]));
    }
  } else {
    for (auto a = features.begin(); a != features.end(); ++a) {
      for (auto b = std::next(a); b != features.end(); ++b) {
        for (const auto& u : a->second) {
          for (const auto& v : b->second) inter.push_back(cosine_distance(u, v));
        }
      }
    }
  }
  out.intra_mean = mean_of(intra);
  out.inter_mean = mean_of(inter);
  out.intra = empirical_cdf(std::move(intra));
  out.inter = empirical_cdf(std::move(inter));
  return out;
}

}  // namespace fscil::analysis
