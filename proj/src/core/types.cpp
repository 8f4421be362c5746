#include "fscil/core/types.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fscil {

FeatureMap::FeatureMap(Tensor3 values) : values_(std::move(values)) {
  if (values_.height() < 1 || values_.width() < 1 || values_.channels() < 1) {
    throw std::invalid_argument("FeatureMap: every dimension must be >= 1");
  }
  for (double v : values_.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureMap: non-finite entry");
  }
}

std::string to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::kNone: return "NONE";
    case MaskKind::kAlr: return "ALR";
    case MaskKind::kAli: return "ALI";
  }
  return "NONE";
}

MaskKind mask_kind_from_string(const std::string& text) {
  if (text == "NONE") return MaskKind::kNone;
  if (text == "ALR") return MaskKind::kAlr;
  if (text == "ALI") return MaskKind::kAli;
  throw std::invalid_argument("unknown mask kind '" + text + "'");
}

PatchMask::PatchMask(int height, int width, std::vector<std::uint8_t> bits, MaskKind kind)
    : height_(height), width_(width), bits_(std::move(bits)), kind_(kind) {
  if (height < 1 || width < 1) throw std::invalid_argument("PatchMask: empty grid");
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("PatchMask: bit count does not match grid");
  }
  if (kind == MaskKind::kNone) throw std::invalid_argument("PatchMask: kind must be ALR or ALI");
  for (auto b : bits_) {
    if (b > 1) throw std::invalid_argument("PatchMask: entries must be 0 or 1");
  }
}

PatchMask PatchMask::filled(int height, int width, bool value, MaskKind kind) {
  return PatchMask(height, width,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, value ? 1 : 0),
                   kind);
}

int PatchMask::count() const { return std::accumulate(bits_.begin(), bits_.end(), 0); }

PatchMask PatchMask::complement() const {
  std::vector<std::uint8_t> flipped(bits_.size());
  for (std::size_t i = 0; i < bits_.size(); ++i) flipped[i] = 1 - bits_[i];
  return PatchMask(height_, width_, std::move(flipped),
                   kind_ == MaskKind::kAlr ? MaskKind::kAli : MaskKind::kAlr);
}

PooledFeature::PooledFeature(Eigen::VectorXd vector, MaskKind source, int support_count)
    : vector_(std::move(vector)), source_(source), support_count_(support_count) {
  if (vector_.size() < 1) throw std::invalid_argument("PooledFeature: empty vector");
  if (support_count < 0) throw std::invalid_argument("PooledFeature: negative support count");
}

CosineClassifier::CosineClassifier(Eigen::MatrixXd weights, double temperature,
                                   std::optional<int> dummy_index)
    : weights_(std::move(weights)), temperature_(temperature), dummy_index_(dummy_index) {
  if (weights_.rows() < 1 || weights_.cols() < 1) {
    throw std::invalid_argument("CosineClassifier: weight matrix is empty");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("CosineClassifier: temperature must be positive");
  }
  for (Eigen::Index c = 0; c < weights_.cols(); ++c) {
    if (weights_.col(c).squaredNorm() == 0.0) {
      throw std::invalid_argument("CosineClassifier: column " + std::to_string(c) + " is zero");
    }
  }
  if (!weights_.allFinite()) throw std::invalid_argument("CosineClassifier: non-finite weight");
  if (dummy_index_ && *dummy_index_ != column_count() - 1) {
    throw std::invalid_argument("CosineClassifier: dummy column must be the last column");
  }
}

CosineClassifier CosineClassifier::without_dummy() const {
  if (!dummy_index_) return *this;
  return CosineClassifier(weights_.leftCols(weights_.cols() - 1), temperature_);
}

CosineClassifier CosineClassifier::with_columns_appended(const Eigen::MatrixXd& columns) const {
  if (dummy_index_) {
    throw std::logic_error("CosineClassifier: cannot append real classes after a dummy column");
  }
  if (columns.rows() != weights_.rows()) {
    throw std::invalid_argument("CosineClassifier: appended columns have wrong dimension");
  }
  Eigen::MatrixXd grown(weights_.rows(), weights_.cols() + columns.cols());
  grown << weights_, columns;
  return CosineClassifier(std::move(grown), temperature_);
}

void PrototypeStore::insert(int class_id, Prototype prototype) {
  if (prototype.mean.size() != feature_dim_) {
    throw std::invalid_argument("PrototypeStore: prototype dimension mismatch");
  }
  if (prototype.sample_count < 1) {
    throw std::invalid_argument("PrototypeStore: prototype needs at least one sample");
  }
  entries_[class_id] = std::move(prototype);
}

const Prototype& PrototypeStore::at(int class_id) const {
  auto it = entries_.find(class_id);
  if (it == entries_.end()) {
    throw std::out_of_range("PrototypeStore: no prototype for class " + std::to_string(class_id));
  }
  return it->second;
}

Eigen::MatrixXd PrototypeStore::as_columns() const {
  Eigen::MatrixXd out(feature_dim_, static_cast<Eigen::Index>(entries_.size()));
  Eigen::Index c = 0;
  for (const auto& [id, proto] : entries_) out.col(c++) = proto.mean;
  return out;
}

}  // namespace fscil
