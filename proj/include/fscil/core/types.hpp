#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fscil/core/tensor.hpp"

namespace fscil {

// Last-stage backbone activations, channel-last. Entries are finite and the
// shape never changes after construction.
class FeatureMap {
 public:
  explicit FeatureMap(Tensor3 values);

  int height() const { return values_.height(); }
  int width() const { return values_.width(); }
  int channels() const { return values_.channels(); }
  Shape3 shape() const { return values_.shape(); }
  int patch_count() const { return height() * width(); }

  double operator()(int a, int b, int k) const { return values_(a, b, k); }
  std::span<const double> patch(int a, int b) const {
    return {values_.pixel(a, b), static_cast<std::size_t>(channels())};
  }
  const Tensor3& tensor() const { return values_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  Tensor3 values_;
};

enum class MaskKind { kNone, kAlr, kAli };

std::string to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& text);

// Binary patch grid. ALR marks label-relevant patches, ALI its complement.
class PatchMask {
 public:
  PatchMask(int height, int width, std::vector<std::uint8_t> bits, MaskKind kind);
  static PatchMask filled(int height, int width, bool value, MaskKind kind);

  int height() const { return height_; }
  int width() const { return width_; }
  MaskKind kind() const { return kind_; }
  bool operator()(int a, int b) const { return bits_[static_cast<std::size_t>(a) * width_ + b] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  int count() const;

  // ALR <-> ALI; the bits flip elementwise.
  PatchMask complement() const;

  friend bool operator==(const PatchMask&, const PatchMask&) = default;

 private:
  int height_;
  int width_;
  std::vector<std::uint8_t> bits_;
  MaskKind kind_;
};

// A d-vector pooled from a feature map, optionally through a mask.
class PooledFeature {
 public:
  PooledFeature(Eigen::VectorXd vector, MaskKind source, int support_count);

  const Eigen::VectorXd& vector() const { return vector_; }
  MaskKind source() const { return source_; }
  int support_count() const { return support_count_; }
  int dim() const { return static_cast<int>(vector_.size()); }

  friend bool operator==(const PooledFeature& a, const PooledFeature& b) {
    return a.source_ == b.source_ && a.support_count_ == b.support_count_ &&
           a.vector_.size() == b.vector_.size() && a.vector_ == b.vector_;
  }

 private:
  Eigen::VectorXd vector_;
  MaskKind source_;
  int support_count_;
};

// d x m weight matrix scored through L2-normalized inner products scaled by a
// temperature. When a dummy column is present it is always the last one.
class CosineClassifier {
 public:
  CosineClassifier(Eigen::MatrixXd weights, double temperature,
                   std::optional<int> dummy_index = std::nullopt);

  int feature_dim() const { return static_cast<int>(weights_.rows()); }
  int column_count() const { return static_cast<int>(weights_.cols()); }
  // Columns that are legal predictions (everything but the dummy).
  int real_class_count() const { return column_count() - (dummy_index_ ? 1 : 0); }

  const Eigen::MatrixXd& weights() const { return weights_; }
  double temperature() const { return temperature_; }
  std::optional<int> dummy_index() const { return dummy_index_; }
  bool has_dummy() const { return dummy_index_.has_value(); }

  CosineClassifier without_dummy() const;
  CosineClassifier with_columns_appended(const Eigen::MatrixXd& columns) const;

  friend bool operator==(const CosineClassifier& a, const CosineClassifier& b) {
    return a.temperature_ == b.temperature_ && a.dummy_index_ == b.dummy_index_ &&
           a.weights_.rows() == b.weights_.rows() && a.weights_.cols() == b.weights_.cols() &&
           a.weights_ == b.weights_;
  }

 private:
  Eigen::MatrixXd weights_;
  double temperature_;
  std::optional<int> dummy_index_;
};

struct Prototype {
  Eigen::VectorXd mean;
  int sample_count = 0;

  friend bool operator==(const Prototype& a, const Prototype& b) {
    return a.sample_count == b.sample_count && a.mean.size() == b.mean.size() && a.mean == b.mean;
  }
};

// Class id -> mean embedding of that class's training samples.
class PrototypeStore {
 public:
  explicit PrototypeStore(int feature_dim) : feature_dim_(feature_dim) {}

  void insert(int class_id, Prototype prototype);
  int feature_dim() const { return feature_dim_; }
  const std::map<int, Prototype>& entries() const { return entries_; }
  const Prototype& at(int class_id) const;
  bool contains(int class_id) const { return entries_.contains(class_id); }
  std::size_t size() const { return entries_.size(); }

  // Columns in ascending class-id order.
  Eigen::MatrixXd as_columns() const;

  friend bool operator==(const PrototypeStore&, const PrototypeStore&) = default;

 private:
  int feature_dim_;
  std::map<int, Prototype> entries_;
};

}  // namespace fscil
