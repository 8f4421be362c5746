#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fscil {

struct Shape3 {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

// Dense channel-last (height, width, channels) buffer of doubles.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape3 shape, double fill = 0.0);
  Tensor3(Shape3 shape, std::vector<double> values);

  const Shape3& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int a, int b, int k) { return values_[offset(a, b) + k]; }
  double operator()(int a, int b, int k) const { return values_[offset(a, b) + k]; }

  double* pixel(int a, int b) { return values_.data() + offset(a, b); }
  const double* pixel(int a, int b) const { return values_.data() + offset(a, b); }

  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }

  void fill(double value);
  Tensor3& operator+=(const Tensor3& other);

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t offset(int a, int b) const {
    return (static_cast<std::size_t>(a) * shape_.width + b) * shape_.channels;
  }

  Shape3 shape_;
  std::vector<double> values_;
};

}  // namespace fscil
