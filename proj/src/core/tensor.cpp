#include "fscil/core/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace fscil {

Tensor3::Tensor3(Shape3 shape, double fill) : shape_(shape), values_(shape.size(), fill) {
  if (shape.height < 0 || shape.width < 0 || shape.channels < 0) {
    throw std::invalid_argument("Tensor3: negative dimension");
  }
}

Tensor3::Tensor3(Shape3 shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("Tensor3: value count does not match shape");
  }
}

void Tensor3::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (!(other.shape_ == shape_)) throw std::invalid_argument("Tensor3: shape mismatch in +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

}  // namespace fscil
