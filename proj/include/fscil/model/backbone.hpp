#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fscil/core/types.hpp"
#include "fscil/model/layers.hpp"

namespace fscil::model {

struct BackboneConfig {
  // "small-conv-4", "resnet12" or "resnet18".
  std::string architecture = "small-conv-4";
  Shape3 input{32, 32, 3};
  // Per-stage channel widths; empty selects the architecture default.
  std::vector<int> widths;
  // small-conv-4 only: how many leading blocks end in a 2x2 max-pool.
  int pooled_blocks = 3;
  int norm_groups = 1;
};

std::vector<int> default_widths(const std::string& architecture);

// Feature extractor producing the last convolutional stage as a FeatureMap.
class Backbone {
 public:
  Backbone(BackboneConfig config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  const Shape3& input_shape() const { return config_.input; }
  const Shape3& output_shape() const { return output_shape_; }
  // Input pixels per feature-map patch along each axis.
  int cumulative_stride() const { return config_.input.height / output_shape_.height; }

  FeatureMap forward(const Tensor3& image) const;
  // Forward pass that records what backward() needs.
  Tensor3 forward_train(const Tensor3& image, LayerCache& trace) const;
  void backward(const Tensor3& grad_map, const LayerCache& trace);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();
  std::size_t parameter_count() const;
  // FNV-1a over the raw bytes of every parameter, in module order.
  std::uint64_t parameter_hash() const;

 private:
  void check_input(const Tensor3& image) const;

  BackboneConfig config_;
  Sequential net_;
  Shape3 output_shape_;
};

}  // namespace fscil::model
