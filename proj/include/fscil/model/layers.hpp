#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fscil/core/random.hpp"
#include "fscil/core/tensor.hpp"

namespace fscil::model {

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::size_t size, double fill = 0.0)
      : name(std::move(n)), value(size, fill), grad(size, 0.0) {}
};

// Whatever a layer needs to run its backward pass for one sample.
struct LayerCache {
  Tensor3 input;
  std::vector<double> buffer;
  std::vector<double> stats;
  std::vector<std::uint32_t> indices;
  std::vector<LayerCache> children;
};

// Per-sample layer. forward() is const and reentrant when called without a
// cache; backward() accumulates into the layer's parameter gradients.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual Shape3 output_shape(const Shape3& input) const = 0;
  virtual Tensor3 forward(const Tensor3& input, LayerCache* cache) const = 0;
  virtual Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) = 0;
  virtual void collect_params(std::vector<Param*>&) {}
  virtual void collect_params(std::vector<const Param*>&) const {}
  virtual void initialize(Rng&) {}
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  Shape3 output_shape(const Shape3& input) const override;
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;
  void collect_params(std::vector<Param*>& out) override { out.push_back(&weight_); }
  void collect_params(std::vector<const Param*>& out) const override { out.push_back(&weight_); }
  void initialize(Rng& rng) override;

 private:
  // Rows are output positions, columns are (ky, kx, c_in) taps.
  std::vector<double> im2col(const Tensor3& input, const Shape3& out) const;

  int in_channels_;
  int out_channels_;
  int kernel_;
  int stride_;
  int padding_;
  Param weight_;  // (kernel * kernel * in_channels) x out_channels, row-major
};

// Normalizes each sample over (h, w, channels-in-group), then applies a
// per-channel affine map.
class GroupNorm final : public Layer {
 public:
  GroupNorm(std::string name, int channels, int groups, double eps = 1e-5);

  std::unique_ptr<Layer> clone() const override { return std::make_unique<GroupNorm>(*this); }
  Shape3 output_shape(const Shape3& input) const override { return input; }
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;
  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_params(std::vector<const Param*>& out) const override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int channels_;
  int groups_;
  double eps_;
  Param gamma_;
  Param beta_;
};

class Relu final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  Shape3 output_shape(const Shape3& input) const override { return input; }
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int padding = 0);

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  Shape3 output_shape(const Shape3& input) const override;
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;

 private:
  int kernel_;
  int stride_;
  int padding_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  bool empty() const { return layers_.empty(); }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }
  Shape3 output_shape(const Shape3& input) const override;
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_params(std::vector<const Param*>& out) const override;
  void initialize(Rng& rng) override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// relu(main(x) + shortcut(x)); an empty shortcut is the identity.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(Sequential main, Sequential shortcut)
      : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  Shape3 output_shape(const Shape3& input) const override { return main_.output_shape(input); }
  Tensor3 forward(const Tensor3& input, LayerCache* cache) const override;
  Tensor3 backward(const Tensor3& grad_output, const LayerCache& cache) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_params(std::vector<const Param*>& out) const override;
  void initialize(Rng& rng) override;

 private:
  Sequential main_;
  Sequential shortcut_;
};

}  // namespace fscil::model
