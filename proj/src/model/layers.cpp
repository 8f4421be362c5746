#include "fscil/model/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace fscil::model {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMatrix>;
using ConstMapRow = Eigen::Map<const RowMatrix>;

int pooled_extent(int size, int kernel, int stride, int padding) {
  const int span = size + 2 * padding - kernel;
  if (span < 0) throw std::invalid_argument("window larger than padded input");
  return span / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
               int padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(name + ".weight",
              static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels) {
  if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || padding < 0) {
    throw std::invalid_argument("Conv2d: invalid geometry for " + name);
  }
}

Shape3 Conv2d::output_shape(const Shape3& input) const {
  if (input.channels != in_channels_) {
    throw std::invalid_argument("Conv2d: expected " + std::to_string(in_channels_) +
                                " input channels, got " + std::to_string(input.channels));
  }
  return {pooled_extent(input.height, kernel_, stride_, padding_),
          pooled_extent(input.width, kernel_, stride_, padding_), out_channels_};
}

void Conv2d::initialize(Rng& rng) {
  const double fan_in = static_cast<double>(kernel_) * kernel_ * in_channels_;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (double& w : weight_.value) w = dist(rng);
}

std::vector<double> Conv2d::im2col(const Tensor3& input, const Shape3& out) const {
  const std::size_t taps = static_cast<std::size_t>(kernel_) * kernel_ * in_channels_;
  std::vector<double> col(static_cast<std::size_t>(out.height) * out.width * taps, 0.0);
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      double* row = col.data() + (static_cast<std::size_t>(oy) * out.width + ox) * taps;
      for (int ky = 0; ky < kernel_; ++ky) {
        const int iy = oy * stride_ - padding_ + ky;
        if (iy < 0 || iy >= input.height()) continue;
        for (int kx = 0; kx < kernel_; ++kx) {
          const int ix = ox * stride_ - padding_ + kx;
          if (ix < 0 || ix >= input.width()) continue;
          const double* src = input.pixel(iy, ix);
          double* dst = row + (static_cast<std::size_t>(ky) * kernel_ + kx) * in_channels_;
          for (int c = 0; c < in_channels_; ++c) dst[c] = src[c];
        }
      }
    }
  }
  return col;
}

Tensor3 Conv2d::forward(const Tensor3& input, LayerCache* cache) const {
  const Shape3 out_shape = output_shape(input.shape());
  const auto rows = static_cast<Eigen::Index>(out_shape.height) * out_shape.width;
  const auto taps = static_cast<Eigen::Index>(kernel_) * kernel_ * in_channels_;
  std::vector<double> col = im2col(input, out_shape);

  Tensor3 out(out_shape);
  MapRow(out.data().data(), rows, out_channels_).noalias() =
      ConstMapRow(col.data(), rows, taps) * ConstMapRow(weight_.value.data(), taps, out_channels_);
  if (cache) {
    cache->input = Tensor3(input.shape());
    cache->buffer = std::move(col);
  }
  return out;
}

Tensor3 Conv2d::backward(const Tensor3& grad_output, const LayerCache& cache) {
  const Shape3 in_shape = cache.input.shape();
  const Shape3 out_shape = grad_output.shape();
  const auto rows = static_cast<Eigen::Index>(out_shape.height) * out_shape.width;
  const auto taps = static_cast<Eigen::Index>(kernel_) * kernel_ * in_channels_;
  ConstMapRow dout(grad_output.data().data(), rows, out_channels_);
  ConstMapRow col(cache.buffer.data(), rows, taps);

  MapRow(weight_.grad.data(), taps, out_channels_).noalias() += col.transpose() * dout;
  RowMatrix dcol = dout * ConstMapRow(weight_.value.data(), taps, out_channels_).transpose();

  Tensor3 grad_input(in_shape);
  for (int oy = 0; oy < out_shape.height; ++oy) {
    for (int ox = 0; ox < out_shape.width; ++ox) {
      const double* row = dcol.data() + (static_cast<std::size_t>(oy) * out_shape.width + ox) * taps;
      for (int ky = 0; ky < kernel_; ++ky) {
        const int iy = oy * stride_ - padding_ + ky;
        if (iy < 0 || iy >= in_shape.height) continue;
        for (int kx = 0; kx < kernel_; ++kx) {
          const int ix = ox * stride_ - padding_ + kx;
          if (ix < 0 || ix >= in_shape.width) continue;
          double* dst = grad_input.pixel(iy, ix);
          const double* src = row + (static_cast<std::size_t>(ky) * kernel_ + kx) * in_channels_;
          for (int c = 0; c < in_channels_; ++c) dst[c] += src[c];
        }
      }
    }
  }
  return grad_input;
}

// ------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(std::string name, int channels, int groups, double eps)
    : channels_(channels),
      groups_(groups),
      eps_(eps),
      gamma_(name + ".gamma", static_cast<std::size_t>(channels), 1.0),
      beta_(name + ".beta", static_cast<std::size_t>(channels), 0.0) {
  if (groups < 1 || channels % groups != 0) {
    throw std::invalid_argument("GroupNorm: " + std::to_string(groups) +
                                " groups do not divide " + std::to_string(channels) + " channels");
  }
}

Tensor3 GroupNorm::forward(const Tensor3& input, LayerCache* cache) const {
  if (input.channels() != channels_) throw std::invalid_argument("GroupNorm: channel mismatch");
  const int per_group = channels_ / groups_;
  const std::size_t pixels = static_cast<std::size_t>(input.height()) * input.width();
  const double count = static_cast<double>(pixels) * per_group;
  const auto x = input.data();

  Tensor3 out(input.shape());
  auto y = out.data();
  std::vector<double> normalized(x.size());
  std::vector<double> inv_std(static_cast<std::size_t>(groups_));
  for (int g = 0; g < groups_; ++g) {
    const int c0 = g * per_group;
    double mean = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) mean += x[p * channels_ + c];
    }
    mean /= count;
    double var = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const double d = x[p * channels_ + c] - mean;
        var += d * d;
      }
    }
    var /= count;
    const double istd = 1.0 / std::sqrt(var + eps_);
    inv_std[static_cast<std::size_t>(g)] = istd;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const std::size_t i = p * channels_ + c;
        normalized[i] = (x[i] - mean) * istd;
        y[i] = gamma_.value[static_cast<std::size_t>(c)] * normalized[i] +
               beta_.value[static_cast<std::size_t>(c)];
      }
    }
  }
  if (cache) {
    cache->input = Tensor3(input.shape());
    cache->buffer = std::move(normalized);
    cache->stats = std::move(inv_std);
  }
  return out;
}

Tensor3 GroupNorm::backward(const Tensor3& grad_output, const LayerCache& cache) {
  const int per_group = channels_ / groups_;
  const std::size_t pixels = static_cast<std::size_t>(grad_output.height()) * grad_output.width();
  const double count = static_cast<double>(pixels) * per_group;
  const auto dy = grad_output.data();
  const auto& xhat = cache.buffer;

  Tensor3 grad_input(grad_output.shape());
  auto dx = grad_input.data();
  for (int g = 0; g < groups_; ++g) {
    const int c0 = g * per_group;
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const std::size_t i = p * channels_ + c;
        const auto cc = static_cast<std::size_t>(c);
        gamma_.grad[cc] += dy[i] * xhat[i];
        beta_.grad[cc] += dy[i];
        const double dxhat = dy[i] * gamma_.value[cc];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat[i];
      }
    }
    const double istd = cache.stats[static_cast<std::size_t>(g)];
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = c0; c < c0 + per_group; ++c) {
        const std::size_t i = p * channels_ + c;
        const double dxhat = dy[i] * gamma_.value[static_cast<std::size_t>(c)];
        dx[i] = istd * (dxhat - sum_dxhat / count - xhat[i] * sum_dxhat_xhat / count);
      }
    }
  }
  return grad_input;
}

// ------------------------------------------------------------------ Relu

Tensor3 Relu::forward(const Tensor3& input, LayerCache* cache) const {
  Tensor3 out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  if (cache) cache->input = input;
  return out;
}

Tensor3 Relu::backward(const Tensor3& grad_output, const LayerCache& cache) {
  Tensor3 grad_input = grad_output;
  auto g = grad_input.data();
  const auto x = cache.input.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] = 0.0;
  }
  return grad_input;
}

// ------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride, int padding)
    : kernel_(kernel), stride_(stride), padding_(padding) {
  if (kernel < 1 || stride < 1 || padding < 0 || padding >= kernel) {
    throw std::invalid_argument("MaxPool2d: invalid geometry");
  }
}

Shape3 MaxPool2d::output_shape(const Shape3& input) const {
  return {pooled_extent(input.height, kernel_, stride_, padding_),
          pooled_extent(input.width, kernel_, stride_, padding_), input.channels};
}

Tensor3 MaxPool2d::forward(const Tensor3& input, LayerCache* cache) const {
  const Shape3 out_shape = output_shape(input.shape());
  const int channels = input.channels();
  Tensor3 out(out_shape);
  std::vector<std::uint32_t> argmax;
  if (cache) argmax.resize(out.size());
  for (int oy = 0; oy < out_shape.height; ++oy) {
    for (int ox = 0; ox < out_shape.width; ++ox) {
      for (int c = 0; c < channels; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_index = 0;
        for (int ky = 0; ky < kernel_; ++ky) {
          const int iy = oy * stride_ - padding_ + ky;
          if (iy < 0 || iy >= input.height()) continue;
          for (int kx = 0; kx < kernel_; ++kx) {
            const int ix = ox * stride_ - padding_ + kx;
            if (ix < 0 || ix >= input.width()) continue;
            const double v = input(iy, ix, c);
            if (v > best) {
              best = v;
              best_index = static_cast<std::uint32_t>(
                  (static_cast<std::size_t>(iy) * input.width() + ix) * channels + c);
            }
          }
        }
        out(oy, ox, c) = best;
        if (cache) {
          argmax[(static_cast<std::size_t>(oy) * out_shape.width + ox) * channels + c] = best_index;
        }
      }
    }
  }
  if (cache) {
    cache->input = Tensor3(input.shape());
    cache->indices = std::move(argmax);
  }
  return out;
}

Tensor3 MaxPool2d::backward(const Tensor3& grad_output, const LayerCache& cache) {
  Tensor3 grad_input(cache.input.shape());
  auto dx = grad_input.data();
  const auto dy = grad_output.data();
  for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.indices[i]] += dy[i];
  return grad_input;
}

// ------------------------------------------------------------ Sequential

Sequential::Sequential(const Sequential& other) {
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Shape3 Sequential::output_shape(const Shape3& input) const {
  Shape3 shape = input;
  for (const auto& layer : layers_) shape = layer->output_shape(shape);
  return shape;
}

Tensor3 Sequential::forward(const Tensor3& input, LayerCache* cache) const {
  if (cache) cache->children.resize(layers_.size());
  Tensor3 x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, cache ? &cache->children[i] : nullptr);
  }
  return x;
}

Tensor3 Sequential::backward(const Tensor3& grad_output, const LayerCache& cache) {
  Tensor3 g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, cache.children[i]);
  return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& layer : layers_) layer->collect_params(out);
}

void Sequential::collect_params(std::vector<const Param*>& out) const {
  for (const auto& layer : layers_) static_cast<const Layer&>(*layer).collect_params(out);
}

void Sequential::initialize(Rng& rng) {
  for (auto& layer : layers_) layer->initialize(rng);
}

// --------------------------------------------------------- ResidualBlock

Tensor3 ResidualBlock::forward(const Tensor3& input, LayerCache* cache) const {
  if (cache) cache->children.resize(2);
  Tensor3 sum = main_.forward(input, cache ? &cache->children[0] : nullptr);
  if (shortcut_.empty()) {
    sum += input;
  } else {
    sum += shortcut_.forward(input, cache ? &cache->children[1] : nullptr);
  }
  if (cache) cache->buffer.assign(sum.data().begin(), sum.data().end());
  for (double& v : sum.data()) v = v > 0.0 ? v : 0.0;
  return sum;
}

Tensor3 ResidualBlock::backward(const Tensor3& grad_output, const LayerCache& cache) {
  Tensor3 g = grad_output;
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    if (!(cache.buffer[i] > 0.0)) gd[i] = 0.0;
  }
  Tensor3 grad_input = main_.backward(g, cache.children[0]);
  if (shortcut_.empty()) {
    grad_input += g;
  } else {
    grad_input += shortcut_.backward(g, cache.children[1]);
  }
  return grad_input;
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
  main_.collect_params(out);
  shortcut_.collect_params(out);
}

void ResidualBlock::collect_params(std::vector<const Param*>& out) const {
  main_.collect_params(out);
  shortcut_.collect_params(out);
}

void ResidualBlock::initialize(Rng& rng) {
  main_.initialize(rng);
  shortcut_.initialize(rng);
}

}  // namespace fscil::model
