#include "fscil/model/backbone.hpp"

#include <cstring>
#include <stdexcept>

namespace fscil::model {

std::vector<int> default_widths(const std::string& architecture) {
  if (architecture == "small-conv-4") return {64, 64, 64, 64};
  if (architecture == "resnet12") return {64, 160, 320, 640};
  if (architecture == "resnet18") return {64, 128, 256, 512};
  throw std::invalid_argument("unknown backbone architecture '" + architecture + "'");
}

namespace {

void conv_norm(Sequential& seq, const std::string& name, int in, int out, int kernel, int stride,
               int padding, int groups) {
  seq.add(std::make_unique<Conv2d>(name + ".conv", in, out, kernel, stride, padding));
  seq.add(std::make_unique<GroupNorm>(name + ".norm", out, groups));
}

int groups_for(int channels, int requested) {
  int g = std::max(1, std::min(requested, channels));
  while (channels % g != 0) --g;
  return g;
}

Sequential build_small_conv(const BackboneConfig& cfg, const std::vector<int>& widths) {
  if (widths.size() != 4) throw std::invalid_argument("small-conv-4 needs exactly 4 widths");
  if (cfg.pooled_blocks < 0 || cfg.pooled_blocks > 4) {
    throw std::invalid_argument("small-conv-4: pooled_blocks must be in [0, 4]");
  }
  Sequential net;
  int in = cfg.input.channels;
  for (int b = 0; b < 4; ++b) {
    const int out = widths[static_cast<std::size_t>(b)];
    const std::string name = "block" + std::to_string(b + 1);
    conv_norm(net, name, in, out, 3, 1, 1, groups_for(out, cfg.norm_groups));
    net.add(std::make_unique<Relu>());
    if (b < cfg.pooled_blocks) net.add(std::make_unique<MaxPool2d>(2, 2));
    in = out;
  }
  return net;
}

Sequential build_resnet12(const BackboneConfig& cfg, const std::vector<int>& widths) {
  if (widths.size() != 4) throw std::invalid_argument("resnet12 needs exactly 4 widths");
  Sequential net;
  int in = cfg.input.channels;
  for (int b = 0; b < 4; ++b) {
    const int out = widths[static_cast<std::size_t>(b)];
    const int groups = groups_for(out, cfg.norm_groups);
    const std::string name = "layer" + std::to_string(b + 1);
    Sequential main;
    conv_norm(main, name + ".c1", in, out, 3, 1, 1, groups);
    main.add(std::make_unique<Relu>());
    conv_norm(main, name + ".c2", out, out, 3, 1, 1, groups);
    main.add(std::make_unique<Relu>());
    conv_norm(main, name + ".c3", out, out, 3, 1, 1, groups);
    Sequential shortcut;
    conv_norm(shortcut, name + ".shortcut", in, out, 1, 1, 0, groups);
    net.add(std::make_unique<ResidualBlock>(std::move(main), std::move(shortcut)));
    net.add(std::make_unique<MaxPool2d>(2, 2));
    in = out;
  }
  return net;
}

Sequential build_resnet18(const BackboneConfig& cfg, const std::vector<int>& widths) {
  if (widths.size() != 4) throw std::invalid_argument("resnet18 needs exactly 4 widths");
  Sequential net;
  const int stem = widths[0];
  conv_norm(net, "stem", cfg.input.channels, stem, 7, 2, 3, groups_for(stem, cfg.norm_groups));
  net.add(std::make_unique<Relu>());
  net.add(std::make_unique<MaxPool2d>(3, 2, 1));
  int in = stem;
  for (int stage = 0; stage < 4; ++stage) {
    const int out = widths[static_cast<std::size_t>(stage)];
    const int groups = groups_for(out, cfg.norm_groups);
    for (int block = 0; block < 2; ++block) {
      const int stride = (stage > 0 && block == 0) ? 2 : 1;
      const std::string name =
          "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
      Sequential main;
      conv_norm(main, name + ".c1", in, out, 3, stride, 1, groups);
      main.add(std::make_unique<Relu>());
      conv_norm(main, name + ".c2", out, out, 3, 1, 1, groups);
      Sequential shortcut;
      if (stride != 1 || in != out) conv_norm(shortcut, name + ".shortcut", in, out, 1, stride, 0, groups);
      net.add(std::make_unique<ResidualBlock>(std::move(main), std::move(shortcut)));
      in = out;
    }
  }
  return net;
}

}  // namespace

Backbone::Backbone(BackboneConfig config, std::uint64_t seed) : config_(std::move(config)) {
  if (config_.input.height < 1 || config_.input.width < 1 || config_.input.channels < 1) {
    throw std::invalid_argument("Backbone: input shape must be positive");
  }
  std::vector<int> widths = config_.widths.empty() ? default_widths(config_.architecture)
                                                   : config_.widths;
  config_.widths = widths;
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("Backbone: widths must be positive");
  }
  if (config_.architecture == "small-conv-4") {
    net_ = build_small_conv(config_, widths);
  } else if (config_.architecture == "resnet12") {
    net_ = build_resnet12(config_, widths);
  } else if (config_.architecture == "resnet18") {
    net_ = build_resnet18(config_, widths);
  } else {
    throw std::invalid_argument("unknown backbone architecture '" + config_.architecture + "'");
  }
  output_shape_ = net_.output_shape(config_.input);
  Rng rng(seed);
  net_.initialize(rng);
}

void Backbone::check_input(const Tensor3& image) const {
  if (!(image.shape() == config_.input)) {
    throw std::invalid_argument(
        "Backbone: input shape (" + std::to_string(image.height()) + ", " +
        std::to_string(image.width()) + ", " + std::to_string(image.channels()) +
        ") does not match configured (" + std::to_string(config_.input.height) + ", " +
        std::to_string(config_.input.width) + ", " + std::to_string(config_.input.channels) + ")");
  }
}

FeatureMap Backbone::forward(const Tensor3& image) const {
  check_input(image);
  return FeatureMap(net_.forward(image, nullptr));
}

Tensor3 Backbone::forward_train(const Tensor3& image, LayerCache& trace) const {
  check_input(image);
  return net_.forward(image, &trace);
}

void Backbone::backward(const Tensor3& grad_map, const LayerCache& trace) {
  if (!(grad_map.shape() == output_shape_)) {
    throw std::invalid_argument("Backbone: gradient shape does not match output");
  }
  net_.backward(grad_map, trace);
}

std::vector<Param*> Backbone::params() {
  std::vector<Param*> out;
  net_.collect_params(out);
  return out;
}

std::vector<const Param*> Backbone::params() const {
  std::vector<const Param*> out;
  net_.collect_params(out);
  return out;
}

void Backbone::zero_grad() {
  for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : params()) n += p->value.size();
  return n;
}

std::uint64_t Backbone::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : params()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace fscil::model
