#include "fscil/protocol/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fscil::protocol {

SgdMomentum::SgdMomentum(OptimizerConfig config, std::size_t total_steps)
    : config_(config), total_steps_(total_steps) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning_rate must be > 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0) {
    throw std::invalid_argument("optimizer: momentum must be in [0, 1)");
  }
  if (config.weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("optimizer: batch_size must be >= 1");
  if (!(config.clip_norm >= 0.0)) throw std::invalid_argument("optimizer: clip_norm must be >= 0");
}

double SgdMomentum::learning_rate() const {
  if (!config_.cosine_decay || total_steps_ == 0) return config_.learning_rate;
  const double progress = static_cast<double>(step_) / static_cast<double>(total_steps_);
  return 0.5 * config_.learning_rate * (1.0 + std::cos(std::numbers::pi * std::min(1.0, progress)));
}

void SgdMomentum::step(const std::vector<model::Param*>& params) {
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.emplace_back(p->value.size(), 0.0);
  }
  if (velocity_.size() != params.size()) throw std::logic_error("optimizer: parameter set changed");
  const double lr = learning_rate();
  double squared = 0.0;
  for (const auto* p : params)
    for (double g : p->grad) squared += g * g;
  last_grad_norm_ = std::sqrt(squared);
  const double scale = (config_.clip_norm > 0.0 && last_grad_norm_ > config_.clip_norm)
                           ? config_.clip_norm / last_grad_norm_
                           : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = scale * p.grad[j] + config_.weight_decay * p.value[j];
      v[j] = config_.momentum * v[j] + g;
      p.value[j] -= lr * v[j];
    }
  }
  ++step_;
}

}  // namespace fscil::protocol
