#pragma once

#include <cstddef>
#include <vector>

#include "fscil/model/layers.hpp"

namespace fscil::protocol {

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 32;
  bool cosine_decay = true;
  // Rescale the raw gradient to this global L2 norm when it is larger; 0 disables.
  double clip_norm = 0.0;
};

// SGD with heavy-ball momentum and coupled weight decay. The learning rate
// follows a half cosine from its initial value to zero over total_steps.
class SgdMomentum {
 public:
  SgdMomentum(OptimizerConfig config, std::size_t total_steps);

  double learning_rate() const;
  std::size_t steps_taken() const { return step_; }
  // Global gradient norm seen by the last step, before clipping.
  double last_grad_norm() const { return last_grad_norm_; }
  void step(const std::vector<model::Param*>& params);

 private:
  OptimizerConfig config_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
  double last_grad_norm_ = 0.0;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace fscil::protocol
