#pragma once

#include <vector>

#include "fprune/tensor.hpp"

namespace fprune {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Velocity buffers, one per parameter tensor. Empty until the first step.
struct SgdState {
  std::vector<Tensor> velocity;
};

// v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v
void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, const SgdOptions& options,
              SgdState& state);

}  // namespace fprune
