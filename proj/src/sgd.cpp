#include "fprune/sgd.hpp"

#include <string>

#include "fprune/errors.hpp"

namespace fprune {

void sgd_step(const std::vector<Tensor*>& params,
              const std::vector<const Tensor*>& grads, const SgdOptions& options,
              SgdState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("grads", "expected " + std::to_string(params.size()) +
                                  " gradient tensors, got " +
                                  std::to_string(grads.size()));
  }
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape());
  }
  if (state.velocity.size() != params.size()) {
    throw ShapeError("state", "velocity buffer count " +
                                  std::to_string(state.velocity.size()) +
                                  " does not match " +
                                  std::to_string(params.size()) + " parameters");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    Tensor& v = state.velocity[t];
    if (!p.same_shape(g)) {
      throw ShapeError("grads[" + std::to_string(t) + "]",
                       "expected " + p.shape_string() + ", got " + g.shape_string());
    }
    if (!p.same_shape(v)) {
      throw ShapeError("state[" + std::to_string(t) + "]",
                       "expected " + p.shape_string() + ", got " + v.shape_string());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = options.momentum * v[i] + g[i] + options.weight_decay * p[i];
      p[i] -= options.lr * v[i];
    }
  }
}

}  // namespace fprune
