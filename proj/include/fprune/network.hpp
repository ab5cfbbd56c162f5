#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "fprune/kernels.hpp"
#include "fprune/net_spec.hpp"
#include "fprune/tensor.hpp"

namespace fprune {

struct LayerParams {
  Tensor weight;  // conv: [n_k, i_k, kh, kw]; fc: [out, in]
  Tensor bias;    // [n_k] or [out]
};

// Parameters keyed by layer id; iteration order is the canonical parameter
// order used by serialization and SGD.
using ParamMap = std::map<int, LayerParams>;

struct ForwardResult {
  Tensor logits;
  // Post-ReLU output of each tapped conv layer, [N, n_k, h, w].
  std::map<int, Tensor> taps;
};

struct BackwardResult {
  double loss = 0.0;
  Tensor logits;
  ParamMap grads;
};

class Network {
 public:
  // Validates the spec and that every parameter matches its layer.
  Network(NetworkSpec spec, ParamMap params);

  // He initialization: weights ~ N(0, 2/fan_in), biases zero.
  static Network build(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const ParamMap& params() const noexcept { return params_; }
  const LayerParams& params(int id) const;

  // Surgery access. Call validate() after editing.
  NetworkSpec& mutable_spec() noexcept { return spec_; }
  LayerParams& mutable_params(int id);
  ParamMap& mutable_param_map() noexcept { return params_; }
  void validate() const;

  ForwardResult forward(const Tensor& batch, const std::set<int>& taps = {},
                        MacCounter* counter = nullptr) const;
  Tensor logits(const Tensor& batch) const { return forward(batch).logits; }

  // Mean softmax cross-entropy over the batch and gradients of every parameter.
  BackwardResult backward(const Tensor& batch, std::span<const int> labels) const;

  // weight, bias for each parameterized layer in id order.
  std::vector<Tensor*> parameter_tensors();
  std::vector<int> conv_ids() const { return conv_layer_ids(spec_); }
  std::size_t parameter_count() const;

 private:
  struct Frame;
  Tensor run(const Tensor& batch, const std::set<int>& taps, MacCounter* counter,
             std::map<int, Tensor>* tapped, std::vector<Frame>* tape) const;

  NetworkSpec spec_;
  ParamMap params_;
};

std::vector<const Tensor*> gradient_tensors(const ParamMap& grads);

}  // namespace fprune
