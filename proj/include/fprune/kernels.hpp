#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fprune/tensor.hpp"

namespace fprune {

// Counts multiply-accumulates actually executed by the kernels below.
struct MacCounter {
  std::uint64_t macs = 0;
};

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct PoolGeometry {
  std::size_t k = 2;
  std::size_t stride = 2;
};

// Output extent of a zero-padded convolution along one axis. Throws
// ConfigError when the window does not fit or the division is not exact.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t pad);
std::size_t pool_output_extent(std::size_t in, std::size_t k,
                               std::size_t stride);

// input [N,C,H,W], weight [F,C,kh,kw], bias [F] -> [N,F,Ho,Wo]
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry geometry, MacCounter* counter = nullptr);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_output, ConvGeometry geometry);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

// Ties go to the first element in row-major window scan order.
Tensor maxpool2d(const Tensor& input, PoolGeometry geometry);
Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output,
                          PoolGeometry geometry);

// input [N,D], weight [M,D], bias [M] -> [N,M]
Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const Tensor& bias, MacCounter* counter = nullptr);

struct FcGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

FcGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                 const Tensor& grad_output);

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

// Mean cross-entropy over the batch; grad = (softmax - onehot) / N.
LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels);

}  // namespace fprune
