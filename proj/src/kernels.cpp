#include "fprune/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "fprune/errors.hpp"

namespace fprune {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

void require_rank(const Tensor& t, std::size_t rank, const char* operand) {
  if (t.rank() != rank) {
    throw ShapeError(operand, "expected rank " + std::to_string(rank) +
                                  ", got shape " + t.shape_string());
  }
}

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, ho, wo;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t plane() const { return ho * wo; }
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight,
                   ConvGeometry g) {
  require_rank(input, 4, "input");
  require_rank(weight, 4, "weight");
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("weight", "filter depth " + std::to_string(weight.dim(1)) +
                                   " does not match input channels " +
                                   std::to_string(input.dim(1)));
  }
  if (g.stride == 0) throw ConfigError("convolution stride must be positive");
  ConvDims d{};
  d.n = input.dim(0);
  d.c = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.f = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.ho = conv_output_extent(d.h, d.kh, g.stride, g.pad);
  d.wo = conv_output_extent(d.w, d.kw, g.stride, g.pad);
  return d;
}

// cols is [C*kh*kw, Ho*Wo] for one image.
void im2col(const double* image, const ConvDims& d, ConvGeometry g,
            double* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < d.c; ++c) {
    const double* plane = image + c * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        double* row = cols + ((c * d.kh + i) * d.kw + j) * d.plane();
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oh * g.stride + i) - pad;
          double* out = row + oh * d.wo;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(d.h)) {
            std::fill(out, out + d.wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(y) * d.w;
          for (std::size_t ow = 0; ow < d.wo; ++ow) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ow * g.stride + j) - pad;
            out[ow] = (x < 0 || x >= static_cast<std::ptrdiff_t>(d.w))
                          ? 0.0
                          : src[x];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvDims& d, ConvGeometry g,
                double* image) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < d.c; ++c) {
    double* plane = image + c * d.h * d.w;
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        const double* row = cols + ((c * d.kh + i) * d.kw + j) * d.plane();
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oh * g.stride + i) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(d.h)) continue;
          double* dst = plane + static_cast<std::size_t>(y) * d.w;
          const double* in = row + oh * d.wo;
          for (std::size_t ow = 0; ow < d.wo; ++ow) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ow * g.stride + j) - pad;
            if (x >= 0 && x < static_cast<std::ptrdiff_t>(d.w)) dst[x] += in[ow];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvDims& d, ConvGeometry g) {
  return d.kh == 1 && d.kw == 1 && g.stride == 1 && g.pad == 0;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ConfigError("stride must be positive");
  const std::size_t padded = in + 2 * pad;
  if (padded < kernel) {
    throw ConfigError("kernel extent " + std::to_string(kernel) +
                      " exceeds padded input extent " + std::to_string(padded));
  }
  if ((padded - kernel) % stride != 0) {
    throw ConfigError("output size is not exact: (" + std::to_string(in) +
                      " + 2*" + std::to_string(pad) + " - " +
                      std::to_string(kernel) + ") not divisible by stride " +
                      std::to_string(stride));
  }
  return (padded - kernel) / stride + 1;
}

std::size_t pool_output_extent(std::size_t in, std::size_t k,
                               std::size_t stride) {
  if (k == 0 || stride == 0) throw ConfigError("pool window and stride must be positive");
  if (in < k) {
    throw ConfigError("pool window " + std::to_string(k) +
                      " larger than input extent " + std::to_string(in));
  }
  return (in - k) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry geometry, MacCounter* counter) {
  const ConvDims d = conv_dims(input, weight, geometry);
  if (bias.rank() != 1 || bias.dim(0) != d.f) {
    throw ShapeError("bias", "expected [" + std::to_string(d.f) + "], got " +
                                 bias.shape_string());
  }
  Tensor output({d.n, d.f, d.ho, d.wo});
  const ConstMatrixMap w(weight.raw(), d.f, d.patch());
  const ConstVectorMap b(bias.raw(), d.f);
  const bool pointwise = is_pointwise(d, geometry);
  RowMatrix cols(pointwise ? 0 : d.patch(), pointwise ? 0 : d.plane());
  for (std::size_t n = 0; n < d.n; ++n) {
    const double* image = input.raw() + n * d.c * d.h * d.w;
    MatrixMap out(output.raw() + n * d.f * d.plane(), d.f, d.plane());
    if (pointwise) {
      out.noalias() = w * ConstMatrixMap(image, d.c, d.plane());
    } else {
      im2col(image, d, geometry, cols.data());
      out.noalias() = w * cols;
    }
    out.colwise() += b;
  }
  if (counter) counter->macs += d.n * d.f * d.patch() * d.plane();
  return output;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_output, ConvGeometry geometry) {
  const ConvDims d = conv_dims(input, weight, geometry);
  if (grad_output.shape() != Shape{d.n, d.f, d.ho, d.wo}) {
    throw ShapeError("grad_output",
                     "expected " + shape_to_string({d.n, d.f, d.ho, d.wo}) +
                         ", got " + grad_output.shape_string());
  }
  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()),
                    Tensor({d.f})};
  const ConstMatrixMap w(weight.raw(), d.f, d.patch());
  MatrixMap gw(grads.weight.raw(), d.f, d.patch());
  Eigen::Map<Eigen::VectorXd> gb(grads.bias.raw(), d.f);
  const bool pointwise = is_pointwise(d, geometry);
  RowMatrix cols(pointwise ? 0 : d.patch(), pointwise ? 0 : d.plane());
  RowMatrix grad_cols(d.patch(), d.plane());
  for (std::size_t n = 0; n < d.n; ++n) {
    const double* image = input.raw() + n * d.c * d.h * d.w;
    double* grad_image = grads.input.raw() + n * d.c * d.h * d.w;
    const ConstMatrixMap dy(grad_output.raw() + n * d.f * d.plane(), d.f,
                            d.plane());
    gb += dy.rowwise().sum();
    if (pointwise) {
      gw.noalias() += dy * ConstMatrixMap(image, d.c, d.plane()).transpose();
      MatrixMap(grad_image, d.c, d.plane()).noalias() = w.transpose() * dy;
    } else {
      im2col(image, d, geometry, cols.data());
      gw.noalias() += dy * cols.transpose();
      grad_cols.noalias() = w.transpose() * dy;
      col2im_add(grad_cols.data(), d, geometry, grad_image);
    }
  }
  return grads;
}

Tensor relu(const Tensor& input) {
  Tensor output(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    output[i] = input[i] > 0.0 ? input[i] : 0.0;
  }
  return output;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  if (!input.same_shape(grad_output)) {
    throw ShapeError("grad_output", "expected " + input.shape_string() +
                                        ", got " + grad_output.shape_string());
  }
  Tensor grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    grad[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
  }
  return grad;
}

namespace {

template <typename Visit>
void for_each_pool_window(const Tensor& input, PoolGeometry g, Visit&& visit) {
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t ho = pool_output_extent(h, g.k, g.stride);
  const std::size_t wo = pool_output_extent(w, g.k, g.stride);
  std::size_t out_index = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow, ++out_index) {
        std::size_t best = base + oh * g.stride * w + ow * g.stride;
        double best_value = input[best];
        for (std::size_t i = 0; i < g.k; ++i) {
          for (std::size_t j = 0; j < g.k; ++j) {
            const std::size_t at = base + (oh * g.stride + i) * w + ow * g.stride + j;
            if (input[at] > best_value) {
              best_value = input[at];
              best = at;
            }
          }
        }
        visit(out_index, best);
      }
    }
  }
}

Shape pool_output_shape(const Tensor& input, PoolGeometry g) {
  require_rank(input, 4, "input");
  return {input.dim(0), input.dim(1),
          pool_output_extent(input.dim(2), g.k, g.stride),
          pool_output_extent(input.dim(3), g.k, g.stride)};
}

}  // namespace

Tensor maxpool2d(const Tensor& input, PoolGeometry geometry) {
  Tensor output(pool_output_shape(input, geometry));
  for_each_pool_window(input, geometry, [&](std::size_t out, std::size_t at) {
    output[out] = input[at];
  });
  return output;
}

Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output,
                          PoolGeometry geometry) {
  const Shape expected = pool_output_shape(input, geometry);
  if (grad_output.shape() != expected) {
    throw ShapeError("grad_output", "expected " + shape_to_string(expected) +
                                        ", got " + grad_output.shape_string());
  }
  Tensor grad(input.shape());
  for_each_pool_window(input, geometry, [&](std::size_t out, std::size_t at) {
    grad[at] += grad_output[out];
  });
  return grad;
}

Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const Tensor& bias, MacCounter* counter) {
  require_rank(input, 2, "input");
  require_rank(weight, 2, "weight");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != d) {
    throw ShapeError("weight", "expected inner extent " + std::to_string(d) +
                                   ", got shape " + weight.shape_string());
  }
  if (bias.rank() != 1 || bias.dim(0) != m) {
    throw ShapeError("bias", "expected [" + std::to_string(m) + "], got " +
                                 bias.shape_string());
  }
  Tensor output({n, m});
  MatrixMap out(output.raw(), n, m);
  out.noalias() = ConstMatrixMap(input.raw(), n, d) *
                  ConstMatrixMap(weight.raw(), m, d).transpose();
  out.rowwise() += ConstVectorMap(bias.raw(), m).transpose();
  if (counter) counter->macs += n * m * d;
  return output;
}

FcGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                 const Tensor& grad_output) {
  require_rank(input, 2, "input");
  require_rank(weight, 2, "weight");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != d) {
    throw ShapeError("weight", "expected inner extent " + std::to_string(d) +
                                   ", got shape " + weight.shape_string());
  }
  if (grad_output.shape() != Shape{n, m}) {
    throw ShapeError("grad_output", "expected " + shape_to_string({n, m}) +
                                        ", got " + grad_output.shape_string());
  }
  FcGrads grads{Tensor(input.shape()), Tensor(weight.shape()), Tensor({m})};
  const ConstMatrixMap dy(grad_output.raw(), n, m);
  MatrixMap(grads.input.raw(), n, d).noalias() =
      dy * ConstMatrixMap(weight.raw(), m, d);
  MatrixMap(grads.weight.raw(), m, d).noalias() =
      dy.transpose() * ConstMatrixMap(input.raw(), n, d);
  Eigen::Map<Eigen::VectorXd>(grads.bias.raw(), m) = dy.colwise().sum().transpose();
  return grads;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 std::span<const int> labels) {
  require_rank(logits, 2, "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("labels", "expected " + std::to_string(n) +
                                   " labels, got " + std::to_string(labels.size()));
  }
  LossResult result{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw InputError("label " + std::to_string(label) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(k) +
                       ")");
    }
    const double* row = logits.raw() + i * k;
    double* grad = result.grad.raw() + i * k;
    const double peak = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      grad[j] = std::exp(row[j] - peak);
      denom += grad[j];
    }
    const double log_denom = std::log(denom);
    result.loss += (log_denom - (row[label] - peak)) * inv_n;
    for (std::size_t j = 0; j < k; ++j) {
      grad[j] = grad[j] / denom * inv_n;
    }
    grad[label] -= inv_n;
  }
  return result;
}

}  // namespace fprune
