#pragma once

#include <functional>

#include "fprune/tensor.hpp"

namespace fprune {

using ScalarFunction = std::function<double(const Tensor&)>;
using GradientFunction = std::function<Tensor(const Tensor&)>;

// Max over coordinates of |g_analytic - g_fd| / max(1e-8, |g_analytic| + |g_fd|)
// using central differences with step eps.
double finite_diff_check(const ScalarFunction& f, const GradientFunction& grad,
                         const Tensor& point, double eps = 1e-5);

}  // namespace fprune
