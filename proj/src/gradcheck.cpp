#include "fprune/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fprune/errors.hpp"

namespace fprune {

double finite_diff_check(const ScalarFunction& f, const GradientFunction& grad,
                         const Tensor& point, double eps) {
  if (!(eps > 0.0)) throw InputError("finite difference step must be positive");
  const Tensor analytic = grad(point);
  if (!analytic.same_shape(point)) {
    throw ShapeError("gradient", "expected " + point.shape_string() + ", got " +
                                     analytic.shape_string());
  }
  Tensor probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + eps;
    const double up = f(probe);
    probe[i] = x - eps;
    const double down = f(probe);
    probe[i] = x;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom =
        std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace fprune
