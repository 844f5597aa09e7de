#include "tensor/grad_check.hpp"

#include "common/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ibac {

GradCheckResult grad_check(const ScalarFunction& f, std::span<const double> analytic, std::span<const double> point,
                           double h) {
  if (!(h > 0.0)) throw Error("grad_check: step must be positive");
  if (analytic.size() != point.size()) throw ShapeError("grad_check: gradient and point lengths differ");
  std::vector<double> x(point.begin(), point.end());
  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite function value at coordinate " + std::to_string(i), i);
    }
    const double central = (up - down) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(central)});
    const double rel = std::abs(analytic[i] - central) / scale;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace ibac
