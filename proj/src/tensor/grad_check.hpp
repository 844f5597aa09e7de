#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace ibac {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

// Compares `analytic` against central differences of `f` around `point`:
// max_i |a_i - c_i| / max(1, |a_i|, |c_i|). A non-finite evaluation raises
// NumericError carrying the coordinate.
GradCheckResult grad_check(const ScalarFunction& f, std::span<const double> analytic, std::span<const double> point,
                           double h);

}  // namespace ibac
