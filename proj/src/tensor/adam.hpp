#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ibac {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update. Throws DivergenceError and leaves both params
// and state untouched when any gradient entry is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config);

}  // namespace ibac
