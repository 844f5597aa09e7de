#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace ibac {

// SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Order-sensitive combination of 64-bit words into one seed. Each word is
// folded into a SplitMix64 state: s = splitmix64(s ^ word).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) noexcept;

// xoshiro256** seeded by four SplitMix64 outputs of the seed.
//
// Derived streams:
//   uniform()  = (next_u64() >> 11) * 2^-53, in [0, 1)
//   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2), consuming two uniforms
//                (u1 first); the sine branch is discarded so every call
//                consumes exactly two words
//   below(n)   = rejection sampling on the top bits, unbiased
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace ibac
