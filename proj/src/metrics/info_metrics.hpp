#pragma once

#include "tensor/dense_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ibac {

enum class RangeMode { PerChannelMinMax, Fixed };

// Histogram binning. Per-channel ranges span the sample min/max; fixed ranges
// clamp out-of-range samples into the edge bins. Bins are half-open except
// the top one, which also takes samples equal to the upper edge. A zero-width
// range puts everything in bin 0.
struct BinningConfig {
  std::size_t n_bins = 256;
  RangeMode range_mode = RangeMode::PerChannelMinMax;
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const BinningConfig&, const BinningConfig&) = default;
};

void validate(const BinningConfig& binning);

std::vector<std::uint32_t> bin_indices(std::span<const double> samples, const BinningConfig& binning);

// Plug-in estimators in nats.
double entropy(std::span<const double> samples, const BinningConfig& binning = {});
double mutual_information(std::span<const double> x, std::span<const double> y, const BinningConfig& binning = {});

// Same estimators on precomputed bin indices (counts over `n_bins` cells).
double entropy_of_bins(std::span<const std::uint32_t> bins, std::size_t n_bins);
double mutual_information_of_bins(std::span<const std::uint32_t> x, std::size_t nx, std::span<const std::uint32_t> y,
                                  std::size_t ny);

// Throws DegenerateError when either input has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct AlignmentReport {
  std::size_t d_z = 0;
  std::size_t d_a = 0;
  std::size_t n = 0;
  BinningConfig binning;
  DenseMatrix pearson_abs;  // d_z x d_a
  DenseMatrix mi_nats;      // d_z x d_a
  DenseMatrix mi_ratio;     // d_z x d_a, 0 where degenerate
  std::vector<std::uint8_t> degenerate;  // d_z x d_a row-major
  std::vector<double> entropy;           // H(a_j)
  std::vector<std::uint8_t> channel_degenerate;  // H(a_j) == 0
  std::vector<double> max_pearson_per_channel;
  std::vector<double> max_ratio_per_channel;

  bool cell_degenerate(std::size_t i, std::size_t j) const { return degenerate[i * d_a + j] != 0; }
  // Means over non-degenerate action channels (0 if there are none).
  double mean_max_ratio() const;
  double mean_max_pearson() const;
};

// Rows are samples. Cells whose Pearson is undefined record 0 and are
// flagged; channels with H(a_j) = 0 are flagged and left out of the means.
AlignmentReport alignment_report(const DenseMatrix& latents, const DenseMatrix& actions,
                                 const BinningConfig& binning = {});

}  // namespace ibac
