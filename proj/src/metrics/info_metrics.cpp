#include "metrics/info_metrics.hpp"

#include "common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ibac {

namespace {

// sum_c c ln c over nonzero counts
double count_log_sum(const std::vector<std::uint64_t>& counts) {
  double s = 0.0;
  for (auto c : counts) {
    if (c > 1) s += static_cast<double>(c) * std::log(static_cast<double>(c));
  }
  return s;
}

std::vector<std::uint64_t> histogram(std::span<const std::uint32_t> bins, std::size_t n_bins) {
  std::vector<std::uint64_t> counts(n_bins, 0);
  for (auto b : bins) {
    if (b >= n_bins) throw ShapeError("bin index out of range");
    ++counts[b];
  }
  return counts;
}

}  // namespace

void validate(const BinningConfig& b) {
  if (b.n_bins < 2) throw ConfigError("binning.n_bins: must be >= 2");
  if (b.range_mode == RangeMode::Fixed && !(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo < b.hi)) {
    throw ConfigError("binning range: need finite lo < hi");
  }
}

std::vector<std::uint32_t> bin_indices(std::span<const double> samples, const BinningConfig& binning) {
  validate(binning);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) throw NumericError("non-finite sample at index " + std::to_string(i), i);
  }
  double lo = binning.lo;
  double hi = binning.hi;
  if (binning.range_mode == RangeMode::PerChannelMinMax && !samples.empty()) {
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    lo = *mn;
    hi = *mx;
  }
  std::vector<std::uint32_t> out(samples.size(), 0);
  if (!(hi > lo)) return out;
  const double n = static_cast<double>(binning.n_bins);
  const double width = hi - lo;
  const auto top = static_cast<std::uint32_t>(binning.n_bins - 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double pos = std::floor((samples[i] - lo) / width * n);
    out[i] = pos <= 0.0 ? 0u : pos >= n ? top : static_cast<std::uint32_t>(pos);
  }
  return out;
}

double entropy_of_bins(std::span<const std::uint32_t> bins, std::size_t n_bins) {
  if (bins.empty()) throw EmptyError("entropy needs at least one sample");
  const auto counts = histogram(bins, n_bins);
  const double n = static_cast<double>(bins.size());
  // H = ln N - (1/N) sum c ln c
  return std::max(0.0, std::log(n) - count_log_sum(counts) / n);
}

double mutual_information_of_bins(std::span<const std::uint32_t> x, std::size_t nx, std::span<const std::uint32_t> y,
                                  std::size_t ny) {
  if (x.size() != y.size()) {
    throw ShapeError("mutual_information: lengths differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  if (x.empty()) throw EmptyError("mutual_information needs at least one sample");
  const auto cx = histogram(x, nx);
  const auto cy = histogram(y, ny);
  std::vector<std::uint64_t> joint(nx * ny, 0);
  for (std::size_t i = 0; i < x.size(); ++i) ++joint[static_cast<std::size_t>(x[i]) * ny + y[i]];
  const double n = static_cast<double>(x.size());
  // I = (1/N) sum c_uv ln(N c_uv / (c_u c_v)) = ln N + (1/N)(S_xy - S_x - S_y)
  // with S = sum c ln c; symmetric in x and y by construction.
  const double mi = std::log(n) + (count_log_sum(joint) - count_log_sum(cx) - count_log_sum(cy)) / n;
  return std::max(0.0, mi);
}

double entropy(std::span<const double> samples, const BinningConfig& binning) {
  if (samples.empty()) throw EmptyError("entropy needs at least one sample");
  return entropy_of_bins(bin_indices(samples, binning), binning.n_bins);
}

double mutual_information(std::span<const double> x, std::span<const double> y, const BinningConfig& binning) {
  if (x.size() != y.size()) {
    throw ShapeError("mutual_information: lengths differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  return mutual_information_of_bins(bin_indices(x, binning), binning.n_bins, bin_indices(y, binning), binning.n_bins);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: lengths differ");
  if (x.size() < 2) throw EmptyError("pearson needs at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("pearson undefined: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double AlignmentReport::mean_max_ratio() const {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t j = 0; j < d_a; ++j) {
    if (channel_degenerate[j]) continue;
    s += max_ratio_per_channel[j];
    ++c;
  }
  return c ? s / static_cast<double>(c) : 0.0;
}

double AlignmentReport::mean_max_pearson() const {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t j = 0; j < d_a; ++j) {
    if (channel_degenerate[j]) continue;
    s += max_pearson_per_channel[j];
    ++c;
  }
  return c ? s / static_cast<double>(c) : 0.0;
}

AlignmentReport alignment_report(const DenseMatrix& latents, const DenseMatrix& actions, const BinningConfig& binning) {
  validate(binning);
  if (latents.rows() != actions.rows()) {
    throw ShapeError("alignment_report: " + std::to_string(latents.rows()) + " latent rows vs " +
                     std::to_string(actions.rows()) + " action rows");
  }
  if (latents.cols() == 0 || actions.cols() == 0) throw ShapeError("alignment_report: need D_z, D_a >= 1");
  if (latents.rows() < 2) throw EmptyError("alignment_report needs at least two samples");

  AlignmentReport r;
  r.d_z = latents.cols();
  r.d_a = actions.cols();
  r.n = latents.rows();
  r.binning = binning;
  r.pearson_abs = DenseMatrix(r.d_z, r.d_a);
  r.mi_nats = DenseMatrix(r.d_z, r.d_a);
  r.mi_ratio = DenseMatrix(r.d_z, r.d_a);
  r.degenerate.assign(r.d_z * r.d_a, 0);
  r.entropy.assign(r.d_a, 0.0);
  r.channel_degenerate.assign(r.d_a, 0);
  r.max_pearson_per_channel.assign(r.d_a, 0.0);
  r.max_ratio_per_channel.assign(r.d_a, 0.0);

  std::vector<std::vector<double>> zc(r.d_z), ac(r.d_a);
  std::vector<std::vector<std::uint32_t>> zb(r.d_z), ab(r.d_a);
  for (std::size_t i = 0; i < r.d_z; ++i) {
    zc[i] = latents.column(i);
    zb[i] = bin_indices(zc[i], binning);
  }
  for (std::size_t j = 0; j < r.d_a; ++j) {
    ac[j] = actions.column(j);
    ab[j] = bin_indices(ac[j], binning);
    r.entropy[j] = entropy_of_bins(ab[j], binning.n_bins);
    r.channel_degenerate[j] = r.entropy[j] == 0.0;
  }

  for (std::size_t i = 0; i < r.d_z; ++i) {
    for (std::size_t j = 0; j < r.d_a; ++j) {
      bool degenerate = r.channel_degenerate[j] != 0;
      try {
        r.pearson_abs(i, j) = std::abs(pearson(zc[i], ac[j]));
      } catch (const DegenerateError&) {
        r.pearson_abs(i, j) = 0.0;
        degenerate = true;
      }
      r.mi_nats(i, j) = mutual_information_of_bins(zb[i], binning.n_bins, ab[j], binning.n_bins);
      r.mi_ratio(i, j) = r.channel_degenerate[j] ? 0.0 : r.mi_nats(i, j) / r.entropy[j];
      r.degenerate[i * r.d_a + j] = degenerate;
      if (!r.channel_degenerate[j]) {
        r.max_pearson_per_channel[j] = std::max(r.max_pearson_per_channel[j], r.pearson_abs(i, j));
        r.max_ratio_per_channel[j] = std::max(r.max_ratio_per_channel[j], r.mi_ratio(i, j));
      }
    }
  }
  return r;
}

}  // namespace ibac
