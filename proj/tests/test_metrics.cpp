#include <doctest.h>

#include "common/csv.hpp"
#include "common/errors.hpp"
#include "metrics/info_metrics.hpp"
#include "metrics/report_io.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace ibac;

namespace {

BinningConfig fixed_bins(std::size_t n, double lo, double hi) {
  BinningConfig b;
  b.n_bins = n;
  b.range_mode = RangeMode::Fixed;
  b.lo = lo;
  b.hi = hi;
  return b;
}

struct Joint {
  std::size_t bx, by;
  std::vector<std::vector<std::size_t>> counts;  // bx x by
};

Joint random_joint(std::mt19937_64& gen) {
  Joint j;
  j.bx = 1 + gen() % 8;
  j.by = 1 + gen() % 8;
  j.counts.assign(j.bx, std::vector<std::size_t>(j.by, 0));
  const int style = static_cast<int>(gen() % 3);
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v) {
      if (style == 0) j.counts[u][v] = gen() % 20;                              // dense
      if (style == 1) j.counts[u][v] = gen() % 4 == 0 ? 1 + gen() % 50 : 0;     // sparse
      if (style == 2) j.counts[u][v] = (u % j.by == v) ? 5 + gen() % 10 : gen() % 2;  // near-diagonal
    }
  j.counts[gen() % j.bx][gen() % j.by] += 1;  // never empty
  return j;
}

// Samples at bin centres of a fixed [0, B) range, realizing the counts exactly.
void realize(const Joint& j, std::vector<double>& x, std::vector<double>& y) {
  x.clear();
  y.clear();
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v)
      for (std::size_t c = 0; c < j.counts[u][v]; ++c) {
        x.push_back(u + 0.5);
        y.push_back(v + 0.5);
      }
}

// Direct evaluation of sum p ln(p / (p_u p_v)) in extended precision.
long double analytic_mi(const Joint& j) {
  long double n = 0;
  std::vector<long double> pu(j.bx, 0), pv(j.by, 0);
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v) n += j.counts[u][v];
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v) {
      pu[u] += j.counts[u][v] / n;
      pv[v] += j.counts[u][v] / n;
    }
  long double mi = 0;
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v)
      if (j.counts[u][v]) {
        const long double p = j.counts[u][v] / n;
        mi += p * std::log(p / (pu[u] * pv[v]));
      }
  return mi;
}

long double analytic_entropy_x(const Joint& j) {
  long double n = 0;
  std::vector<long double> cu(j.bx, 0);
  for (std::size_t u = 0; u < j.bx; ++u)
    for (std::size_t v = 0; v < j.by; ++v) cu[u] += j.counts[u][v], n += j.counts[u][v];
  long double h = 0;
  for (auto c : cu)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

std::vector<double> uniform_samples(std::size_t n, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

}  // namespace

TEST_CASE("binning conventions") {
  const auto b = fixed_bins(4, 0.0, 1.0);
  const std::vector<double> s{0.0, 0.24, 0.25, 0.99, 1.0, -5.0, 7.0};
  CHECK(bin_indices(s, b) == std::vector<std::uint32_t>{0, 0, 1, 3, 3, 0, 3});
  BinningConfig per;
  per.n_bins = 2;
  const std::vector<double> t{3.0, 3.0, 3.0};
  CHECK(bin_indices(t, per) == std::vector<std::uint32_t>{0, 0, 0});
  BinningConfig bad;
  bad.n_bins = 1;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  CHECK_THROWS_AS(validate(fixed_bins(4, 1.0, 1.0)), ConfigError);
}

TEST_CASE("entropy examples") {
  const std::vector<double> c(50, 2.5);
  CHECK(entropy(c) == 0.0);
  const std::vector<double> two{0, 0, 1, 1};
  CHECK(entropy(two, fixed_bins(2, 0, 1)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  std::mt19937_64 gen(1);
  const auto u = uniform_samples(100000, gen);
  CHECK(std::abs(entropy(u, fixed_bins(256, 0, 1)) - std::log(256.0)) < 0.01);
  CHECK(std::abs(entropy(u) - std::log(256.0)) < 0.01);
  CHECK_THROWS_AS(entropy(std::vector<double>{}), EmptyError);
}

TEST_CASE("mutual information examples") {
  const std::vector<double> x{0, 0, 1, 1};
  CHECK(mutual_information(x, x, fixed_bins(2, 0, 1)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  std::mt19937_64 gen(2);
  const auto a = uniform_samples(5000, gen);
  CHECK(mutual_information(a, a) == entropy(a));
  CHECK_THROWS_AS(mutual_information(a, std::vector<double>(4999, 0.0)), ShapeError);

  SUBCASE("independent samples") {
    const auto p = uniform_samples(100000, gen), q = uniform_samples(100000, gen);
    BinningConfig b16;
    b16.n_bins = 16;
    CHECK(mutual_information(p, q, b16) < 0.05);
    // with 256 x 256 cells the plug-in bias (B-1)^2 / 2N dominates; it must match the formula
    const double bias = 255.0 * 255.0 / (2.0 * 100000.0);
    CHECK(mutual_information(p, q) == doctest::Approx(bias).epsilon(0.1));
  }
}

TEST_CASE("pearson examples") {
  std::mt19937_64 gen(3);
  const auto x = testing::normal_vector(100000, gen);
  std::vector<double> y(x.size()), z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] + 3.0, z[i] = -x[i];
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, z) == doctest::Approx(-1.0).epsilon(1e-12));
  const auto noise = testing::normal_vector(x.size(), gen);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + noise[i];
  CHECK(std::abs(pearson(x, y) - 1.0 / std::sqrt(2.0)) < 0.02);
  CHECK_THROWS_AS(pearson(x, std::vector<double>(x.size(), 1.0)), DegenerateError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1.0}, std::vector<double>{1.0}), EmptyError);
}

TEST_CASE("oracle equivalence on enumerated joints") {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 200; ++i) {
    const auto j = random_joint(gen);
    std::vector<double> x, y;
    realize(j, x, y);
    const auto bx = fixed_bins(j.bx < 2 ? 2 : j.bx, 0.0, j.bx < 2 ? 2.0 : static_cast<double>(j.bx));
    const auto by = fixed_bins(j.by < 2 ? 2 : j.by, 0.0, j.by < 2 ? 2.0 : static_cast<double>(j.by));
    CAPTURE(i);
    const auto ix = bin_indices(x, bx), iy = bin_indices(y, by);
    const double mi = mutual_information_of_bins(ix, bx.n_bins, iy, by.n_bins);
    REQUIRE(std::abs(mi - static_cast<double>(analytic_mi(j))) <= 1e-12);
    REQUIRE(std::abs(entropy(x, bx) - static_cast<double>(analytic_entropy_x(j))) <= 1e-12);
    if (j.bx == j.by && j.bx >= 2) {
      REQUIRE(std::abs(mutual_information(x, y, bx) - static_cast<double>(analytic_mi(j))) <= 1e-12);
    }
  }
}

TEST_CASE("MI symmetry, nonnegativity and bounds") {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + gen() % 3000;
    auto x = testing::normal_vector(n, gen);
    auto y = testing::normal_vector(n, gen);
    const double mix = std::uniform_real_distribution<double>(0, 1)(gen);
    for (std::size_t k = 0; k < n; ++k) y[k] = mix * x[k] + (1 - mix) * y[k];
    if (i % 7 == 0) std::fill(y.begin(), y.end(), 1.0);
    if (i % 11 == 0) for (auto& v : x) v = std::round(v);
    BinningConfig b;
    b.n_bins = 2 + gen() % 300;
    const double ixy = mutual_information(x, y, b), iyx = mutual_information(y, x, b);
    REQUIRE(std::abs(ixy - iyx) <= 1e-12);
    REQUIRE(ixy >= -1e-12);
    const double hx = entropy(x, b), hy = entropy(y, b);
    REQUIRE(hx >= 0.0);
    REQUIRE(hy >= 0.0);
    REQUIRE(ixy <= std::min(hx, hy) + 1e-12);
  }
}

TEST_CASE("binning invariance under positive affine rescaling") {
  std::mt19937_64 gen(6);
  int identical = 0;
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 10 + gen() % 2000;
    const auto x = testing::normal_vector(n, gen);
    const auto y = testing::normal_vector(n, gen);
    const double a = std::exp(std::uniform_real_distribution<double>(-3, 3)(gen));
    const double c = std::uniform_real_distribution<double>(-50, 50)(gen);
    std::vector<double> xs(n);
    for (std::size_t k = 0; k < n; ++k) xs[k] = a * x[k] + c;
    BinningConfig b;
    b.n_bins = 2 + gen() % 256;
    // floating rounding can move a sample across an edge; the property is
    // conditional on the histograms agreeing
    if (bin_indices(x, b) != bin_indices(xs, b)) continue;
    ++identical;
    REQUIRE(entropy(x, b) == entropy(xs, b));
    REQUIRE(mutual_information(x, y, b) == mutual_information(xs, y, b));
    REQUIRE(mutual_information(y, x, b) == mutual_information(y, xs, b));
  }
  CHECK(identical >= 100);
}

TEST_CASE("pearson invariance under positive affine transforms") {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 2 + gen() % 1000;
    auto x = testing::normal_vector(n, gen);
    auto y = testing::normal_vector(n, gen);
    const double mix = std::uniform_real_distribution<double>(-1, 1)(gen);
    for (std::size_t k = 0; k < n; ++k) y[k] += mix * x[k];
    const double a1 = std::exp(std::uniform_real_distribution<double>(-2, 2)(gen));
    const double a2 = std::exp(std::uniform_real_distribution<double>(-2, 2)(gen));
    const double c1 = std::uniform_real_distribution<double>(-10, 10)(gen);
    const double c2 = std::uniform_real_distribution<double>(-10, 10)(gen);
    std::vector<double> xt(n), yt(n);
    for (std::size_t k = 0; k < n; ++k) xt[k] = a1 * x[k] + c1, yt[k] = a2 * y[k] + c2;
    const double r = pearson(x, y);
    REQUIRE(r >= -1.0);
    REQUIRE(r <= 1.0);
    REQUIRE(std::abs(std::abs(pearson(xt, yt)) - std::abs(r)) <= 1e-12);
    REQUIRE(std::abs(std::abs(pearson(xt, y)) - std::abs(r)) <= 1e-12);
  }
}

TEST_CASE("alignment_report") {
  std::mt19937_64 gen(8);
  const std::size_t n = 20000;
  DenseMatrix a(n, 3);
  for (auto& v : a.values()) v = std::uniform_real_distribution<double>(-1, 1)(gen);

  SUBCASE("latents equal to actions") {
    const auto r = alignment_report(a, a);
    CHECK(r.d_z == 3);
    CHECK(r.d_a == 3);
    CHECK(r.n == n);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(r.mi_ratio(i, i) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.pearson_abs(i, i) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.max_ratio_per_channel[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(r.mean_max_ratio() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("maxima are column maxima; entries in range") {
    DenseMatrix z(n, 4);
    for (std::size_t k = 0; k < n; ++k) {
      z(k, 0) = a(k, 0) + 0.3 * std::normal_distribution<double>()(gen);
      z(k, 1) = std::normal_distribution<double>()(gen);
      z(k, 2) = a(k, 1) - a(k, 2);
      z(k, 3) = std::tanh(3 * a(k, 2));
    }
    const auto r = alignment_report(z, a);
    for (std::size_t j = 0; j < 3; ++j) {
      double mr = 0, mp = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r.pearson_abs(i, j) >= 0.0);
        CHECK(r.pearson_abs(i, j) <= 1.0);
        CHECK(r.mi_ratio(i, j) >= 0.0);
        CHECK(r.mi_ratio(i, j) <= 1.0 + 1e-12);
        CHECK(r.mi_ratio(i, j) == doctest::Approx(r.mi_nats(i, j) / r.entropy[j]));
        mr = std::max(mr, r.mi_ratio(i, j));
        mp = std::max(mp, r.pearson_abs(i, j));
      }
      CHECK(r.max_ratio_per_channel[j] == mr);
      CHECK(r.max_pearson_per_channel[j] == mp);
    }
  }
  SUBCASE("shuffled latents carry no information") {
    // 5-level actions as in the quantized environments, default 256 bins
    DenseMatrix q(100000, 2);
    for (auto& v : q.values()) v = -1.0 + 0.5 * static_cast<double>(gen() % 5);
    std::vector<std::size_t> perm(q.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    const auto shuffled = select_rows(q, perm);
    const auto r = alignment_report(shuffled, q);
    for (double v : r.mi_ratio.values()) CHECK(v < 0.05);
    // continuous channels need coarser bins for the same statement
    DenseMatrix u(100000, 2);
    for (auto& v : u.values()) v = std::uniform_real_distribution<double>(-1, 1)(gen);
    BinningConfig b64;
    b64.n_bins = 64;
    const auto ru = alignment_report(select_rows(u, perm), u, b64);
    for (double v : ru.mi_ratio.values()) CHECK(v < 0.05);
  }
  SUBCASE("degenerate channels and cells") {
    DenseMatrix acts(100, 2), lat(100, 2);
    for (std::size_t k = 0; k < 100; ++k) {
      acts(k, 0) = static_cast<double>(k % 7);
      acts(k, 1) = 4.0;
      lat(k, 0) = static_cast<double>(k);
      lat(k, 1) = 0.0;
    }
    const auto r = alignment_report(lat, acts);
    CHECK(r.channel_degenerate == std::vector<std::uint8_t>{0, 1});
    CHECK(r.cell_degenerate(1, 0));
    CHECK(r.cell_degenerate(0, 1));
    CHECK(r.mi_ratio(0, 1) == 0.0);
    CHECK(r.pearson_abs(1, 0) == 0.0);
    CHECK(r.mean_max_ratio() == r.max_ratio_per_channel[0]);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(alignment_report(DenseMatrix(1, 2), DenseMatrix(1, 2)), EmptyError);
    CHECK_THROWS_AS(alignment_report(DenseMatrix(5, 2), DenseMatrix(4, 2)), ShapeError);
  }
}

TEST_CASE("4x4 heatmap report serialization") {
  std::mt19937_64 gen(9);
  const auto a = testing::normal_matrix(500, 4, gen);
  auto z = testing::normal_matrix(500, 4, gen);
  for (std::size_t k = 0; k < 500; ++k) z(k, 2) += a(k, 1);
  BinningConfig b;
  b.n_bins = 32;
  const auto r = alignment_report(z, a, b);
  const auto csv = report_to_csv(r);
  CHECK(csv.header == std::vector<std::string>{"i", "j", "abs_pearson", "mi_nats", "h_nats", "ratio", "degenerate_flag"});
  CHECK(csv.rows.size() == 16);
  const auto parsed = parse_csv(csv.to_string());
  CHECK(parsed.rows.size() == 16);
  CHECK(std::stod(parsed.rows[9][5]) == r.mi_ratio(2, 1));  // row-major (i, j), %.17g round trip

  const auto back = report_from_json(report_to_json(r));
  CHECK(back.pearson_abs == r.pearson_abs);
  CHECK(back.mi_ratio == r.mi_ratio);
  CHECK(back.entropy == r.entropy);
  CHECK(back.max_ratio_per_channel == r.max_ratio_per_channel);
  CHECK(back.binning == r.binning);
  CHECK(back.n == 500);
  CHECK(binning_from_json(to_json(fixed_bins(8, -1, 2))) == fixed_bins(8, -1, 2));
}
