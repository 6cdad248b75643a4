#include <doctest.h>

#include "testkit/testkit.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace stp;
using testkit::Histogram;

namespace {

Histogram four_values_two_bins() {
  Eigen::VectorXd v(4);
  v << 0, 1, 2, 3;
  return build_histogram(v, 2);
}

}  // namespace

TEST_CASE("build_histogram splits [0,1,2,3] evenly across two bins") {
  const auto h = four_values_two_bins();
  CHECK(h.lo() == 0.0);
  CHECK(h.hi() == 3.0);
  REQUIRE(h.bin_count() == 2);
  CHECK(h.freqs()[0] == 0.5);
  CHECK(h.freqs()[1] == 0.5);
}

TEST_CASE("build_histogram of a constant column is a point mass") {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(3, 5.0);
  for (Eigen::Index bins : {1, 4, 100}) {
    const auto h = build_histogram(v, bins);
    CHECK(h.is_point_mass());
    CHECK(h.lo() == 5.0);
    CHECK(h.hi() == 5.0);
    CHECK(h.bin_count() == 1);
    CHECK(h.freqs()[0] == 1.0);
  }
}

TEST_CASE("build_histogram matches an independent tally on uniform draws") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v(1000);
  for (auto& x : v) x = unit(rng);

  // One-pass tally with the edges written out explicitly.
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<int> tally(10, 0);
  for (double x : v) {
    int k = 0;
    while (k < 9 && x >= lo + (k + 1) * (hi - lo) / 10.0) ++k;
    ++tally[k];
  }

  const auto h = build_histogram(v, 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(h.freqs()[k] == doctest::Approx(tally[k] / 1000.0));
    CHECK(std::abs(h.freqs()[k] - 0.1) <= 0.05);
  }
  CHECK(h.cum()[10] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_histogram puts the maximum in the last bin") {
  Eigen::VectorXd v(3);
  v << 0.0, 0.0, 1.0;
  const auto h = build_histogram(v, 4);
  CHECK(h.freqs()[3] == doctest::Approx(1.0 / 3.0));
  CHECK(h.freqs()[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("build_histogram errors") {
  CHECK_THROWS_AS(build_histogram(Eigen::VectorXd(0), 3), Error);
  Eigen::VectorXd v(2);
  v << 1, 2;
  try {
    build_histogram(v, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonpositiveBinCount);
  }
}

TEST_CASE("ecdf_eval endpoints and interpolation") {
  const auto h = four_values_two_bins();
  CHECK(ecdf_eval(h, 0.0) == 0.0);
  CHECK(ecdf_eval(h, 3.0) == 1.0);
  CHECK(ecdf_eval(h, -5.0) == 0.0);
  CHECK(ecdf_eval(h, 7.0) == 1.0);
  // 0.5 * (0.75 / 1.5)
  CHECK(ecdf_eval(h, 0.75) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(ecdf_eval(h, 1.5) == doctest::Approx(0.5));

  const auto pm = Histogram::point_mass(2.0);
  CHECK(ecdf_eval(pm, 1.999) == 0.0);
  CHECK(ecdf_eval(pm, 2.0) == 1.0);
}

TEST_CASE("quantile_eval endpoints, symmetry and inversion") {
  const auto h = four_values_two_bins();
  CHECK(quantile_eval(h, 0.0) == 0.0);
  CHECK(quantile_eval(h, 1.0) == 3.0);
  CHECK(quantile_eval(h, 0.25) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(ecdf_eval(h, quantile_eval(h, 0.25)) == doctest::Approx(0.25).epsilon(1e-15));

  Array<double> one(1);
  one << 1.0;
  const Histogram uniform(0.0, 4.0, one);
  CHECK(quantile_eval(uniform, 0.5) == 2.0);

  const auto pm = Histogram::point_mass(-1.5);
  for (double t : {0.0, 0.3, 1.0}) CHECK(quantile_eval(pm, t) == -1.5);

  CHECK_THROWS_AS(quantile_eval(h, -0.01), Error);
  CHECK_THROWS_AS(quantile_eval(h, 1.01), Error);
}

TEST_CASE("quantile_eval jumps across empty bins") {
  Array<double> f(3);
  f << 0.5, 0.0, 0.5;
  const Histogram h(0.0, 3.0, f);
  CHECK(quantile_eval(h, 0.5) == doctest::Approx(1.0));  // left limit at the jump
  CHECK(quantile_eval(h, 0.5 + 1e-12) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(ecdf_eval(h, 1.5) == doctest::Approx(0.5));
}

TEST_CASE("sample_quantiles on the midpoint grid") {
  const auto pm = Histogram::point_mass(5.0);
  const SymbolicRepresentation<double> r1({QuantileFunction<double>(pm)}, 4);
  CHECK((r1.sampled() == 5.0).all());

  Array<double> one(1);
  one << 1.0;
  const SymbolicRepresentation<double> r2({QuantileFunction<double>(Histogram(0.0, 1.0, one))}, 2);
  CHECK(r2.sampled()[0] == 0.25);
  CHECK(r2.sampled()[1] == 0.75);

  // Hand evaluation at t = 0.125, 0.375, 0.625, 0.875 over bins [0,1.5), [1.5,3] of mass 1/2 each.
  const SymbolicRepresentation<double> r3({QuantileFunction<double>(four_values_two_bins())}, 4);
  const double expected[] = {0.375, 1.125, 1.875, 2.625};
  for (int k = 0; k < 4; ++k) CHECK(sample_quantiles(r3)[k] == doctest::Approx(expected[k]).epsilon(1e-15));
}

TEST_CASE("pool_tracklet of a single frame gives point masses") {
  Tracklet<double> t{"a", "", FrameFeatureMatrix<double>(1, 3)};
  t.features << 1.0, -2.0, 3.5;
  const auto rep = pool_tracklet(t, PoolingConfig::sqrt(8));
  REQUIRE(rep.feature_dim() == 3);
  for (Eigen::Index m = 0; m < 3; ++m) {
    CHECK(rep.feature(m).histogram().is_point_mass());
    CHECK(rep.feature(m).lo() == t.features(0, m));
  }
}

TEST_CASE("pool_tracklet is invariant to frame order") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = testkit::random_matrix(rng, 1 + trial, 5);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(f.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    FrameFeatureMatrix<double> g(f.rows(), f.cols());
    for (Eigen::Index r = 0; r < f.rows(); ++r) g.row(r) = f.row(perm[static_cast<std::size_t>(r)]);
    const auto a = pool_features(f, PoolingConfig::sqrt(16));
    const auto b = pool_features(g, PoolingConfig::sqrt(16));
    CHECK(a == b);
    CHECK((a.sampled() == b.sampled()).all());
  }
}

TEST_CASE("pool_tracklet matches per-column recomputation") {
  std::mt19937_64 rng(7);
  const auto f = testkit::random_matrix(rng, 16, 8);
  const auto rep = pool_features(f, PoolingConfig::fixed(8, 32));
  REQUIRE(rep.sampled().size() == 8 * 32);
  for (Eigen::Index m = 0; m < 8; ++m) {
    // Standalone histogram: explicit tally, then the oracle quantile.
    std::vector<double> col(f.col(m).begin(), f.col(m).end());
    const double lo = *std::min_element(col.begin(), col.end());
    const double hi = *std::max_element(col.begin(), col.end());
    Array<double> freq = Array<double>::Zero(8);
    for (double x : col) {
      int k = static_cast<int>(std::floor((x - lo) / ((hi - lo) / 8.0)));
      freq[std::clamp(k, 0, 7)] += 1.0 / 16.0;
    }
    const Histogram h(lo, hi, freq);
    for (Eigen::Index k = 0; k < 32; ++k) {
      const double t = (k + 0.5) / 32.0;
      CHECK(rep.sampled()[m * 32 + k] == doctest::Approx(testkit::oracle_quantile(h, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ecdf and quantile properties on random histograms") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  testkit::HistogramShape shape;
  shape.allow_empty_bins = true;
  shape.point_mass_probability = 0.05;
  for (int trial = 0; trial < 300; ++trial) {
    const auto h = testkit::random_histogram(rng, shape);
    double prev_q = -std::numeric_limits<double>::infinity();
    double prev_c = -1.0;
    for (int i = 0; i <= 200; ++i) {
      const double t = i / 200.0;
      const double q = quantile_eval(h, t);
      CHECK(q >= prev_q);
      CHECK(q >= h.lo());
      CHECK(q <= h.hi());
      prev_q = q;
      const double p = h.lo() - 0.1 * (h.hi() - h.lo()) + 1.2 * (h.hi() - h.lo()) * t;
      const double c = ecdf_eval(h, p);
      CHECK(c >= prev_c);
      prev_c = c;
    }
    if (h.is_point_mass()) continue;
    for (int i = 0; i < 50; ++i) {
      const double t = unit(rng);
      const double x = quantile_eval(h, t);
      const auto b = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>((x - h.lo()) / h.bin_width()), 0, h.bin_count() - 1);
      const bool strictly_inside = x > h.edge(b) && x < h.edge(b + 1) && h.freqs()[b] > 0;
      if (strictly_inside) CHECK(std::abs(ecdf_eval(h, x) - t) <= 1e-9);
    }
  }
}

TEST_CASE("pooling is translation and scale equivariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testkit::random_matrix(rng, 20, 3);
    const double c = shift(rng);
    const double s = scale(rng);
    const auto base = pool_features(f, PoolingConfig::sqrt(16));
    const FrameFeatureMatrix<double> shifted = f.array() + c;
    const FrameFeatureMatrix<double> scaled = f * s;
    const auto rs = pool_features(shifted, PoolingConfig::sqrt(16));
    const auto rk = pool_features(scaled, PoolingConfig::sqrt(16));
    for (Eigen::Index i = 0; i < base.sampled().size(); ++i) {
      CHECK(std::abs(rs.sampled()[i] - (base.sampled()[i] + c)) <= 1e-9 * (1.0 + std::abs(c)));
      CHECK(std::abs(rk.sampled()[i] - s * base.sampled()[i]) <= 1e-9 * s * (1.0 + std::abs(base.sampled()[i])));
    }
  }
}
