#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "compdiff/analytic.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace compdiff;

namespace {
GridOracle std_normal_grid() {
  GridSpec spec{{-6, -6}, {6, 6}, 512};
  Gmm g({{1.0, {0, 0}, Sym2::iso(1.0)}});
  return GridOracle(spec, [&](Vec2 p) { return g.log_density(p); });
}
}  // namespace

TEST_CASE("normalizer of an already-normalized density is one") {
  auto grid = std_normal_grid();
  CHECK(std::abs(grid.log_norm()) < 1e-6);
  // The origin sits mid-cell; bilinear interpolation of the log density
  // contributes ~(dx/2)^2 per axis.
  CHECK(grid.log_density({0, 0}) ==
        doctest::Approx(-1.8378770664093453).epsilon(3e-4));
}

TEST_CASE("log_norm recovers a known scaling constant") {
  GridSpec spec{{-6, -6}, {6, 6}, 512};
  Gmm g({{1.0, {0, 0}, Sym2::iso(1.0)}});
  GridOracle grid(spec, [&](Vec2 p) { return g.log_density(p) + std::log(7.0); });
  CHECK(grid.log_norm() == doctest::Approx(std::log(7.0)).epsilon(1e-6));
}

TEST_CASE("grid scores track the analytic score away from the boundary") {
  auto s = NoiseSchedule::default_linear();
  Gmm ring = make_ring_gmm();
  GridOracle grid(GridSpec{}, [&](Vec2 p) { return ring.log_density(p); });
  auto probes = grid.high_mass_points(0.99, 200);
  CHECK(probes.size() > 50);
  for (const auto& p : probes) {
    Vec2 got = grid.score(p);
    Vec2 want = ring.score(p);
    CHECK((got - want).norm() / std::fmax(1.0, want.norm()) < 2e-3);
  }
}

TEST_CASE("grid sampling matches the marginal CDF (KS at 1%)") {
  Gmm ring = make_ring_gmm();
  GridOracle grid(GridSpec{}, [&](Vec2 p) { return ring.log_density(p); });
  const int n = 100000;
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    RngStream rng(2040, i);
    Vec2 p = grid.sample(rng);
    xs[i] = p.x;
    ys[i] = p.y;
  }
  // Oracle: the analytic ring marginal, restricted/renormalized to the grid
  // bounds (the clipped mass is ~1e-4 and the renormalization keeps the
  // comparison honest).
  auto clipped_cdf = [&](int axis, double v) {
    double lo = ring.marginal_cdf(axis, -1.6), hi = ring.marginal_cdf(axis, 1.6);
    return (ring.marginal_cdf(axis, v) - lo) / (hi - lo);
  };
  double dx = testutil::ks_stat(xs, [&](double v) { return clipped_cdf(0, v); });
  double dy = testutil::ks_stat(ys, [&](double v) { return clipped_cdf(1, v); });
  CHECK(dx < testutil::ks_crit_1pct(n));
  CHECK(dy < testutil::ks_crit_1pct(n));
}

TEST_CASE("uniform target sampling is uniform (chi-square at 1%)") {
  GridSpec spec{{0, 0}, {1, 1}, 128};
  GridOracle grid(spec, [](Vec2) { return 0.0; });
  const int n = 100000, bins = 10;
  std::vector<int> counts(bins * bins, 0);
  for (int i = 0; i < n; ++i) {
    RngStream rng(99, i);
    Vec2 p = grid.sample(rng);
    int bx = std::min(int(p.x * bins), bins - 1);
    int by = std::min(int(p.y * bins), bins - 1);
    ++counts[bx * bins + by];
  }
  double e = double(n) / (bins * bins);
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - e) * (c - e) / e;
  CHECK(chi2 < 134.64161685578915);  // df=99, 1% critical value
}

TEST_CASE("sample moments of a gridded standard normal") {
  auto grid = std_normal_grid();
  const int n = 100000;
  std::vector<Vec2> draws(n);
  for (int i = 0; i < n; ++i) {
    RngStream rng(7, i);
    draws[i] = grid.sample(rng);
  }
  auto mom = testutil::sample_moments(draws);
  CHECK(std::abs(mom.mean.x) < 0.015);
  CHECK(std::abs(mom.mean.y) < 0.015);
  CHECK(mom.cov.a == doctest::Approx(1.0).epsilon(0.02));
  CHECK(mom.cov.c == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("boundary mass flags clipped distributions") {
  Gmm wide({{1.0, {0, 0}, Sym2::iso(4.0)}});
  GridOracle clipped(GridSpec{}, [&](Vec2 p) { return wide.log_density(p); });
  // The outermost ring is a single cell wide, so even heavy clipping yields
  // sub-percent ring mass; the diagnostic threshold is 1e-3.
  CHECK(clipped.boundary_mass() > 1e-3);
  Gmm ring = make_ring_gmm();
  GridOracle ok(GridSpec{}, [&](Vec2 p) { return ring.log_density(p); });
  CHECK(ok.boundary_mass() < 1e-3);
}

TEST_CASE("high-mass points cover the right region") {
  auto grid = std_normal_grid();
  auto pts = grid.high_mass_points(0.99, 500);
  CHECK(int(pts.size()) <= 500);
  CHECK(pts.size() > 100);
  for (const auto& p : pts) CHECK(p.norm() < 3.1);  // 99% mass radius ~3.03
  // Densest-first: the first point is near the mode.
  CHECK(pts[0].norm() < 0.2);
}

TEST_CASE("grid diffusion reproduces the closed-form diffused GMM") {
  auto s = NoiseSchedule::default_linear();
  Gmm g({{0.6, {-0.4, 0.2}, Sym2::iso(0.04)}, {0.4, {0.5, -0.3}, Sym2::iso(0.09)}});
  GridOracle base(GridSpec{}, [&](Vec2 p) { return g.log_density(p); });
  for (int t : {1, 50}) {
    GridOracle dt = base.diffused(s, t);
    Gmm want = diffuse_gmm(g, s, t);
    auto probes = dt.high_mass_points(0.99, 150);
    for (const auto& p : probes) {
      CHECK(dt.log_density(p) == doctest::Approx(want.log_density(p)).epsilon(2e-3));
      Vec2 gs = dt.score(p);
      Vec2 ws = want.score(p);
      CHECK((gs - ws).norm() / std::fmax(1.0, ws.norm()) < 5e-3);
    }
  }
}

TEST_CASE("grid diffusion of a box matches the per-axis closed form") {
  // Build the base grid exactly on the box support so the integrand is
  // smooth inside the integration domain.
  auto s = NoiseSchedule::default_linear();
  UniformBox box;
  GridSpec spec{{-0.1, -1.0}, {0.1, 1.0}, 512};
  GridOracle base(spec, [](Vec2) { return 0.0; });
  for (int t : {1, 30, 100}) {
    GridOracle dt = base.diffused(s, t);
    auto [scale, sd] = s.marginal_coeffs(t);
    auto probes = dt.high_mass_points(0.99, 150);
    for (const auto& p : probes) {
      double want = box_diffused_log_density(box, scale, sd, p);
      double got = dt.log_density(p);
      // Compare densities, relative.
      CHECK(std::exp(got - want) == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("invalid grids are rejected") {
  CHECK_THROWS_AS(GridOracle(GridSpec{{0, 0}, {1, 1}, 4}, [](Vec2) { return 0.0; }),
                  ConfigError);
  CHECK_THROWS_AS(GridOracle(GridSpec{{1, 0}, {0, 1}, 64}, [](Vec2) { return 0.0; }),
                  ConfigError);
  CHECK_THROWS_AS(GridOracle(GridSpec{{0, 0}, {1, 1}, 64},
                             [](Vec2) { return -2e300; }),
                  ConfigError);
  CHECK_THROWS_AS(GridOracle(GridSpec{{0, 0}, {1, 1}, 64},
                             [](Vec2) { return std::nan(""); }),
                  NumericError);
  CHECK_THROWS_AS(GridOracle(GridSpec{{0, 0}, {1, 1}, 64}, std::vector<double>(10, 0.0)),
                  ConfigError);
}
