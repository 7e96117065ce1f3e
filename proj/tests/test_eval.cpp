#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "compdiff/compose.hpp"
#include "compdiff/em.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/metrics.hpp"
#include "compdiff/mmd.hpp"
#include "compdiff/parallel.hpp"
#include "compdiff/verify.hpp"
#include "test_util.hpp"

using namespace compdiff;
using testutil::ks_crit_1pct;
using testutil::ks_stat;
using testutil::sample_moments;

namespace {

std::vector<Vec2> gmm_draws(const Gmm& g, int n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<Vec2> v(n);
  for (auto& p : v) p = g.sample(rng);
  return v;
}

SampleBatch as_batch(std::vector<Vec2> pts) {
  SampleBatch b;
  b.x = std::move(pts);
  return b;
}

Gmm two_blob() {
  return Gmm({{0.4, {-0.8, -0.2}, Sym2::iso(0.04)},
              {0.6, {0.7, 0.4}, {0.06, 0.015, 0.03}}});
}

// Quadrature expectation of the log density under the oracle's own
// distribution (the negative differential entropy), trapezoid weights.
double oracle_mean_logdens(const GridOracle& g) {
  const int res = g.res();
  const double dx = (g.spec().hi.x - g.spec().lo.x) / (res - 1);
  const double dy = (g.spec().hi.y - g.spec().lo.y) / (res - 1);
  double e = 0;
  for (int i = 0; i < res; ++i) {
    const double wx = (i == 0 || i == res - 1) ? 0.5 * dx : dx;
    for (int j = 0; j < res; ++j) {
      const double wy = (j == 0 || j == res - 1) ? 0.5 * dy : dy;
      const double v = g.log_value(i, j);
      e += wx * wy * std::exp(v) * v;
    }
  }
  return e;
}

}  // namespace

TEST_CASE("mmd on an identical batch stays at the unbiased floor") {
  const auto pts = gmm_draws(make_ring_gmm(), 500, 3);
  const double est = mmd2(pts.data(), 500, pts.data(), 500);
  CHECK(est <= 1e-12);
  CHECK(est >= -2.0 / 500 - 1e-12);
}

TEST_CASE("mmd separates distributions and tolerates same-distribution noise") {
  const auto a = gmm_draws(make_ring_gmm(), 10000, 11);
  const auto b = gmm_draws(make_ring_gmm(), 10000, 12);
  const double same = mmd2(a.data(), 10000, b.data(), 10000);
  CHECK(std::fabs(same) < 0.003);

  const Gmm std_normal({{1.0, {0, 0}, Sym2::iso(1.0)}});
  const auto c = gmm_draws(std_normal, 10000, 13);
  const double diff = mmd2(a.data(), 10000, c.data(), 10000);
  CHECK(diff > 0.01);
}

TEST_CASE("mmd input validation and worker invariance") {
  const auto a = gmm_draws(make_ring_gmm(), 600, 21);
  const auto b = gmm_draws(make_ring_gmm(), 600, 22);
  CHECK_THROWS_AS((void)mmd2(a.data(), 1, b.data(), 600), ConfigError);
  CHECK_THROWS_AS((void)mmd2(a.data(), 600, b.data(), 0), ConfigError);

  set_max_threads(1);
  const double serial = mmd2(a.data(), 600, b.data(), 600);
  set_max_threads(4);
  const double parallel = mmd2(a.data(), 600, b.data(), 600);
  set_max_threads(1);
  CHECK(serial == parallel);

  SampleBatch xa = as_batch(a), xb = as_batch(b);
  CHECK(mmd2(xa, xb) == serial);
  CHECK(mmd_bandwidth(a.data(), 600, b.data(), 600) > 0.0);
}

TEST_CASE("ll matches the oracle's own expectation on oracle draws") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const GmmModel ring(make_ring_gmm(), s);
  const GridOracle oracle(GridSpec{},
                          [&](Vec2 x) { return ring.energy(x, 1); });

  RngStream rng(31, 0);
  SampleBatch X;
  X.x.resize(20000);
  for (auto& p : X.x) p = oracle.sample(rng);

  const LlResult got = ll_under_target(X, ring, oracle);
  CHECK(got.oob_frac == 0.0);
  CHECK(got.reliable);
  CHECK(std::fabs(got.ll - oracle_mean_logdens(oracle)) < 0.05);
}

TEST_CASE("ll of a point mass at the mode is the max log density") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const GmmModel g(Gmm({{1.0, {0.2, -0.1}, Sym2::iso(0.05)}}), s);
  const GridOracle oracle(GridSpec{}, [&](Vec2 x) { return g.energy(x, 1); });

  // The analytic energy is normalized, so the quadrature normalizer is ~0.
  CHECK(std::fabs(oracle.log_norm()) < 2e-3);

  const double ab = s.alpha_bar(1);
  const Vec2 mode = Vec2{0.2, -0.1} * std::sqrt(ab);
  SampleBatch X = as_batch(std::vector<Vec2>(10, mode));
  const LlResult got = ll_under_target(X, g, oracle);

  double max_node = -1e300;
  for (int i = 0; i < oracle.res(); ++i)
    for (int j = 0; j < oracle.res(); ++j)
      max_node = std::fmax(max_node, oracle.log_value(i, j));
  CHECK(got.ll == doctest::Approx(max_node).epsilon(5e-3));

  // Uniform junk scores far below the peak.
  RngStream rng(5, 0);
  SampleBatch U;
  U.x.resize(4000);
  for (auto& p : U.x)
    p = {-1.6 + 3.2 * rng.uniform(), -1.6 + 3.2 * rng.uniform()};
  const LlResult ull = ll_under_target(U, g, oracle);
  CHECK(ull.ll < got.ll - 1.0);
}

TEST_CASE("ll flags unreliable results when samples leave the grid") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const GmmModel g(Gmm({{1.0, {0, 0}, Sym2::iso(0.1)}}), s);
  const GridOracle oracle(GridSpec{}, [&](Vec2 x) { return g.energy(x, 1); });

  SampleBatch X = as_batch({{5.0, 5.0}, {0.0, 0.0}, {6.0, -7.0}});
  const LlResult got = ll_under_target(X, g, oracle);
  CHECK(got.oob_frac == doctest::Approx(2.0 / 3));
  CHECK(!got.reliable);

  CHECK_THROWS_AS((void)ll_under_target(as_batch({}), g, oracle),
                  ConfigError);
}

TEST_CASE("em recovers a well-separated mixture and is deterministic") {
  const Gmm truth = two_blob();
  const auto pts = gmm_draws(truth, 4000, 41);
  const Gmm fit = fit_gmm_em(pts.data(), 4000, 2, 3);
  REQUIRE(fit.size() == 2);

  // Align fitted components to truth by nearest mean.
  for (int i = 0; i < 2; ++i) {
    const GaussComp& want = truth.comp(i);
    int best = 0;
    double bd = 1e300;
    for (int j = 0; j < 2; ++j) {
      const double d = (fit.comp(j).mean - want.mean).norm();
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    const GaussComp& got = fit.comp(best);
    CHECK(bd < 0.03);
    CHECK(std::fabs(got.w - want.w) < 0.05);
    CHECK(std::fabs(got.cov.a - want.cov.a) < 0.01);
    CHECK(std::fabs(got.cov.b - want.cov.b) < 0.01);
    CHECK(std::fabs(got.cov.c - want.cov.c) < 0.01);
  }

  const Gmm again = fit_gmm_em(pts.data(), 4000, 2, 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(fit.comp(i).mean.x == again.comp(i).mean.x);
    CHECK(fit.comp(i).cov.a == again.comp(i).cov.a);
    CHECK(fit.comp(i).w == again.comp(i).w);
  }
  CHECK(gmm_mean_loglik(fit, pts.data(), 4000) >
        gmm_mean_loglik(Gmm({{1.0, {0, 0}, Sym2::iso(1.0)}}), pts.data(),
                        4000));
}

TEST_CASE("em reports degenerate data and bad arguments") {
  // Coincident data is still a stable (if trivial) fit: both components
  // settle on the point at the covariance floor.
  const std::vector<Vec2> same(200, Vec2{0.3, 0.3});
  const Gmm trivial = fit_gmm_em(same.data(), 200, 2, 1);
  CHECK(trivial.comp(0).mean.x == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(trivial.comp(0).cov.a == doctest::Approx(1e-6));

  // A poisoned batch can never yield a finite likelihood.
  auto pts = gmm_draws(two_blob(), 200, 1);
  pts[17] = {std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS((void)fit_gmm_em(pts.data(), 200, 2, 1), MetricError);

  CHECK_THROWS_AS((void)fit_gmm_em(pts.data(), 5, 3, 1), ConfigError);
  CHECK_THROWS_AS((void)fit_gmm_em(pts.data(), 5, 0, 1), ConfigError);
}

TEST_CASE("var metric: zero on itself, scales with coordinates, low noise") {
  const Gmm truth = two_blob();
  SampleBatch X = as_batch(gmm_draws(truth, 6000, 51));
  CHECK(var_metric(X, X, 2) == 0.0);

  SampleBatch X2;
  X2.x.reserve(X.x.size());
  for (const auto& p : X.x) X2.x.push_back(p * 2.0);
  const double got = var_metric(X2, X, 2);
  double expect = 0;
  for (int i = 0; i < 2; ++i) {
    expect += 9.0 * truth.comp(i).cov.a * truth.comp(i).cov.a;
    expect += 9.0 * truth.comp(i).cov.c * truth.comp(i).cov.c;
  }
  expect = std::sqrt(expect);
  CHECK(std::fabs(got - expect) < 0.2 * expect);

  SampleBatch Y = as_batch(gmm_draws(truth, 6000, 52));
  CHECK(var_metric(X, Y, 2) < 0.01);
}

TEST_CASE("ground truth sampling uses closed forms where they exist") {
  const NoiseSchedule s = NoiseSchedule::default_linear();

  // Single GMM leaf: the leaf's own sampler.
  const auto ring = std::make_shared<GmmModel>(make_ring_gmm(), s);
  const SampleBatch r = ground_truth_samples(ring, 20000, 61);
  const auto rm = sample_moments(r.x);
  const Vec2 want_mean = make_ring_gmm().mean();
  const Sym2 want_cov = make_ring_gmm().cov();
  CHECK(std::fabs(rm.mean.x - want_mean.x) < 0.02);
  CHECK(std::fabs(rm.mean.y - want_mean.y) < 0.02);
  CHECK(std::fabs(rm.cov.a - want_cov.a) < 0.02);
  CHECK(std::fabs(rm.cov.c - want_cov.c) < 0.02);

  // Mixture of GMMs: pooled closed form, deterministic per seed.
  const auto left = std::make_shared<GmmModel>(make_mixture_pair_left(), s);
  const auto right = std::make_shared<GmmModel>(make_mixture_pair_right(), s);
  const ModelPtr mix = compose_mixture({left, right}, {0.5, 0.5});
  const auto pooled = base_closed_form(*mix);
  REQUIRE(pooled.has_value());
  CHECK(pooled->size() == 6);
  const SampleBatch m1 = ground_truth_samples(mix, 5000, 62);
  const SampleBatch m2 = ground_truth_samples(mix, 5000, 62);
  for (int i = 0; i < 5000; ++i) {
    CHECK(m1.x[i].x == m2.x[i].x);
    CHECK(m1.x[i].y == m2.x[i].y);
  }
  const auto mm = sample_moments(m1.x);
  const Vec2 pm = pooled->mean();
  CHECK(std::fabs(mm.mean.x - pm.x) < 0.02);
  CHECK(std::fabs(mm.mean.y - pm.y) < 0.02);

  // Product of two Gaussians: precision-weighted closed form.
  const auto ga = std::make_shared<GmmModel>(
      Gmm({{1.0, {0.4, 0.0}, Sym2::iso(0.5)}}), s);
  const auto gb = std::make_shared<GmmModel>(
      Gmm({{1.0, {-0.2, 0.3}, {0.3, 0.1, 0.4}}}), s);
  const ModelPtr prod = compose_product({ga, gb});
  const auto closed = base_closed_form(*prod);
  REQUIRE(closed.has_value());
  REQUIRE(closed->size() == 1);
  const Sym2 pa = Sym2::iso(0.5).inverse();
  const Sym2 pb = Sym2{0.3, 0.1, 0.4}.inverse();
  const Sym2 prec{pa.a + pb.a, pa.b + pb.b, pa.c + pb.c};
  const Sym2 cov = prec.inverse();
  Vec2 h = pa.mul({0.4, 0.0});
  h += pb.mul({-0.2, 0.3});
  const Vec2 mean = cov.mul(h);
  CHECK(closed->comp(0).mean.x == doctest::Approx(mean.x).epsilon(1e-14));
  CHECK(closed->comp(0).mean.y == doctest::Approx(mean.y).epsilon(1e-14));
  CHECK(closed->comp(0).cov.a == doctest::Approx(cov.a).epsilon(1e-14));
  const SampleBatch pr = ground_truth_samples(prod, 20000, 63);
  const auto prm = sample_moments(pr.x);
  CHECK(std::fabs(prm.mean.x - mean.x) < 3.5 * std::sqrt(cov.a / 20000.0));
  CHECK(std::fabs(prm.mean.y - mean.y) < 3.5 * std::sqrt(cov.c / 20000.0));
  CHECK(std::fabs(prm.cov.a - cov.a) < 3.5 * cov.a * std::sqrt(2.0 / 20000));

  // Tempering a Gaussian halves the covariance at lambda = 2.
  const auto tempered = base_closed_form(*compose_temper(ga, 2.0));
  REQUIRE(tempered.has_value());
  CHECK(tempered->comp(0).cov.a == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(tempered->comp(0).mean.x == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("ground truth falls back to the quadrature grid for ring x box") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const auto ring = std::make_shared<GmmModel>(make_ring_gmm(), s);
  const auto box = std::make_shared<BoxModel>(UniformBox{}, s);
  const ModelPtr prod = compose_product({ring, box});
  CHECK(!base_closed_form(*prod).has_value());

  const SampleBatch gt = ground_truth_samples(prod, 8000, 64);
  REQUIRE(gt.size() == 8000);
  const UniformBox b{};
  int inside = 0;
  const double slack = 3.2 / 511.0;  // half a cell of quantization slack
  for (const auto& p : gt.x)
    inside += p.x >= b.lo.x - slack && p.x <= b.hi.x + slack &&
              p.y >= b.lo.y - slack && p.y <= b.hi.y + slack;
  CHECK(double(inside) / 8000.0 > 0.995);
}

TEST_CASE("grid sampler agrees with the pooled exact sampler (ks, 1%)") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const auto left = std::make_shared<GmmModel>(make_mixture_pair_left(), s);
  const auto right = std::make_shared<GmmModel>(make_mixture_pair_right(), s);
  const ModelPtr mix = compose_mixture({left, right}, {0.5, 0.5});
  const Gmm pooled = *base_closed_form(*mix);

  const GridOracle grid(GridSpec{},
                        [&](Vec2 x) { return base_log_density(*mix, x); });
  RngStream rng(71, 0);
  std::vector<double> xs(4000), ys(4000);
  for (int i = 0; i < 4000; ++i) {
    const Vec2 p = grid.sample(rng);
    xs[i] = p.x;
    ys[i] = p.y;
  }
  const double dx = ks_stat(
      xs, [&](double v) { return pooled.marginal_cdf(0, v); });
  const double dy = ks_stat(
      ys, [&](double v) { return pooled.marginal_cdf(1, v); });
  CHECK(dx < ks_crit_1pct(4000));
  CHECK(dy < ks_crit_1pct(4000));
}

TEST_CASE("metrics report assembles and serializes deterministically") {
  const NoiseSchedule s = NoiseSchedule::default_linear();
  const auto left = std::make_shared<GmmModel>(make_mixture_pair_left(), s);
  const auto right = std::make_shared<GmmModel>(make_mixture_pair_right(), s);
  const ModelPtr mix = compose_mixture({left, right}, {0.5, 0.5});
  const GridOracle oracle(GridSpec{},
                          [&](Vec2 x) { return mix->energy(x, 1); });

  SampleBatch X = ground_truth_samples(mix, 3000, 81);
  X.tree_id = "mixture2d";
  const SampleBatch truth = ground_truth_samples(mix, 3000, 82);

  ChainStats stats;
  stats.kind = SamplerKind::Mala;
  stats.kernel_evals = 123;
  stats.refresh_evals = 45;
  stats.reverse_evals = 6;

  const MetricsReport rep =
      compute_metrics(X, truth, *mix, &oracle, 6, &stats);
  CHECK(rep.tree_id == "mixture2d");
  CHECK(rep.sampler == "mala");
  CHECK(rep.n == 3000);
  CHECK(std::fabs(rep.mmd2) < 0.005);
  CHECK(rep.ll_computed);
  CHECK(rep.ll_reliable);
  CHECK(rep.var_k == 6);
  CHECK(rep.var_l2 < 0.01);
  CHECK(rep.kernel_evals == 123u);

  const std::string j1 = rep.to_json();
  const std::string j2 =
      compute_metrics(X, truth, *mix, &oracle, 6, &stats).to_json();
  CHECK(j1 == j2);
  CHECK(j1.find("\"mmd2\"") != std::string::npos);
  CHECK(j1.find("\"sampler\": \"mala\"") != std::string::npos);
  CHECK(j1.find("\"total\"") != std::string::npos);

  const MetricsReport no_ll = compute_metrics(X, truth, *mix, nullptr, 0);
  CHECK(!no_ll.ll_computed);
  CHECK(no_ll.var_l2 == 0.0);
  CHECK(no_ll.sampler == "unknown");
}
