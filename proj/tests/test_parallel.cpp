#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <memory>
#include <vector>

#include "compdiff/analytic.hpp"
#include "compdiff/compose.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/mmd.hpp"
#include "compdiff/nn.hpp"
#include "compdiff/parallel.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/samplers.hpp"

using namespace compdiff;

// Every parallel kernel promises bit-identical results for any worker count.
// These tests run each parallel surface serially and with four workers and
// compare outputs bitwise; any reduction-order leak shows up as a mismatch.

namespace {

const NoiseSchedule kSched = NoiseSchedule::default_linear();

ModelPtr product_tree() {
  auto ring = std::make_shared<GmmModel>(make_ring_gmm(6, 0.6, 0.2), kSched);
  auto box =
      std::make_shared<BoxModel>(UniformBox{{-0.3, -.9}, {0.3, 0.9}}, kSched);
  return compose_product({ring, box});
}

std::vector<Vec2> probe_points(int n) {
  RngStream rng(4242, 0);
  std::vector<Vec2> xs(n);
  for (auto& x : xs) x = rng.normal2();
  return xs;
}

template <typename F>
auto with_threads(int k, F&& f) {
  set_max_threads(k);
  auto out = f();
  set_max_threads(1);
  return out;
}

}  // namespace

TEST_CASE("parallel_for hits each index exactly once") {
  for (int threads : {1, 4}) {
    set_max_threads(threads);
    std::vector<int> hits(1777, 0);
    parallel_for(1777, [&](std::int64_t i) { ++hits[i]; });
    for (int h : hits) CHECK(h == 1);

    bool called = false;
    parallel_for(0, [&](std::int64_t) { called = true; });
    CHECK(!called);
  }
  set_max_threads(1);
  CHECK(max_threads() == 1);
}

TEST_CASE("composed-tree batch scores are thread-count invariant") {
  const ModelPtr tree = product_tree();
  const std::vector<Vec2> xs = probe_points(257);

  for (int t : {1, 25, 100}) {
    const auto eval = [&] {
      std::vector<double> e(xs.size());
      std::vector<Vec2> s(xs.size());
      tree->energy_score_batch(xs.data(), int(xs.size()), t, e.data(),
                               s.data());
      return std::pair(e, s);
    };
    const auto serial = with_threads(1, eval);
    const auto wide = with_threads(4, eval);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(serial.first[i] == wide.first[i]);
      CHECK(serial.second[i].x == wide.second[i].x);
      CHECK(serial.second[i].y == wide.second[i].y);
    }
  }
}

TEST_CASE("neural batch scores are thread-count invariant") {
  const NeuralModel net(MlpArch{24, 1, 8}, Parameterization::Epsilon, kSched,
                        7);
  const std::vector<Vec2> xs = probe_points(129);
  const auto eval = [&] {
    std::vector<Vec2> s(xs.size());
    net.score_batch(xs.data(), int(xs.size()), 50, s.data());
    return s;
  };
  const auto serial = with_threads(1, eval);
  const auto wide = with_threads(4, eval);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(serial[i].x == wide[i].x);
    CHECK(serial[i].y == wide[i].y);
  }
}

TEST_CASE("mmd2 is thread-count invariant") {
  const std::vector<Vec2> a = probe_points(600);
  const std::vector<Vec2> b = probe_points(500);
  const auto eval = [&] {
    return mmd2(a.data(), int(a.size()), b.data(), int(b.size()));
  };
  CHECK(with_threads(1, eval) == with_threads(4, eval));
}

TEST_CASE("grid oracle construction and queries are thread-count invariant") {
  const ModelPtr tree = product_tree();
  const GridSpec spec{{-1.6, -1.6}, {1.6, 1.6}, 128};
  const auto log_density = [&](Vec2 x) { return tree->energy(x, 1); };
  const std::vector<Vec2> xs = probe_points(97);

  const auto eval = [&] {
    GridOracle oracle(spec, log_density);
    std::vector<double> vals;
    vals.push_back(oracle.log_norm());
    for (const Vec2& x : xs) {
      vals.push_back(oracle.log_density(x));
      const Vec2 s = oracle.score(x);
      vals.push_back(s.x);
      vals.push_back(s.y);
    }
    return vals;
  };
  const auto serial = with_threads(1, eval);
  const auto wide = with_threads(4, eval);
  REQUIRE(serial.size() == wide.size());
  for (std::size_t i = 0; i < serial.size(); ++i)
    CHECK(serial[i] == wide[i]);
}

TEST_CASE("samplers are thread-count invariant") {
  const ModelPtr tree = product_tree();

  const auto rev = [&] { return reverse_diffusion(*tree, 64, 31, nullptr); };
  const SampleBatch r1 = with_threads(1, rev);
  const SampleBatch r4 = with_threads(4, rev);
  REQUIRE(r1.size() == r4.size());
  for (std::size_t i = 0; i < r1.x.size(); ++i) {
    CHECK(r1.x[i].x == r4.x[i].x);
    CHECK(r1.x[i].y == r4.x[i].y);
  }

  SamplerConfig cfg;
  cfg.kind = SamplerKind::HmcPmr;
  cfg.steps_per_t = 2;
  cfg.leapfrog_steps = 2;
  cfg.step_c = 0.03;
  cfg.damping = 0.9;
  cfg.seed = 31;
  const auto mcmc = [&] {
    ChainStats stats;
    SampleBatch b = annealed_mcmc(*tree, cfg, 48, cfg.seed, &stats);
    return std::pair(b, stats);
  };
  const auto m1 = with_threads(1, mcmc);
  const auto m4 = with_threads(4, mcmc);
  REQUIRE(m1.first.size() == m4.first.size());
  for (std::size_t i = 0; i < m1.first.x.size(); ++i) {
    CHECK(m1.first.x[i].x == m4.first.x[i].x);
    CHECK(m1.first.x[i].y == m4.first.x[i].y);
  }
  CHECK(m1.second.kernel_evals == m4.second.kernel_evals);
  CHECK(m1.second.to_json() == m4.second.to_json());
}
