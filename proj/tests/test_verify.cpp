#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "compdiff/errors.hpp"
#include "compdiff/verify.hpp"
#include "test_util.hpp"

using namespace compdiff;

namespace {

const NoiseSchedule kSched = NoiseSchedule::default_linear();

std::shared_ptr<GmmModel> gauss(Vec2 mean, double var) {
  return std::make_shared<GmmModel>(Gmm({{1.0, mean, Sym2::iso(var)}}),
                                    kSched);
}

std::shared_ptr<const LabeledGmmModel> labeled_pair() {
  const Gmm pair({{0.5, {-0.7, 0.0}, Sym2::iso(0.0625)},
                  {0.5, {0.7, 0.0}, Sym2::iso(0.0625)}});
  return std::make_shared<LabeledGmmModel>(pair, std::vector<int>{0, 1},
                                           kSched);
}

}  // namespace

TEST_CASE("mixture score identity holds, including trivial weightings") {
  const Gmm a({{0.6, {-0.5, 0.2}, Sym2::iso(0.05)},
               {0.4, {0.3, -0.4}, {0.08, 0.02, 0.05}}});
  const Gmm b({{1.0, {0.6, 0.5}, Sym2::iso(0.1)}});

  const ClaimRecord two = verify_mixture_identity({a, b}, {0.3, 0.7}, kSched,
                                                  150, 5);
  CHECK(two.verdict == Verdict::EqualityHolds);
  CHECK(two.max_rel_err <= 1e-9);
  CHECK(two.t_probed == std::vector<int>{1, 25, 50, 100});
  CHECK(two.probe_count == 150);

  const ClaimRecord one = verify_mixture_identity({a}, {1.0}, kSched, 60, 5);
  CHECK(one.verdict == Verdict::EqualityHolds);

  // Weight (1, 0) reduces to the first model exactly.
  const ClaimRecord degen =
      verify_mixture_identity({a, b}, {1.0, 0.0}, kSched, 60, 5);
  CHECK(degen.verdict == Verdict::EqualityHolds);

  CHECK_THROWS_AS(
      (void)verify_mixture_identity({a, b}, {1.0}, kSched, 10, 5),
      ConfigError);
}

TEST_CASE("product gap confirmed on ring x box") {
  const auto ring = std::make_shared<GmmModel>(make_ring_gmm(), kSched);
  const auto box = std::make_shared<BoxModel>(UniformBox{}, kSched);
  const ClaimRecord rec = verify_product_gap(ring, box, 200, 9);
  CHECK(rec.verdict == Verdict::GapConfirmed);
  CHECK(rec.frac_gap_mid >= 0.10);
  CHECK(rec.frac_close_low >= 0.90);
  CHECK(rec.t_probed == std::vector<int>{1, 50});
}

TEST_CASE("product gap engine agrees with the identical-Gaussian algebra") {
  // For N(0, vI) x N(0, vI) the truth is closed form: the product is
  // N(0, v/2 I), so its diffusion scores -x / (ab*v/2 + sigma^2), while the
  // summed composition scores -2x / (ab*v + sigma^2). The claim must be
  // confirmed, and the engine's grid reference must track the closed form.
  const double v = 0.16;
  const auto g1 = gauss({0, 0}, v);
  const auto g2 = gauss({0, 0}, v);
  const ClaimRecord rec = verify_product_gap(g1, g2, 150, 11);
  CHECK(rec.verdict == Verdict::GapConfirmed);

  const ModelPtr prod = compose_product({g1, g2});
  const GridOracle base(GridSpec{},
                        [&](Vec2 x) { return base_log_density(*prod, x); });
  const int mid = kSched.steps() / 2;
  const GridOracle gt = base.diffused(kSched, mid);
  const double ab = kSched.alpha_bar(mid);
  const double sig2 = 1.0 - ab;
  const double true_var = ab * v / 2 + sig2;
  const double sum_var = (ab * v + sig2) / 2;
  double worst = 0;
  for (const Vec2& p : gt.high_mass_points(0.99, 100)) {
    const Vec2 want = p * (-1.0 / true_var);
    worst = std::fmax(worst,
                      (gt.score(p) - want).norm() /
                          std::fmax(1.0, want.norm()));
    // And the composed tree really is the "wrong" closed form.
    const Vec2 got = prod->score(p, mid);
    CHECK((got - p * (-1.0 / sum_var)).norm() < 1e-12);
  }
  CHECK(worst < 5e-3);

  // The two closed forms differ materially at mid-schedule.
  CHECK(std::fabs(true_var - sum_var) / true_var > 0.05);
}

TEST_CASE("tempering gap: identity at lambda=1, confirmed at lambda=2") {
  const auto ring = std::make_shared<GmmModel>(make_ring_gmm(), kSched);
  const ClaimRecord unit = verify_tempering_gap(ring, 1.0, 150, 13);
  CHECK(unit.verdict == Verdict::NoGap);
  CHECK(unit.frac_gap_mid == 0.0);
  CHECK(unit.frac_close_low >= 0.99);

  const ClaimRecord two = verify_tempering_gap(ring, 2.0, 150, 13);
  CHECK(two.verdict == Verdict::GapConfirmed);
  CHECK(two.frac_gap_mid >= 0.10);
  CHECK(two.frac_close_low >= 0.90);
}

TEST_CASE("tempering engine agrees with the single-Gaussian closed form") {
  const double v = 0.2;
  const Vec2 m{0.3, -0.1};
  const auto g = gauss(m, v);
  const ClaimRecord rec = verify_tempering_gap(g, 2.0, 120, 15);
  CHECK(rec.verdict == Verdict::GapConfirmed);

  // Grid reference vs diffused q^2 = N(sqrt(ab) m, ab*v/2 + sigma^2).
  const ModelPtr tree = compose_temper(g, 2.0);
  const GridOracle base(GridSpec{},
                        [&](Vec2 x) { return base_log_density(*tree, x); });
  const int mid = kSched.steps() / 2;
  const GridOracle gt = base.diffused(kSched, mid);
  const double ab = kSched.alpha_bar(mid);
  const double true_var = ab * v / 2 + (1.0 - ab);
  double worst = 0;
  for (const Vec2& p : gt.high_mass_points(0.99, 100)) {
    const Vec2 want = (p - m * std::sqrt(ab)) * (-1.0 / true_var);
    worst = std::fmax(worst,
                      (gt.score(p) - want).norm() /
                          std::fmax(1.0, want.norm()));
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("guidance bayes identity holds for both labels") {
  const auto lab = labeled_pair();
  for (int y : {0, 1}) {
    const ClaimRecord rec = verify_guidance_identity(lab, y, 120, 17);
    CHECK(rec.verdict == Verdict::EqualityHolds);
    CHECK(rec.max_rel_err <= 1e-9);
  }
}

TEST_CASE("annealed guidance: no gap at lambda=1, confirmed at lambda=3") {
  const auto lab = labeled_pair();
  const ClaimRecord unit = verify_annealed_guidance_gap(lab, 0, 1.0, 150, 19);
  CHECK(unit.verdict == Verdict::NoGap);
  const ClaimRecord three =
      verify_annealed_guidance_gap(lab, 0, 3.0, 150, 19);
  CHECK(three.verdict == Verdict::GapConfirmed);
  CHECK(three.frac_gap_mid >= 0.10);
  CHECK(three.frac_close_low >= 0.90);
}

TEST_CASE("verdicts are stable across seeds") {
  std::vector<std::string> first;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const VerificationReport rep = run_default_verification(seed, 120);
    REQUIRE(rep.claims.size() == 5);
    std::vector<std::string> got;
    for (const auto& c : rep.claims) got.push_back(to_string(c.verdict));
    if (first.empty())
      first = got;
    else
      CHECK(got == first);
  }
  CHECK(first == std::vector<std::string>{"EQUALITY_HOLDS", "GAP_CONFIRMED",
                                          "GAP_CONFIRMED", "EQUALITY_HOLDS",
                                          "GAP_CONFIRMED"});
}

TEST_CASE("default verification report serializes deterministically") {
  const VerificationReport rep = run_default_verification(7, 120);
  const std::string j1 = rep.to_json();
  const std::string j2 = run_default_verification(7, 120).to_json();
  CHECK(j1 == j2);
  for (const char* name :
       {"mixture_score_identity", "product_score_gap", "tempering_score_gap",
        "guidance_bayes_identity", "annealed_guidance_gap"})
    CHECK(j1.find(name) != std::string::npos);
  CHECK(j1.find("\"max_rel_err\"") != std::string::npos);
  CHECK(j1.find("\"frac_gap_mid\"") != std::string::npos);
}

TEST_CASE("ground truth surfaces grid clipping as a numeric error") {
  // Tempering a broad two-component mixture below 1 fattens it past the
  // default grid bounds; no closed form exists, and the quadrature grid
  // cannot hold the mass.
  const auto wide = std::make_shared<GmmModel>(
      Gmm({{0.5, {-1.0, 0.0}, Sym2::iso(2.0)},
           {0.5, {1.0, 0.0}, Sym2::iso(2.0)}}),
      kSched);
  const ModelPtr tree = compose_temper(wide, 0.3);
  CHECK(!base_closed_form(*tree).has_value());
  CHECK_THROWS_AS((void)ground_truth_samples(tree, 100, 1), NumericError);
}
