#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "compdiff/errors.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/schedule.hpp"
#include "doctest.h"

using namespace compdiff;

TEST_CASE("linear schedule endpoints are taken literally") {
  auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(s.beta(100) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(s.steps() == 100);
  // Interior betas are evenly spaced.
  double step = (0.02 - 1e-4) / 99.0;
  CHECK(s.beta(2) - s.beta(1) == doctest::Approx(step).epsilon(1e-12));
  CHECK(s.beta(57) == doctest::Approx(1e-4 + 56 * step).epsilon(1e-12));
}

TEST_CASE("degenerate one-step schedule") {
  auto s = NoiseSchedule::linear(1, 1.0, 1.0);
  CHECK(s.beta(1) == 1.0);
  CHECK(s.alpha_bar(1) == 0.0);
  CHECK(s.sigma2(1) == 1.0);
  auto [scale, sd] = s.marginal_coeffs(1);
  CHECK(scale == 0.0);
  CHECK(sd == 1.0);
  CHECK(s.reverse_variance(1) == 0.0);
}

TEST_CASE("alpha_bar and reverse variance against direct products") {
  // Oracle: long-double running product for betas (0.1, 0.2, 0.3).
  auto s = NoiseSchedule::linear(3, 0.1, 0.3);
  CHECK(s.beta(2) == doctest::Approx(0.2).epsilon(1e-15));
  long double prod = 1.0L;
  for (int t = 1; t <= 3; ++t) {
    prod *= 1.0L - static_cast<long double>(s.beta(t));
    CHECK(s.alpha_bar(t) ==
          doctest::Approx(static_cast<double>(prod)).epsilon(1e-14));
  }
  // Frozen oracle outputs.
  CHECK(s.alpha_bar(3) == doctest::Approx(0.504).epsilon(1e-14));
  CHECK(s.alpha_bar(0) == 1.0);
  // reverse variance at t=3: beta_3 * (1 - abar_2) / (1 - abar_3)
  CHECK(s.reverse_variance(3) ==
        doctest::Approx(0.16935483870967744).epsilon(1e-14));
  CHECK(s.reverse_variance(2) ==
        doctest::Approx(0.2 * (1.0 - 0.9) / (1.0 - 0.72)).epsilon(1e-14));
  CHECK(s.reverse_variance(1) == 0.0);
  // Marginal coefficients at t=3, frozen from sqrt(0.504), sqrt(0.496).
  auto [scale, sd] = s.marginal_coeffs(3);
  CHECK(scale == doctest::Approx(0.7099295739719539).epsilon(1e-15));
  CHECK(sd == doctest::Approx(0.7042726744663603).epsilon(1e-15));
}

TEST_CASE("marginal coefficients satisfy scale^2 + std^2 = 1") {
  auto s = NoiseSchedule::default_linear();
  for (int t = 1; t <= s.steps(); ++t) {
    auto [scale, sd] = s.marginal_coeffs(t);
    CHECK(std::abs(scale * scale + sd * sd - 1.0) < 1e-12);
  }
}

TEST_CASE("alpha_bar strictly decreasing, sigma2 strictly increasing") {
  for (auto s : {NoiseSchedule::default_linear(), NoiseSchedule::cosine(50)}) {
    for (int t = 1; t <= s.steps(); ++t) {
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      CHECK(s.sigma2(t) > (t == 1 ? 0.0 : s.sigma2(t - 1)));
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) <= 0.999);
    }
  }
}

TEST_CASE("default schedules end near a standard normal") {
  CHECK(NoiseSchedule::default_linear().sigma2(100) > 0.99);
  auto c = NoiseSchedule::default_cosine();
  CHECK(c.sigma2(c.steps()) > 0.99);
}

TEST_CASE("cosine profile") {
  auto s = NoiseSchedule::cosine(1000);
  CHECK(s.alpha_bar(1000) < 1e-3);
  // Independent oracle: alpha_bar_t should track f(t/T)/f(0) until the beta
  // clamp engages near t=T.
  const double offset = 0.008;
  auto f = [&](double u) {
    double v = std::cos((u + offset) / (1.0 + offset) * M_PI / 2.0);
    return v * v;
  };
  for (int t : {1, 100, 500, 900}) {
    double expect = f(static_cast<double>(t) / 1000) / f(0.0);
    CHECK(s.alpha_bar(t) == doctest::Approx(expect).epsilon(1e-10));
  }
  // Betas grow along the cosine profile and the clamp bounds the last ones.
  for (int t = 2; t <= 1000; ++t) CHECK(s.beta(t) >= s.beta(t - 1));
  CHECK(s.beta(1000) == 0.999);
}

TEST_CASE("near-zero beta start keeps x almost untouched") {
  auto s = NoiseSchedule::linear(10, 1e-12, 1e-12);
  auto [scale, sd] = s.marginal_coeffs(1);
  CHECK(scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sd == doctest::Approx(std::sqrt(1e-12)).epsilon(1e-6));
}

TEST_CASE("invalid schedule parameters are rejected with the bound named") {
  CHECK_THROWS_WITH_AS(NoiseSchedule::linear(0, 1e-4, 0.02),
                       doctest::Contains("T must be >= 1"), ConfigError);
  CHECK_THROWS_WITH_AS(NoiseSchedule::linear(10, 0.0, 0.02),
                       doctest::Contains("beta_min must be > 0"), ConfigError);
  CHECK_THROWS_WITH_AS(NoiseSchedule::linear(10, 1e-4, 1.5),
                       doctest::Contains("beta_max must be <= 1"), ConfigError);
  CHECK_THROWS_WITH_AS(NoiseSchedule::linear(10, 0.5, 0.1),
                       doctest::Contains("beta_min must be <= beta_max"),
                       ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::cosine(0), ConfigError);
}

TEST_CASE("timestep bounds checking") {
  auto s = NoiseSchedule::linear(10, 1e-3, 0.2);
  CHECK_THROWS_AS(s.beta(0), std::out_of_range);
  CHECK_THROWS_AS(s.beta(11), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(-1), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(11), std::out_of_range);
  CHECK_THROWS_AS(s.marginal_coeffs(0), std::out_of_range);
  CHECK_NOTHROW(s.alpha_bar(0));
}

TEST_CASE("composing per-step transitions matches the closed-form marginal") {
  // Monte Carlo oracle: iterate x_t = sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) e
  // from a fixed x_0 and compare moments with marginal_coeffs.
  auto s = NoiseSchedule::linear(20, 1e-3, 0.2);
  const double x0 = 1.3;
  const int n = 100000;
  const int t_probe = 20;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(42, static_cast<std::uint64_t>(i));
    double x = x0;
    for (int t = 1; t <= t_probe; ++t)
      x = std::sqrt(1.0 - s.beta(t)) * x + std::sqrt(s.beta(t)) * rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  auto [scale, sd] = s.marginal_coeffs(t_probe);
  // 4 standard errors.
  CHECK(std::abs(mean - scale * x0) < 4.0 * sd / std::sqrt(double(n)));
  CHECK(std::abs(var - sd * sd) < 4.0 * sd * sd * std::sqrt(2.0 / n));
}
