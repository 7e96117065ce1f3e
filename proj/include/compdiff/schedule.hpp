#pragma once

#include <string>
#include <utility>
#include <vector>

namespace compdiff {

enum class ScheduleKind { Linear, Cosine };

// Forward-process noise schedule for a discrete diffusion with
//   q(x_t | x_{t-1}) = N(sqrt(1-beta_t) x_{t-1}, beta_t I),
// so the marginal is q(x_t | x_0) = N(sqrt(alpha_bar_t) x_0, (1-alpha_bar_t) I)
// with alpha_bar_t = prod_{s<=t} (1 - beta_s). Timesteps are 1-based;
// alpha_bar(0) = 1 by convention.
class NoiseSchedule {
 public:
  // Betas interpolate linearly from beta_min at t=1 to beta_max at t=T.
  // The artifact default at T=100 is (1e-3, 0.2): the canonical 1000-step
  // endpoints (1e-4, 0.02) rescaled by 1000/T, which keeps the terminal
  // marginal within 1e-4 of a standard normal. Passing the 1000-step
  // endpoints at small T would leave sigma_T^2 ~= 0.63 and the terminal
  // far from the prior the samplers start from.
  static NoiseSchedule linear(int T, double beta_min, double beta_max);
  static NoiseSchedule linear(int T) {
    double scale = 1000.0 / T;
    return linear(T, scale * 1e-4, scale * 0.02);
  }
  static NoiseSchedule default_linear() { return linear(100); }

  // Squared-cosine alpha_bar profile with offset 0.008 and betas clamped to
  // 0.999. Default T is 1000.
  static NoiseSchedule cosine(int T);
  static NoiseSchedule default_cosine() { return cosine(1000); }

  int steps() const { return T_; }
  ScheduleKind kind() const { return kind_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }

  double beta(int t) const { return betas_[check(t)]; }
  double alpha(int t) const { return 1.0 - betas_[check(t)]; }

  // t in [0, T]; alpha_bar(0) = 1.
  double alpha_bar(int t) const {
    if (t < 0 || t > T_) bounds_fail(t, 0);
    return t == 0 ? 1.0 : alpha_bars_[t - 1];
  }
  double sigma2(int t) const { return 1.0 - alpha_bar(t); }
  double sigma(int t) const { return sigmas_[check(t)]; }

  // (scale, noise std) of q(x_t|x_0): x_t = scale*x_0 + std*eps.
  // scale^2 + std^2 == 1 exactly by construction.
  std::pair<double, double> marginal_coeffs(int t) const {
    check(t);
    return {scales_[t - 1], sigmas_[t - 1]};
  }

  // Posterior variance of the reverse step,
  //   beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t),
  // with the t=1 step deterministic (variance 0).
  double reverse_variance(int t) const { return reverse_vars_[check(t)]; }

  std::string describe() const;

 private:
  NoiseSchedule() = default;
  void finalize();
  int check(int t) const {
    if (t < 1 || t > T_) bounds_fail(t, 1);
    return t - 1;
  }
  [[noreturn]] void bounds_fail(int t, int lo) const;

  ScheduleKind kind_ = ScheduleKind::Linear;
  int T_ = 0;
  double beta_min_ = 0.0, beta_max_ = 0.0;  // builder arguments, for serialization
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;    // alpha_bar_t, t=1..T
  std::vector<double> scales_;        // sqrt(alpha_bar_t)
  std::vector<double> sigmas_;        // sqrt(1 - alpha_bar_t)
  std::vector<double> reverse_vars_;  // t=1..T, entry 0 is 0
};

}  // namespace compdiff
