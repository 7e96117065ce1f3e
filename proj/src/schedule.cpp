#include "compdiff/schedule.hpp"

#include <cmath>
#include <sstream>

#include "compdiff/errors.hpp"

namespace compdiff {

NoiseSchedule NoiseSchedule::linear(int T, double beta_min, double beta_max) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1, got " + std::to_string(T));
  if (!(beta_min > 0.0))
    throw ConfigError("schedule: beta_min must be > 0, got " + std::to_string(beta_min));
  if (!(beta_max <= 1.0))
    throw ConfigError("schedule: beta_max must be <= 1, got " + std::to_string(beta_max));
  if (beta_min > beta_max)
    throw ConfigError("schedule: beta_min must be <= beta_max, got " +
                      std::to_string(beta_min) + " > " + std::to_string(beta_max));
  NoiseSchedule s;
  s.kind_ = ScheduleKind::Linear;
  s.T_ = T;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.betas_.resize(T);
  for (int t = 0; t < T; ++t) {
    double frac = T == 1 ? 0.0 : static_cast<double>(t) / (T - 1);
    s.betas_[t] = beta_min + frac * (beta_max - beta_min);
  }
  s.finalize();
  return s;
}

NoiseSchedule NoiseSchedule::cosine(int T) {
  if (T < 1) throw ConfigError("schedule: T must be >= 1, got " + std::to_string(T));
  NoiseSchedule s;
  s.kind_ = ScheduleKind::Cosine;
  s.T_ = T;
  s.betas_.resize(T);
  const double offset = 0.008;
  auto f = [&](double u) {
    double v = std::cos((u + offset) / (1.0 + offset) * M_PI / 2.0);
    return v * v;
  };
  double f0 = f(0.0);
  for (int t = 1; t <= T; ++t) {
    double ab_prev = f(static_cast<double>(t - 1) / T) / f0;
    double ab = f(static_cast<double>(t) / T) / f0;
    double beta = 1.0 - ab / ab_prev;
    s.betas_[t - 1] = std::fmin(beta, 0.999);
  }
  s.beta_min_ = s.betas_.front();
  s.beta_max_ = s.betas_.back();
  s.finalize();
  return s;
}

void NoiseSchedule::finalize() {
  alpha_bars_.resize(T_);
  scales_.resize(T_);
  sigmas_.resize(T_);
  reverse_vars_.resize(T_);
  double prod = 1.0;
  for (int t = 1; t <= T_; ++t) {
    double beta = betas_[t - 1];
    double ab_prev = prod;
    prod *= 1.0 - beta;
    alpha_bars_[t - 1] = prod;
    scales_[t - 1] = std::sqrt(prod);
    sigmas_[t - 1] = std::sqrt(1.0 - prod);
    reverse_vars_[t - 1] =
        t == 1 ? 0.0 : beta * (1.0 - ab_prev) / (1.0 - prod);
  }
}

void NoiseSchedule::bounds_fail(int t, int lo) const {
  std::ostringstream os;
  os << "schedule: timestep " << t << " out of range [" << lo << ", " << T_ << "]";
  throw std::out_of_range(os.str());
}

std::string NoiseSchedule::describe() const {
  std::ostringstream os;
  os << (kind_ == ScheduleKind::Linear ? "linear" : "cosine") << " T=" << T_
     << " beta=[" << betas_.front() << ", " << betas_.back() << "]";
  return os.str();
}

}  // namespace compdiff
