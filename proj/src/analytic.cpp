#include "compdiff/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "compdiff/errors.hpp"
#include "compdiff/parallel.hpp"

namespace compdiff {

void AnalyticModel::score_batch(const Vec2* xs, int n, int t,
                                Vec2* out) const {
  parallel_for(n, [&](std::int64_t i) { out[i] = score(xs[i], t); });
}

void AnalyticModel::energy_score_batch(const Vec2* xs, int n, int t,
                                       double* e_out, Vec2* s_out) const {
  parallel_for(n, [&](std::int64_t i) {
    e_out[i] = energy(xs[i], t);
    s_out[i] = score(xs[i], t);
  });
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
// Finite stand-in for log(0) outside hard supports; exp() of it is 0 and
// grid code never has to special-case infinities.
constexpr double kLogZero = -1e300;

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::fmax(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Gmm::Gmm(std::vector<GaussComp> comps) : comps_(std::move(comps)) {
  if (comps_.empty()) throw ConfigError("gmm: needs at least one component");
  double total = 0.0;
  for (const auto& c : comps_) {
    if (!(c.w >= 0.0)) throw ConfigError("gmm: weights must be >= 0");
    if (!(c.cov.a > 0.0) || !(c.cov.det() > 0.0))
      throw ConfigError("gmm: covariance must be positive definite");
    total += c.w;
  }
  if (!(total > 0.0)) throw ConfigError("gmm: weights must not all be zero");
  log_norm_.reserve(comps_.size());
  inv_.reserve(comps_.size());
  for (auto& c : comps_) {
    c.w /= total;
    log_norm_.push_back(c.w == 0.0
                            ? -std::numeric_limits<double>::infinity()
                            : std::log(c.w) - kLog2Pi - 0.5 * std::log(c.cov.det()));
    inv_.push_back(c.cov.inverse());
  }
}

double Gmm::log_density(const Vec2& x) const {
  std::vector<double> terms(comps_.size());
  for (size_t i = 0; i < comps_.size(); ++i) {
    Vec2 d = x - comps_[i].mean;
    terms[i] = log_norm_[i] - 0.5 * d.dot(inv_[i].mul(d));
  }
  return log_sum_exp(terms);
}

Vec2 Gmm::score(const Vec2& x) const {
  // Responsibility-weighted sum of single-Gaussian scores.
  std::vector<double> terms(comps_.size());
  double m = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < comps_.size(); ++i) {
    Vec2 d = x - comps_[i].mean;
    terms[i] = log_norm_[i] - 0.5 * d.dot(inv_[i].mul(d));
    m = std::fmax(m, terms[i]);
  }
  double denom = 0.0;
  Vec2 acc{0.0, 0.0};
  for (size_t i = 0; i < comps_.size(); ++i) {
    double r = std::exp(terms[i] - m);
    denom += r;
    Vec2 d = x - comps_[i].mean;
    acc -= r * inv_[i].mul(d);
  }
  return acc / denom;
}

Vec2 Gmm::sample(RngStream& rng) const {
  double u = rng.uniform();
  size_t pick = comps_.size() - 1;
  double acc = 0.0;
  for (size_t i = 0; i < comps_.size(); ++i) {
    acc += comps_[i].w;
    if (u < acc) {
      pick = i;
      break;
    }
  }
  const auto& c = comps_[pick];
  // Cholesky of the 2x2 covariance.
  double l11 = std::sqrt(c.cov.a);
  double l21 = c.cov.b / l11;
  double l22 = std::sqrt(c.cov.c - l21 * l21);
  Vec2 z = rng.normal2();
  return {c.mean.x + l11 * z.x, c.mean.y + l21 * z.x + l22 * z.y};
}

Vec2 Gmm::mean() const {
  Vec2 m{0, 0};
  for (const auto& c : comps_) m += c.w * c.mean;
  return m;
}

Sym2 Gmm::cov() const {
  Vec2 m = mean();
  double a = 0, b = 0, cc = 0;
  for (const auto& c : comps_) {
    Vec2 d = c.mean - m;
    a += c.w * (c.cov.a + d.x * d.x);
    b += c.w * (c.cov.b + d.x * d.y);
    cc += c.w * (c.cov.c + d.y * d.y);
  }
  return {a, b, cc};
}

double Gmm::marginal_cdf(int axis, double v) const {
  double acc = 0.0;
  for (const auto& c : comps_) {
    double mu = axis == 0 ? c.mean.x : c.mean.y;
    double var = axis == 0 ? c.cov.a : c.cov.c;
    acc += c.w * 0.5 * std::erfc(-(v - mu) / std::sqrt(2.0 * var));
  }
  return acc;
}

Gmm diffuse_gmm(const Gmm& g, const NoiseSchedule& s, int t) {
  if (t == 0) return g;
  double ab = s.alpha_bar(t);
  double s2 = s.sigma2(t);
  double scale = std::sqrt(ab);
  std::vector<GaussComp> comps = g.comps();
  for (auto& c : comps) {
    c.mean = c.mean * scale;
    c.cov = c.cov.scaled(ab).plus_iso(s2);
  }
  return Gmm(std::move(comps));
}

Gmm make_ring_gmm(int k, double radius, double stddev) {
  std::vector<GaussComp> comps;
  comps.reserve(k);
  for (int i = 0; i < k; ++i) {
    double ang = 2.0 * M_PI * i / k;
    comps.push_back({1.0 / k,
                     {radius * std::cos(ang), radius * std::sin(ang)},
                     Sym2::iso(stddev * stddev)});
  }
  return Gmm(std::move(comps));
}

namespace {
Gmm mixture_pair(double xc) {
  std::vector<GaussComp> comps;
  for (double yc : {0.5, 0.0, -0.5})
    comps.push_back({1.0 / 3.0, {xc, yc}, Sym2::iso(0.03 * 0.03)});
  return Gmm(std::move(comps));
}
}  // namespace

Gmm make_mixture_pair_left() { return mixture_pair(-0.25); }
Gmm make_mixture_pair_right() { return mixture_pair(0.25); }

// ---------------------------------------------------------------------------
// Diffused uniform interval.
// ---------------------------------------------------------------------------

namespace {

// log Q(v) for v >= 25, Q the standard normal upper tail.
double log_q_tail(double v) {
  return -0.5 * v * v - 0.5 * kLog2Pi - std::log(v) +
         std::log1p(-1.0 / (v * v) + 3.0 / (v * v * v * v));
}

// phi(v)/Q(v) for v >= 25.
double mills_inv(double v) { return v + 1.0 / v - 2.0 / (v * v * v); }

double log_phi(double u) { return -0.5 * u * u - 0.5 * kLog2Pi; }

}  // namespace

void diffused_interval_axis(double a, double b, double scale, double sigma,
                            double z, double* logp, double* dlogp_dz) {
  const double A = scale * a, B = scale * b;
  const double u1 = (z - A) / sigma;  // distance above the lower edge
  const double u2 = (z - B) / sigma;  // distance above the upper edge
  const double log_width = std::log(scale * (b - a));
  const double tail = 30.0;

  double logdiff, ratio;  // log(Phi(u1)-Phi(u2)) and (phi(u1)-phi(u2))/diff
  if (u2 > tail) {
    // Entirely above the box: dominated by the upper edge.
    logdiff = log_q_tail(u2);
    ratio = -mills_inv(u2);
  } else if (u1 < -tail) {
    // Entirely below: dominated by the lower edge.
    logdiff = log_q_tail(-u1);
    ratio = mills_inv(-u1);
  } else {
    // Difference of complementary error functions, mirrored so the two
    // operands are on the decaying side and cancellation stays benign.
    double diff;
    if (u1 + u2 >= 0.0)
      diff = 0.5 * (std::erfc(u2 / M_SQRT2) - std::erfc(u1 / M_SQRT2));
    else
      diff = 0.5 * (std::erfc(-u1 / M_SQRT2) - std::erfc(-u2 / M_SQRT2));
    diff = std::fmax(diff, 5e-324);
    logdiff = std::log(diff);
    ratio = (std::exp(log_phi(u1)) - std::exp(log_phi(u2))) / diff;
  }
  if (logp) *logp = logdiff - log_width;
  if (dlogp_dz) *dlogp_dz = ratio / sigma;
}

double box_diffused_log_density(const UniformBox& b, double scale, double sigma,
                                const Vec2& x) {
  double lx, ly;
  diffused_interval_axis(b.lo.x, b.hi.x, scale, sigma, x.x, &lx, nullptr);
  diffused_interval_axis(b.lo.y, b.hi.y, scale, sigma, x.y, &ly, nullptr);
  return lx + ly;
}

Vec2 box_diffused_score(const UniformBox& b, double scale, double sigma,
                        const Vec2& x) {
  double dx, dy;
  diffused_interval_axis(b.lo.x, b.hi.x, scale, sigma, x.x, nullptr, &dx);
  diffused_interval_axis(b.lo.y, b.hi.y, scale, sigma, x.y, nullptr, &dy);
  return {dx, dy};
}

// ---------------------------------------------------------------------------
// Model wrappers.
// ---------------------------------------------------------------------------

GmmModel::GmmModel(Gmm base, NoiseSchedule sched) : sched_(std::move(sched)) {
  levels_.reserve(sched_.steps() + 1);
  levels_.push_back(std::move(base));
  for (int t = 1; t <= sched_.steps(); ++t)
    levels_.push_back(diffuse_gmm(levels_.front(), sched_, t));
}

const Gmm& GmmModel::at(int t) const {
  if (t < 0 || t > sched_.steps())
    throw std::out_of_range("gmm model: level " + std::to_string(t) +
                            " out of range [0, " + std::to_string(sched_.steps()) + "]");
  return levels_[t];
}

BoxModel::BoxModel(UniformBox box, NoiseSchedule sched)
    : sched_(std::move(sched)), box_(box) {
  if (!(box.lo.x < box.hi.x) || !(box.lo.y < box.hi.y))
    throw ConfigError("box: lo must be strictly below hi on both axes");
}

double BoxModel::log_density(const Vec2& x, int t) const {
  if (t == 0) {
    bool inside = x.x >= box_.lo.x && x.x <= box_.hi.x && x.y >= box_.lo.y &&
                  x.y <= box_.hi.y;
    double log_area =
        std::log((box_.hi.x - box_.lo.x) * (box_.hi.y - box_.lo.y));
    return inside ? -log_area : kLogZero;
  }
  auto [scale, sd] = sched_.marginal_coeffs(t);
  return box_diffused_log_density(box_, scale, sd, x);
}

Vec2 BoxModel::score(const Vec2& x, int t) const {
  auto [scale, sd] = sched_.marginal_coeffs(t);
  return box_diffused_score(box_, scale, sd, x);
}

Vec2 BoxModel::sample0(RngStream& rng) const {
  return {box_.lo.x + rng.uniform() * (box_.hi.x - box_.lo.x),
          box_.lo.y + rng.uniform() * (box_.hi.y - box_.lo.y)};
}

LabeledGmmModel::LabeledGmmModel(Gmm base, std::vector<int> labels,
                                 NoiseSchedule sched)
    : labels_(std::move(labels)) {
  if (static_cast<int>(labels_.size()) != base.size())
    throw ConfigError("labeled gmm: one label per component required");
  int n_labels = 0;
  for (int l : labels_) {
    if (l < 0) throw ConfigError("labeled gmm: labels must be >= 0");
    n_labels = std::max(n_labels, l + 1);
  }
  priors_.assign(n_labels, 0.0);
  for (int i = 0; i < base.size(); ++i) priors_[labels_[i]] += base.comp(i).w;
  for (int y = 0; y < n_labels; ++y)
    if (priors_[y] == 0.0)
      throw ConfigError("labeled gmm: label " + std::to_string(y) +
                        " has no components");
  for (int y = 0; y < n_labels; ++y) {
    std::vector<GaussComp> sub;
    for (int i = 0; i < base.size(); ++i)
      if (labels_[i] == y) sub.push_back(base.comp(i));
    conditionals_.push_back(
        std::make_shared<GmmModel>(Gmm(std::move(sub)), sched));
  }
  pooled_ = std::make_shared<GmmModel>(std::move(base), std::move(sched));
}

double LabeledGmmModel::class_prior(int y) const {
  if (y < 0 || y >= n_labels())
    throw std::out_of_range("labeled gmm: label " + std::to_string(y) +
                            " out of range");
  return priors_[y];
}

const GmmModel& LabeledGmmModel::conditional(int y) const {
  class_prior(y);  // bounds check
  return *conditionals_[y];
}

std::shared_ptr<const GmmModel> LabeledGmmModel::conditional_ptr(int y) const {
  class_prior(y);  // bounds check
  return conditionals_[y];
}

double LabeledGmmModel::log_posterior(int y, const Vec2& x, int t) const {
  // p_t(y|x) = p(y) q_t(x|y) / q_t(x); all three factors are exact.
  return std::log(class_prior(y)) + conditional(y).log_density(x, t) -
         pooled_->log_density(x, t);
}

Vec2 LabeledGmmModel::posterior_score(int y, const Vec2& x, int t) const {
  return conditional(y).score(x, t) - pooled_->score(x, t);
}

}  // namespace compdiff
