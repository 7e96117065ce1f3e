#include "compdiff/em.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "compdiff/errors.hpp"

namespace compdiff {
namespace {

constexpr double kLog2Pi = 1.8378770664093455;

struct Comp {
  double log_w;
  Vec2 mean;
  Sym2 cov, inv;
  double log_norm;  // log_w - log(2pi) - 0.5 log det
};

void refresh(Comp& c) {
  const double det = c.cov.det();
  c.inv = c.cov.inverse();
  c.log_norm = c.log_w - kLog2Pi - 0.5 * std::log(det);
}

double comp_log_pdf(const Comp& c, const Vec2& x) {
  const Vec2 z = x - c.mean;
  return c.log_norm - 0.5 * (z.x * (c.inv.a * z.x + c.inv.b * z.y) +
                             z.y * (c.inv.b * z.x + c.inv.c * z.y));
}

// Keep the covariance safely positive definite: floor the diagonal, then
// shrink the off-diagonal if the determinant closes on zero.
Sym2 guard_cov(Sym2 s, double floor) {
  s.a = std::fmax(s.a, floor);
  s.c = std::fmax(s.c, floor);
  const double bmax = 0.999 * std::sqrt(s.a * s.c);
  s.b = std::clamp(s.b, -bmax, bmax);
  return s;
}

struct RunResult {
  bool ok = false;
  double loglik = -1e300;
  std::vector<Comp> comps;
};

RunResult run_once(const Vec2* xs, int n, int k, RngStream& rng,
                   const EmOptions& opt, double init_var) {
  RunResult res;
  res.comps.resize(k);
  for (int i = 0; i < k; ++i) {
    // Random data point plus a small jitter so coincident picks separate.
    const int idx = std::min(n - 1, int(rng.uniform() * n));
    const Vec2 jit = rng.normal2() * (0.01 * std::sqrt(init_var));
    res.comps[i].log_w = -std::log(double(k));
    res.comps[i].mean = xs[idx] + jit;
    res.comps[i].cov = Sym2::iso(init_var);
    refresh(res.comps[i]);
  }

  std::vector<double> resp(std::size_t(n) * k);
  double prev_ll = -1e300;
  for (int it = 0; it < opt.iters; ++it) {
    // E step: responsibilities and the mean log likelihood.
    double ll = 0;
    for (int j = 0; j < n; ++j) {
      double mx = -1e300;
      for (int i = 0; i < k; ++i) {
        resp[std::size_t(j) * k + i] = comp_log_pdf(res.comps[i], xs[j]);
        mx = std::fmax(mx, resp[std::size_t(j) * k + i]);
      }
      double z = 0;
      for (int i = 0; i < k; ++i)
        z += std::exp(resp[std::size_t(j) * k + i] - mx);
      const double log_z = mx + std::log(z);
      ll += log_z;
      for (int i = 0; i < k; ++i)
        resp[std::size_t(j) * k + i] =
            std::exp(resp[std::size_t(j) * k + i] - log_z);
    }
    ll /= n;
    if (!std::isfinite(ll)) return res;  // not ok

    // M step.
    for (int i = 0; i < k; ++i) {
      double w = 0;
      Vec2 mu{0, 0};
      for (int j = 0; j < n; ++j) {
        const double r = resp[std::size_t(j) * k + i];
        w += r;
        mu += xs[j] * r;
      }
      if (w < 1e-9 * n) return res;  // starved component: restart discarded
      mu *= 1.0 / w;
      Sym2 cov{0, 0, 0};
      for (int j = 0; j < n; ++j) {
        const double r = resp[std::size_t(j) * k + i];
        const Vec2 z = xs[j] - mu;
        cov.a += r * z.x * z.x;
        cov.b += r * z.x * z.y;
        cov.c += r * z.y * z.y;
      }
      cov.a /= w;
      cov.b /= w;
      cov.c /= w;
      res.comps[i].log_w = std::log(w / n);
      res.comps[i].mean = mu;
      res.comps[i].cov = guard_cov(cov, opt.cov_floor);
      refresh(res.comps[i]);
    }

    if (std::fabs(ll - prev_ll) < 1e-10) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
  }
  res.ok = true;
  res.loglik = prev_ll;
  return res;
}

}  // namespace

Gmm fit_gmm_em(const Vec2* xs, int n, int k, std::uint64_t seed,
               const EmOptions& opt) {
  if (k < 1) throw ConfigError("em: need k >= 1 components");
  if (n < 2 * k)
    throw ConfigError("em: need at least 2k points to fit k components");

  Vec2 mean{0, 0};
  for (int j = 0; j < n; ++j) mean += xs[j];
  mean *= 1.0 / n;
  double var = 0;
  for (int j = 0; j < n; ++j) var += (xs[j] - mean).norm2();
  var = std::fmax(var / (2.0 * n), opt.cov_floor);

  RunResult best;
  for (int r = 0; r < opt.restarts; ++r) {
    RngStream rng(seed, std::uint64_t(r));
    RunResult got = run_once(xs, n, k, rng, opt, var);
    if (got.ok && got.loglik > best.loglik) best = std::move(got);
  }
  if (!best.ok)
    throw MetricError(
        "em: no restart produced a stable fit (component starvation or "
        "non-finite likelihood); the data cannot support " +
        std::to_string(k) + " components");

  std::vector<GaussComp> out;
  out.reserve(k);
  for (const auto& c : best.comps)
    out.push_back({std::exp(c.log_w), c.mean, c.cov});
  return Gmm(std::move(out));
}

double gmm_mean_loglik(const Gmm& g, const Vec2* xs, int n) {
  if (n < 1) throw ConfigError("mean loglik: empty sample");
  double s = 0;
  for (int j = 0; j < n; ++j) s += g.log_density(xs[j]);
  return s / n;
}

}  // namespace compdiff
