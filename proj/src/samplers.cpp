#include "compdiff/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "compdiff/errors.hpp"
#include "compdiff/parallel.hpp"

namespace compdiff {

namespace {

constexpr std::uint64_t kFnvBasis = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t hash_str(std::uint64_t h, const std::string& s) {
  return fnv1a(h, s.data(), s.size());
}

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool is_adjusted(SamplerKind k) {
  return k == SamplerKind::Mala || k == SamplerKind::HmcPmr;
}

bool is_hmc(SamplerKind k) {
  return k == SamplerKind::Uhmc || k == SamplerKind::HmcPmr;
}

}  // namespace

const char* to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::Reverse: return "reverse";
    case SamplerKind::Ula: return "ula";
    case SamplerKind::Mala: return "mala";
    case SamplerKind::Uhmc: return "u-hmc";
    case SamplerKind::HmcPmr: return "hmc";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "reverse") return SamplerKind::Reverse;
  if (s == "ula") return SamplerKind::Ula;
  if (s == "mala") return SamplerKind::Mala;
  if (s == "u-hmc" || s == "uhmc") return SamplerKind::Uhmc;
  if (s == "hmc" || s == "hmc-pmr") return SamplerKind::HmcPmr;
  throw ConfigError("unknown sampler kind \"" + s + "\"");
}

double SamplerConfig::step_at(const NoiseSchedule& s, int t) const {
  if (step_p == 0.0) return step_c;
  if (step_p == 1.0) return step_c * s.beta(t);
  return step_c * std::pow(s.beta(t), step_p);
}

double SamplerConfig::mass_at(const NoiseSchedule& s, int t) const {
  if (mass_p == 0.0) return mass_c;
  if (mass_p == 1.0) return mass_c * s.beta(t);
  return mass_c * std::pow(s.beta(t), mass_p);
}

void SamplerConfig::validate() const {
  if (kind == SamplerKind::Reverse) return;  // kernel fields are ignored
  if (steps_per_t < 0)
    throw ConfigError("sampler: steps_per_t must be nonnegative");
  if (steps_per_t == 0 && !init_with_reverse_step)
    throw ConfigError(
        "sampler: steps_per_t = 0 without init_with_reverse_step never moves");
  if (!(step_c > 0) || !std::isfinite(step_c) || !std::isfinite(step_p))
    throw ConfigError("sampler: step scale must be positive and finite");
  if (is_hmc(kind)) {
    if (leapfrog_steps < 1)
      throw ConfigError("sampler: leapfrog_steps must be >= 1");
    if (!(mass_c > 0) || !std::isfinite(mass_c) || !std::isfinite(mass_p))
      throw ConfigError("sampler: mass scale must be positive and finite");
  }
  if (!(damping >= 0.0 && damping <= 1.0))
    throw ConfigError("sampler: damping must lie in [0, 1]");
}

std::uint64_t SamplerConfig::hash() const {
  std::uint64_t h = kFnvBasis;
  h = hash_str(h, to_string(kind));
  h = fnv1a(h, &steps_per_t, sizeof steps_per_t);
  h = fnv1a(h, &leapfrog_steps, sizeof leapfrog_steps);
  for (double v : {step_c, step_p, mass_c, mass_p, damping})
    h = hash_str(h, num17(v));
  const unsigned char flags =
      static_cast<unsigned char>((init_with_reverse_step ? 1 : 0) |
                                 (clip_intermediate ? 2 : 0));
  h = fnv1a(h, &flags, sizeof flags);
  return h;  // seed is provenance of the run, not of the configuration
}

double ChainStats::mean_accept() const {
  if (levels <= 0) return 0.0;
  double s = 0;
  for (int t = 1; t <= levels; ++t) s += accept_rate[t];
  return s / levels;
}

std::string ChainStats::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["chains"] = chains;
  j["levels"] = levels;
  j["mean_accept"] = mean_accept();
  j["kernel_evals"] = kernel_evals;
  j["refresh_evals"] = refresh_evals;
  j["reverse_evals"] = reverse_evals;
  j["total_evals"] = total_evals();
  j["tuner_warning"] = tuner_warning;
  auto per_t = [&](const std::vector<double>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (int t = 1; t < static_cast<int>(v.size()); ++t) a.push_back(v[t]);
    return a;
  };
  j["accept_rate"] = per_t(accept_rate);
  j["step_used"] = per_t(step_used);
  if (!mean_energy.empty()) j["mean_energy"] = per_t(mean_energy);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Scalar reference kernels.
// ---------------------------------------------------------------------------

Vec2 ula_step(const ScoreFn& score_fn, const Vec2& x, double step,
              RngStream& rng) {
  return detail::ula_move(x, score_fn(x), step, rng.normal2());
}

std::pair<Vec2, bool> mala_step(const EnergyFn& energy_fn,
                                const ScoreFn& score_fn, const Vec2& x,
                                double step, RngStream& rng) {
  const Vec2 s = score_fn(x);
  const double e = detail::floor_energy(energy_fn(x));
  const Vec2 xp = detail::ula_move(x, s, step, rng.normal2());
  const Vec2 sp = score_fn(xp);
  const double ep = detail::floor_energy(energy_fn(xp));
  const double lr = detail::mala_log_ratio(x, e, s, xp, ep, sp, step);
  if (detail::metropolis_accept(lr, rng)) return {xp, true};
  return {x, false};
}

std::pair<Vec2, Vec2> leapfrog(const ScoreFn& score_fn, Vec2 x, Vec2 v,
                               double step, int L, double mass) {
  detail::kick(v, score_fn(x), 0.5 * step);
  for (int l = 1; l <= L; ++l) {
    detail::drift(x, v, step, mass);
    if (l < L) detail::kick(v, score_fn(x), step);
  }
  detail::kick(v, score_fn(x), 0.5 * step);
  return {x, v};
}

std::pair<Vec2, bool> hmc_step(const EnergyFn& energy_fn,
                               const ScoreFn& score_fn, const Vec2& x,
                               double step, int L, double mass,
                               RngStream& rng) {
  const Vec2 v = detail::draw_momentum(mass, rng);
  const auto [xp, vp] = leapfrog(score_fn, x, v, step, L, mass);
  const double e = detail::floor_energy(energy_fn(x));
  const double ep = detail::floor_energy(energy_fn(xp));
  const double lr = detail::hmc_log_ratio(e, ep, v, vp, mass);
  if (detail::metropolis_accept(lr, rng)) return {xp, true};
  return {x, false};
}

Vec2 u_hmc_step(const ScoreFn& score_fn, const Vec2& x, double step, int L,
                double mass, RngStream& rng) {
  const Vec2 v = detail::draw_momentum(mass, rng);
  return leapfrog(score_fn, x, v, step, L, mass).first;
}

std::pair<Vec2, bool> hmc_pmr_step(const EnergyFn& energy_fn,
                                   const ScoreFn& score_fn, const Vec2& x,
                                   Vec2& v, double gamma, double step, int L,
                                   double mass, RngStream& rng) {
  const Vec2 lam = detail::draw_momentum(mass, rng);
  const Vec2 vr = detail::partial_refresh(v, lam, gamma);
  auto [xp, vp] = leapfrog(score_fn, x, vr, step, L, mass);
  vp = {-vp.x, -vp.y};
  const double e = detail::floor_energy(energy_fn(x));
  const double ep = detail::floor_energy(energy_fn(xp));
  const double lr = detail::hmc_log_ratio(e, ep, vr, vp, mass);
  const bool accepted = detail::metropolis_accept(lr, rng);
  Vec2 vn = accepted ? vp : vr;
  v = {-vn.x, -vn.y};
  return {accepted ? xp : x, accepted};
}

// ---------------------------------------------------------------------------
// Batched annealed driver. Chains advance in lockstep so every model
// evaluation covers the whole batch; per-chain updates reuse the detail
// helpers, which keeps chain i's trajectory bit-identical to running the
// scalar kernels on its own stream.
// ---------------------------------------------------------------------------

namespace {

struct Driver {
  const Model& m;
  const SamplerConfig& cfg;
  const NoiseSchedule& s;
  int n;
  ChainStats* stats;

  std::vector<RngStream> rngs;
  std::vector<Vec2> xs, sx;        // state and cached score at (xs, t)
  std::vector<double> ex;          // cached floored energy (adjusted kinds)
  std::vector<Vec2> xp, sp, vref, vcur;
  std::vector<double> ep;
  std::vector<unsigned char> acc;

  Driver(const Model& model, const SamplerConfig& config, int chains,
         std::uint64_t seed, ChainStats* st)
      : m(model), cfg(config), s(model.schedule()), n(chains), stats(st) {
    rngs.reserve(n);
    for (int i = 0; i < n; ++i) rngs.emplace_back(seed, i);
    xs.resize(n);
    sx.resize(n);
    ex.resize(n);
    xp.resize(n);
    sp.resize(n);
    vref.resize(n);
    vcur.resize(n);
    ep.resize(n);
    acc.resize(n);
    if (stats) {
      stats->kind = cfg.kind;
      stats->chains = n;
      stats->levels = s.steps();
      stats->accept_rate.assign(s.steps() + 1, 0.0);
      stats->step_used.assign(s.steps() + 1, 0.0);
      stats->mean_energy.clear();
      stats->kernel_evals = stats->refresh_evals = stats->reverse_evals = 0;
      stats->tuner_warning = false;
      if (cfg.track_energy && is_adjusted(cfg.kind) && cfg.steps_per_t > 0)
        stats->mean_energy.assign(s.steps() + 1, 0.0);
    }
  }

  enum class Cnt { Kernel, Refresh, Reverse };
  void count(Cnt c) {
    if (!stats) return;
    auto& field = c == Cnt::Kernel    ? stats->kernel_evals
                  : c == Cnt::Refresh ? stats->refresh_evals
                                      : stats->reverse_evals;
    field += static_cast<std::uint64_t>(n);
  }

  // One batched score pass at level t into `out`.
  void eval_score(const std::vector<Vec2>& pts, int t, std::vector<Vec2>& out,
                  Cnt c) {
    m.score_batch(pts.data(), n, t, out.data());
    count(c);
  }

  void eval_energy_score(const std::vector<Vec2>& pts, int t,
                         std::vector<double>& e_out, std::vector<Vec2>& s_out,
                         Cnt c) {
    m.energy_score_batch(pts.data(), n, t, e_out.data(), s_out.data());
    for (int i = 0; i < n; ++i) e_out[i] = detail::floor_energy(e_out[i]);
    count(c);
  }

  // Batched leapfrog from (xq, vq) using cached entry scores s0; leaves the
  // final position/score/energy in xp/sp/ep (energy only when with_energy).
  // Costs exactly L evaluations: entry scores come from the caller's cache.
  void leapfrog_batch(const std::vector<Vec2>& xq, const std::vector<Vec2>& vq,
                      const std::vector<Vec2>& s0, int t, double step,
                      double mass, int L, bool with_energy,
                      std::vector<Vec2>& vout) {
    for (int i = 0; i < n; ++i) {
      xp[i] = xq[i];
      vout[i] = vq[i];
      detail::kick(vout[i], s0[i], 0.5 * step);
    }
    for (int l = 1; l <= L; ++l) {
      for (int i = 0; i < n; ++i) detail::drift(xp[i], vout[i], step, mass);
      if (l < L) {
        eval_score(xp, t, sp, Cnt::Kernel);
        for (int i = 0; i < n; ++i) detail::kick(vout[i], sp[i], step);
      }
    }
    if (with_energy)
      eval_energy_score(xp, t, ep, sp, Cnt::Kernel);
    else
      eval_score(xp, t, sp, Cnt::Kernel);
    for (int i = 0; i < n; ++i) detail::kick(vout[i], sp[i], 0.5 * step);
  }

  SampleBatch run(std::uint64_t seed) {
    const int T = s.steps();
    const int N = cfg.kind == SamplerKind::Reverse ? 0 : cfg.steps_per_t;
    const bool reverse_init =
        cfg.kind == SamplerKind::Reverse || cfg.init_with_reverse_step;
    const int L = is_hmc(cfg.kind) ? cfg.leapfrog_steps : 1;

    for (int i = 0; i < n; ++i) xs[i] = rngs[i].normal2();

    for (int t = T; t >= 1; --t) {
      const double step_t = cfg.step_at(s, t);
      const double mass_t = cfg.mass_at(s, t);
      if (stats) stats->step_used[t] = step_t;

      if (reverse_init) {
        eval_score(xs, t, sx, Cnt::Reverse);
        const double beta = s.beta(t), alpha = s.alpha(t);
        const double rv = s.reverse_variance(t);
        for (int i = 0; i < n; ++i) {
          const Vec2 eps = t > 1 ? rngs[i].normal2() : Vec2{0.0, 0.0};
          xs[i] = detail::reverse_move(xs[i], sx[i], beta, alpha, rv, eps);
        }
      }

      long accepted = 0;
      if (N > 0) {
        switch (cfg.kind) {
          case SamplerKind::Ula:
            for (int k = 0; k < N; ++k) {
              eval_score(xs, t, sx, Cnt::Kernel);
              for (int i = 0; i < n; ++i)
                xs[i] = detail::ula_move(xs[i], sx[i], step_t,
                                         rngs[i].normal2());
            }
            break;
          case SamplerKind::Mala: {
            eval_energy_score(xs, t, ex, sx, Cnt::Refresh);
            for (int k = 0; k < N; ++k) {
              for (int i = 0; i < n; ++i)
                xp[i] = detail::ula_move(xs[i], sx[i], step_t,
                                         rngs[i].normal2());
              eval_energy_score(xp, t, ep, sp, Cnt::Kernel);
              for (int i = 0; i < n; ++i) {
                const double lr = detail::mala_log_ratio(
                    xs[i], ex[i], sx[i], xp[i], ep[i], sp[i], step_t);
                if (detail::metropolis_accept(lr, rngs[i])) {
                  xs[i] = xp[i];
                  ex[i] = ep[i];
                  sx[i] = sp[i];
                  ++accepted;
                }
              }
            }
            break;
          }
          case SamplerKind::Uhmc: {
            eval_score(xs, t, sx, Cnt::Refresh);
            for (int k = 0; k < N; ++k) {
              for (int i = 0; i < n; ++i)
                vref[i] = detail::draw_momentum(mass_t, rngs[i]);
              leapfrog_batch(xs, vref, sx, t, step_t, mass_t, L, false, vcur);
              std::swap(xs, xp);
              std::swap(sx, sp);
            }
            break;
          }
          case SamplerKind::HmcPmr: {
            eval_energy_score(xs, t, ex, sx, Cnt::Refresh);
            for (int i = 0; i < n; ++i)
              vcur[i] = detail::draw_momentum(mass_t, rngs[i]);
            for (int k = 0; k < N; ++k) {
              for (int i = 0; i < n; ++i) {
                const Vec2 lam = detail::draw_momentum(mass_t, rngs[i]);
                vref[i] = detail::partial_refresh(vcur[i], lam, cfg.damping);
              }
              leapfrog_batch(xs, vref, sx, t, step_t, mass_t, L, true, vcur);
              for (int i = 0; i < n; ++i) {
                vcur[i] = {-vcur[i].x, -vcur[i].y};
                const double lr =
                    detail::hmc_log_ratio(ex[i], ep[i], vref[i], vcur[i],
                                          mass_t);
                const bool ok = detail::metropolis_accept(lr, rngs[i]);
                if (ok) {
                  xs[i] = xp[i];
                  ex[i] = ep[i];
                  sx[i] = sp[i];
                  ++accepted;
                } else {
                  vcur[i] = vref[i];
                }
                vcur[i] = {-vcur[i].x, -vcur[i].y};
              }
            }
            break;
          }
          case SamplerKind::Reverse:
            break;
        }
      }

      if (stats) {
        stats->accept_rate[t] =
            is_adjusted(cfg.kind) && N > 0 && n > 0
                ? static_cast<double>(accepted) / (static_cast<double>(N) * n)
                : 1.0;
        if (!stats->mean_energy.empty()) {
          double me = 0;
          for (int i = 0; i < n; ++i) me += ex[i];
          stats->mean_energy[t] = n > 0 ? me / n : 0.0;
        }
      }

      for (int i = 0; i < n; ++i)
        if (!xs[i].finite())
          throw NumericError("sampler state non-finite at t=" +
                             std::to_string(t) + ", chain " +
                             std::to_string(i));

      if (cfg.clip_intermediate && t > 1)
        for (int i = 0; i < n; ++i) {
          xs[i].x = std::clamp(xs[i].x, -1.0, 1.0);
          xs[i].y = std::clamp(xs[i].y, -1.0, 1.0);
        }
    }

    SampleBatch out;
    out.x = std::move(xs);
    out.config_hash = cfg.hash();
    out.seed = seed;
    return out;
  }
};

}  // namespace

SampleBatch reverse_diffusion(const Model& m, int n, std::uint64_t seed,
                              ChainStats* stats) {
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Reverse;
  Driver d(m, cfg, n, seed, stats);
  return d.run(seed);
}

SampleBatch annealed_mcmc(const Model& tree, const SamplerConfig& cfg, int n,
                          std::uint64_t seed, ChainStats* stats) {
  cfg.validate();
  if (is_adjusted(cfg.kind) && cfg.kind != SamplerKind::Reverse &&
      !tree.has_energy())
    throw CapabilityError(std::string("sampler: ") + to_string(cfg.kind) +
                          " needs energies, but the tree exposes none");
  Driver d(tree, cfg, n, seed, stats);
  return d.run(seed);
}

// ---------------------------------------------------------------------------
// Acceptance-rate tuning.
// ---------------------------------------------------------------------------

TuneResult tune_step_sizes(const Model& tree, SamplerKind kind,
                           double target_rate, const SamplerConfig& base,
                           int pilot_chains, std::uint64_t seed) {
  if (!is_adjusted(kind))
    throw ConfigError("tuner: only adjusted kinds (mala, hmc) are tunable");
  if (pilot_chains < 1) throw ConfigError("tuner: pilot_chains must be >= 1");
  if (!(target_rate > 0.0 && target_rate <= 1.0))
    throw ConfigError("tuner: target rate must lie in (0, 1]");

  SamplerConfig cfg = base;
  cfg.kind = kind;
  cfg.track_energy = false;

  TuneResult best;
  best.c = base.step_c;
  best.achieved_rate = -1.0;  // any measured rate is closer to the target
  best.warning = true;
  int used = 0;

  // Runs one pilot, tracks the closest rate so far, and reports whether the
  // +/- 10 point band has been hit.
  const auto probe = [&](double c) {
    cfg.step_c = c;
    ChainStats st;
    (void)annealed_mcmc(tree, cfg, pilot_chains, seed, &st);
    ++used;
    const double rate = st.mean_accept();
    if (std::fabs(rate - target_rate) <
        std::fabs(best.achieved_rate - target_rate)) {
      best.c = c;
      best.achieved_rate = rate;
      best.pilot_stats = std::move(st);
    }
    if (std::fabs(rate - target_rate) <= 0.10) best.warning = false;
    return rate;
  };

  // Acceptance falls as c grows: expand hi until the rate drops below the
  // target, then bisect. Both phases share the 20-iteration budget.
  double lo = base.step_c * 1e-4, hi = base.step_c;
  while (used < 20) {
    const double rate = probe(hi);
    if (!best.warning) return best;
    if (rate < target_rate) break;
    lo = hi;
    hi *= 4.0;
  }
  while (used < 20) {
    const double mid = 0.5 * (lo + hi);
    const double rate = probe(mid);
    if (!best.warning) return best;
    if (rate > target_rate)
      lo = mid;
    else
      hi = mid;
  }
  best.pilot_stats.tuner_warning = true;
  return best;
}

}  // namespace compdiff
