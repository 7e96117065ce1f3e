#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "compdiff/model.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

enum class SamplerKind { Reverse, Ula, Mala, Uhmc, HmcPmr };

const char* to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

// Composed energies of -inf never occur for t >= 1, but a floor keeps the
// Metropolis ratio well defined if a leaf ever returns one at the boundary.
inline constexpr double kEnergyFloor = -1e12;

struct SamplerConfig {
  SamplerKind kind = SamplerKind::HmcPmr;
  int steps_per_t = 3;     // N; 0 is allowed only with init_with_reverse_step
  int leapfrog_steps = 3;  // L, HMC kinds only
  // Per-level step size c * beta_t^p and mass m_c * beta_t^{m_p}.
  double step_c = 0.03;
  double step_p = 1.0;
  double mass_c = 1.0;
  double mass_p = 0.0;
  double damping = 0.9;  // gamma in [0,1]; 0 refreshes momentum fully
  bool init_with_reverse_step = true;
  bool clip_intermediate = false;  // clamp state to [-1,1]^2 after levels t>1
  bool track_energy = false;       // record per-level mean energy (adjusted kinds)
  std::uint64_t seed = 0;          // default used by config files; call args win

  double step_at(const NoiseSchedule& s, int t) const;
  double mass_at(const NoiseSchedule& s, int t) const;
  void validate() const;        // throws ConfigError on bad combinations
  std::uint64_t hash() const;   // stable across runs; covers every field
};

// Score-evaluation ledger: kernel_evals is the equal-compute budget
// N*(L or 1)*T*chains; cache refreshes at level entry and reverse-init
// steps are tracked separately so the total stays honest.
struct ChainStats {
  SamplerKind kind = SamplerKind::Reverse;
  int chains = 0;
  int levels = 0;
  std::vector<double> accept_rate;  // [T+1], index by t; 1.0 where unadjusted
  std::vector<double> step_used;    // [T+1], index by t
  std::vector<double> mean_energy;  // [T+1] when tracked, else empty
  std::uint64_t kernel_evals = 0;
  std::uint64_t refresh_evals = 0;
  std::uint64_t reverse_evals = 0;
  bool tuner_warning = false;

  std::uint64_t total_evals() const {
    return kernel_evals + refresh_evals + reverse_evals;
  }
  double mean_accept() const;  // across t = 1..T
  std::string to_json() const;
};

struct SampleBatch {
  std::vector<Vec2> x;
  std::string tree_id;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(x.size()); }
};

// Ancestral reverse-process sampling: x_T ~ N(0,I), then for t = T..1
// x_{t-1} = (x_t + beta_t * score(x_t, t)) / sqrt(alpha_t) + sqrt(rv_t) eps,
// noiseless at t = 1, never clipped. Chain i draws from RngStream(seed, i).
SampleBatch reverse_diffusion(const Model& m, int n, std::uint64_t seed,
                              ChainStats* stats = nullptr);

// Annealed MCMC driver: x_T ~ N(0,I); for t = T..1 run one reverse step when
// configured, then N kernel steps targeting the composed level-t
// distribution; the final state is the x_0 batch. kind Reverse dispatches to
// reverse_diffusion. Chains are synchronized so model evaluations batch
// across chains; per-chain arithmetic matches the scalar kernels below
// bit for bit. Throws CapabilityError before any compute when the kernel
// needs energies the tree cannot provide, NumericError (with t and chain
// index) if a state goes non-finite.
SampleBatch annealed_mcmc(const Model& tree, const SamplerConfig& cfg, int n,
                          std::uint64_t seed, ChainStats* stats = nullptr);

// Scalar reference kernels. The target is fixed: score_fn approximates
// grad log p, energy_fn log p up to a constant. Each consumes a fixed
// number of draws per call regardless of outcome.
using ScoreFn = std::function<Vec2(const Vec2&)>;
using EnergyFn = std::function<double(const Vec2&)>;

// x' = x + (step^2/2) score(x) + step * eps.
Vec2 ula_step(const ScoreFn& score_fn, const Vec2& x, double step,
              RngStream& rng);

// ULA proposal with the exact Gaussian-kernel Metropolis correction.
std::pair<Vec2, bool> mala_step(const EnergyFn& energy_fn,
                                const ScoreFn& score_fn, const Vec2& x,
                                double step, RngStream& rng);

// L half-kick / drift / half-kick iterations on H = -energy + |v|^2/(2 mass).
std::pair<Vec2, Vec2> leapfrog(const ScoreFn& score_fn, Vec2 x, Vec2 v,
                               double step, int L, double mass);

// Full momentum resample, leapfrog, joint-density Metropolis test.
std::pair<Vec2, bool> hmc_step(const EnergyFn& energy_fn,
                               const ScoreFn& score_fn, const Vec2& x,
                               double step, int L, double mass,
                               RngStream& rng);

// hmc_step's proposal, always accepted; needs no energy.
Vec2 u_hmc_step(const ScoreFn& score_fn, const Vec2& x, double step, int L,
                double mass, RngStream& rng);

// Partial momentum refreshment: v <- gamma v + sqrt(1-gamma^2) lambda,
// leapfrog, negate, accept/reject, negate again. v is the persistent
// per-chain momentum, updated in place.
std::pair<Vec2, bool> hmc_pmr_step(const EnergyFn& energy_fn,
                                   const ScoreFn& score_fn, const Vec2& x,
                                   Vec2& v, double gamma, double step, int L,
                                   double mass, RngStream& rng);

// Bisection on the step constant c (step = c * beta_t^p, p from base) until
// the across-t mean acceptance of pilot annealed runs lands within 0.10 of
// target_rate. Gives up after 20 iterations and returns the best c seen with
// warning set. Unadjusted kinds reuse the adjusted kind's c.
struct TuneResult {
  double c = 0.0;
  double achieved_rate = 0.0;
  bool warning = false;
  ChainStats pilot_stats;
};
TuneResult tune_step_sizes(const Model& tree, SamplerKind kind,
                           double target_rate, const SamplerConfig& base,
                           int pilot_chains, std::uint64_t seed);

namespace detail {

// Shared per-chain update arithmetic so the batched driver and the scalar
// kernels produce bit-identical states from the same draws.
inline Vec2 ula_move(const Vec2& x, const Vec2& s, double step,
                     const Vec2& eps) {
  return {x.x + 0.5 * step * step * s.x + step * eps.x,
          x.y + 0.5 * step * step * s.y + step * eps.y};
}

inline double gauss_kernel_log(const Vec2& to, const Vec2& from,
                               const Vec2& s_from, double step) {
  const double mx = from.x + 0.5 * step * step * s_from.x;
  const double my = from.y + 0.5 * step * step * s_from.y;
  const double dx = to.x - mx, dy = to.y - my;
  return -(dx * dx + dy * dy) / (2.0 * step * step);
}

inline double mala_log_ratio(const Vec2& x, double e, const Vec2& s,
                             const Vec2& xp, double ep, const Vec2& sp,
                             double step) {
  return ep - e + gauss_kernel_log(x, xp, sp, step) -
         gauss_kernel_log(xp, x, s, step);
}

inline double kinetic(const Vec2& v, double mass) {
  return (v.x * v.x + v.y * v.y) / (2.0 * mass);
}

inline double hmc_log_ratio(double e, double ep, const Vec2& v,
                            const Vec2& vp, double mass) {
  return ep - e - (kinetic(vp, mass) - kinetic(v, mass));
}

// Always consumes exactly one uniform draw.
inline bool metropolis_accept(double log_ratio, RngStream& rng) {
  const double u = rng.uniform_pos();
  return log_ratio >= 0.0 || std::log(u) < log_ratio;
}

inline void kick(Vec2& v, const Vec2& s, double amount) {
  v.x += amount * s.x;
  v.y += amount * s.y;
}

inline void drift(Vec2& x, const Vec2& v, double step, double mass) {
  x.x += step * v.x / mass;
  x.y += step * v.y / mass;
}

inline Vec2 draw_momentum(double mass, RngStream& rng) {
  Vec2 v = rng.normal2();
  const double sv = std::sqrt(mass);
  v.x *= sv;
  v.y *= sv;
  return v;
}

inline Vec2 partial_refresh(const Vec2& v, const Vec2& lam, double gamma) {
  const double c = std::sqrt(1.0 - gamma * gamma);
  return {gamma * v.x + c * lam.x, gamma * v.y + c * lam.y};
}

inline double floor_energy(double e) { return std::fmax(e, kEnergyFloor); }

inline Vec2 reverse_move(const Vec2& x, const Vec2& s, double beta,
                         double alpha, double rev_var, const Vec2& eps) {
  const double inv = 1.0 / std::sqrt(alpha);
  const double sd = std::sqrt(rev_var);
  return {(x.x + beta * s.x) * inv + sd * eps.x,
          (x.y + beta * s.y) * inv + sd * eps.y};
}

}  // namespace detail

}  // namespace compdiff
