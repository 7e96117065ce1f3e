#pragma once

#include "compdiff/schedule.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

// A model of one noising process: for each level t it knows the score
// (gradient of log density) of the diffused distribution q_t, and, when
// has_energy() is true, an unnormalized log density ("energy", higher =
// more probable) whose gradient the score is. Analytic models expose the
// exact normalized log q_t; neural energy models expose f_theta / sigma_t,
// which matches log q_t only up to an additive constant. Samplers and
// compositions rely only on differences of energies, never absolute values.
class Model {
 public:
  virtual ~Model() = default;

  virtual const NoiseSchedule& schedule() const = 0;
  virtual bool has_energy() const = 0;

  // t in [1, T]. Analytic subclasses additionally accept t = 0 (the base
  // distribution) through their own interfaces.
  virtual Vec2 score(const Vec2& x, int t) const = 0;

  // Throws CapabilityError when has_energy() is false.
  virtual double energy(const Vec2& x, int t) const = 0;

  // Batched evaluation over points that share a level. Default loops; the
  // neural model overrides with a single tape pass. Results are identical
  // to pointwise calls element by element.
  virtual void score_batch(const Vec2* xs, int n, int t, Vec2* out) const {
    for (int i = 0; i < n; ++i) out[i] = score(xs[i], t);
  }
  virtual void energy_score_batch(const Vec2* xs, int n, int t, double* e_out,
                                  Vec2* s_out) const {
    for (int i = 0; i < n; ++i) {
      e_out[i] = energy(xs[i], t);
      s_out[i] = score(xs[i], t);
    }
  }
};

}  // namespace compdiff
