#pragma once

#include <memory>
#include <vector>

#include "compdiff/model.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

// ---------------------------------------------------------------------------
// Gaussian mixtures with full 2x2 covariances: the workhorse for analytic
// targets, ground truth, and test oracles. Diffusion maps a GMM to a GMM in
// closed form, which is what makes these models exact at every level.
// ---------------------------------------------------------------------------

struct GaussComp {
  double w = 1.0;
  Vec2 mean;
  Sym2 cov = Sym2::iso(1.0);
};

class Gmm {
 public:
  Gmm() = default;
  explicit Gmm(std::vector<GaussComp> comps);  // normalizes weights

  int size() const { return static_cast<int>(comps_.size()); }
  const GaussComp& comp(int i) const { return comps_[i]; }
  const std::vector<GaussComp>& comps() const { return comps_; }

  double log_density(const Vec2& x) const;
  Vec2 score(const Vec2& x) const;
  Vec2 sample(RngStream& rng) const;

  Vec2 mean() const;
  Sym2 cov() const;
  // Marginal CDF along axis 0 or 1 (for KS oracles).
  double marginal_cdf(int axis, double v) const;

 private:
  std::vector<GaussComp> comps_;
  // Cached per component: log w - log(2pi) - 0.5 log det, inverse cov.
  std::vector<double> log_norm_;
  std::vector<Sym2> inv_;
};

// Closed-form diffusion: component means scale by sqrt(alpha_bar_t) and
// covariances become alpha_bar_t * Sigma + sigma_t^2 I. t = 0 returns the
// input unchanged.
Gmm diffuse_gmm(const Gmm& g, const NoiseSchedule& s, int t);

// Paper 2D setups.
Gmm make_ring_gmm(int k = 8, double radius = 0.5, double stddev = 0.3);
Gmm make_mixture_pair_left();   // 3 components at x=-0.25, y in {0.5,0,-0.5}, std 0.03
Gmm make_mixture_pair_right();  // mirrored at x=+0.25

// ---------------------------------------------------------------------------
// Axis-aligned uniform box. Its diffusion is a product of per-axis
// convolutions of a uniform with a Gaussian; the density involves Gaussian
// CDF differences, computed in a tail-safe way so log densities and scores
// stay finite far outside the support.
// ---------------------------------------------------------------------------

struct UniformBox {
  Vec2 lo{-0.1, -1.0};
  Vec2 hi{0.1, 1.0};
};

// log density and score of sqrt(ab)*U[a,b] + sigma*eps per axis, combined
// over both axes. scale = sqrt(alpha_bar_t), sigma = sigma_t. scale in (0,1],
// sigma > 0.
double box_diffused_log_density(const UniformBox& b, double scale, double sigma,
                                const Vec2& x);
Vec2 box_diffused_score(const UniformBox& b, double scale, double sigma,
                        const Vec2& x);

// One diffused-uniform axis: returns log(Phi(u1) - Phi(u2)) and its
// derivative with respect to z in z-units, where u1=(z-scale*a)/sigma,
// u2=(z-scale*b)/sigma. Exposed for direct unit testing of the tail logic.
void diffused_interval_axis(double a, double b, double scale, double sigma,
                            double z, double* logp, double* dlogp_dz);

// ---------------------------------------------------------------------------
// Model wrappers.
// ---------------------------------------------------------------------------

// Analytic models know their exact density at every level, including the
// base level t = 0, and can sample the base distribution exactly.
class AnalyticModel : public Model {
 public:
  bool has_energy() const override { return true; }
  double energy(const Vec2& x, int t) const override {
    return log_density(x, t);
  }
  // Parallel over points; each element is computed independently, so results
  // match the pointwise calls for any worker count.
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override;
  void energy_score_batch(const Vec2* xs, int n, int t, double* e_out,
                          Vec2* s_out) const override;
  // t in [0, T]; t = 0 is the base distribution.
  virtual double log_density(const Vec2& x, int t) const = 0;
  virtual Vec2 sample0(RngStream& rng) const = 0;
};

class GmmModel final : public AnalyticModel {
 public:
  GmmModel(Gmm base, NoiseSchedule sched);

  const NoiseSchedule& schedule() const override { return sched_; }
  Vec2 score(const Vec2& x, int t) const override { return at(t).score(x); }
  double log_density(const Vec2& x, int t) const override {
    return at(t).log_density(x);
  }
  Vec2 sample0(RngStream& rng) const override { return base().sample(rng); }

  const Gmm& base() const { return levels_.front(); }
  const Gmm& at(int t) const;  // diffused mixture at level t

 private:
  NoiseSchedule sched_;
  std::vector<Gmm> levels_;  // index t in [0, T]
};

class BoxModel final : public AnalyticModel {
 public:
  BoxModel(UniformBox box, NoiseSchedule sched);

  const NoiseSchedule& schedule() const override { return sched_; }
  Vec2 score(const Vec2& x, int t) const override;
  double log_density(const Vec2& x, int t) const override;
  Vec2 sample0(RngStream& rng) const override;
  const UniformBox& box() const { return box_; }

 private:
  NoiseSchedule sched_;
  UniformBox box_;
};

// A GMM whose components carry class labels; supports the exact classifier
// posterior p_t(y | x_t) and the exact conditional GMMs used by guidance.
class LabeledGmmModel final : public AnalyticModel {
 public:
  LabeledGmmModel(Gmm base, std::vector<int> labels, NoiseSchedule sched);

  const NoiseSchedule& schedule() const override { return pooled_->schedule(); }
  Vec2 score(const Vec2& x, int t) const override {
    return pooled_->score(x, t);
  }
  double log_density(const Vec2& x, int t) const override {
    return pooled_->log_density(x, t);
  }
  Vec2 sample0(RngStream& rng) const override { return pooled_->sample0(rng); }

  int n_labels() const { return static_cast<int>(conditionals_.size()); }
  const std::vector<int>& labels() const { return labels_; }
  // Prior class probability p(y).
  double class_prior(int y) const;
  // Exact diffused conditional q_t(x | y) as a model.
  const GmmModel& conditional(int y) const;
  std::shared_ptr<const GmmModel> conditional_ptr(int y) const;
  const GmmModel& pooled() const { return *pooled_; }

  // log p_t(y | x) and its x-gradient at level t (t in [0, T]).
  double log_posterior(int y, const Vec2& x, int t) const;
  Vec2 posterior_score(int y, const Vec2& x, int t) const;

 private:
  std::vector<int> labels_;
  std::vector<double> priors_;
  std::shared_ptr<GmmModel> pooled_;
  std::vector<std::shared_ptr<GmmModel>> conditionals_;
};

}  // namespace compdiff
