#pragma once

#include <cstdint>

#include "compdiff/analytic.hpp"

namespace compdiff {

struct EmOptions {
  int restarts = 10;
  int iters = 200;
  double cov_floor = 1e-6;  // minimum covariance diagonal entry
};

// Deterministic full-covariance EM: `restarts` seeded initializations, each
// run to convergence or `iters` rounds; the best surviving restart by mean
// log likelihood wins, ties going to the lower restart index. A restart that
// starves a component (responsibility mass ~ 0) is discarded; if every
// restart starves, throws MetricError.
Gmm fit_gmm_em(const Vec2* xs, int n, int k, std::uint64_t seed,
               const EmOptions& opt = {});

// Mean log likelihood (nats per point) of points under a mixture.
double gmm_mean_loglik(const Gmm& g, const Vec2* xs, int n);

}  // namespace compdiff
