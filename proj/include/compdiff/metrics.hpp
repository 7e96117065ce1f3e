#pragma once

#include <cstdint>
#include <string>

#include "compdiff/grid.hpp"
#include "compdiff/model.hpp"
#include "compdiff/samplers.hpp"

namespace compdiff {

struct LlResult {
  double ll = 0;         // mean nats under the normalized level-1 target
  double oob_frac = 0;   // fraction of samples outside the oracle bounds
  bool reliable = true;  // false when oob_frac exceeds 5%
};

// Mean log density of the samples under the composed target: exact energy
// at t = 1 minus the oracle's quadrature log normalizer. The oracle must be
// built over the same tree's level-1 energy. Out-of-bounds samples
// contribute the oracle's floor log density.
LlResult ll_under_target(const SampleBatch& X, const Model& tree,
                         const GridOracle& oracle);

// L2 distance between per-component variance vectors of k-component EM fits
// to X and to the ground truth, components aligned by sorting fitted means
// lexicographically. Both fits share `fit_seed`, so identical batches give
// exactly zero.
double var_metric(const SampleBatch& X, const SampleBatch& truth, int k,
                  std::uint64_t fit_seed = 17);

struct MetricsReport {
  std::string tree_id;
  std::string sampler = "unknown";
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int n = 0;
  double mmd2 = 0;  // unbiased estimator, reported raw (may dip below 0)
  bool ll_computed = false;
  double ll = 0;
  double ll_oob_frac = 0;
  bool ll_reliable = true;
  int var_k = 0;
  double var_l2 = 0;
  Vec2 mean;
  Sym2 cov;
  std::uint64_t kernel_evals = 0;
  std::uint64_t refresh_evals = 0;
  std::uint64_t reverse_evals = 0;
  std::string to_json() const;
};

// Assembles MMD/LL/Var and sample moments against a ground-truth batch.
// `oracle` may be null to skip the likelihood metric (targets without
// energies cannot be normalized); `stats` contributes evaluation counts.
MetricsReport compute_metrics(const SampleBatch& X, const SampleBatch& truth,
                              const Model& tree, const GridOracle* oracle,
                              int var_k, const ChainStats* stats = nullptr,
                              std::uint64_t fit_seed = 17);

}  // namespace compdiff
