#include "compdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "json.hpp"

#include "compdiff/em.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/mmd.hpp"

namespace compdiff {

LlResult ll_under_target(const SampleBatch& X, const Model& tree,
                         const GridOracle& oracle) {
  if (X.size() < 1) throw ConfigError("ll: empty sample batch");
  const GridSpec& gs = oracle.spec();

  // Floor for strays: the least normalized node density on the grid.
  double floor = 1e300;
  for (int i = 0; i < oracle.res(); ++i)
    for (int j = 0; j < oracle.res(); ++j)
      floor = std::fmin(floor, oracle.log_value(i, j));

  LlResult out;
  double sum = 0;
  int oob = 0;
  for (const auto& p : X.x) {
    const bool inside = p.x >= gs.lo.x && p.x <= gs.hi.x && p.y >= gs.lo.y &&
                        p.y <= gs.hi.y;
    if (inside) {
      sum += tree.energy(p, 1) - oracle.log_norm();
    } else {
      sum += floor;
      ++oob;
    }
  }
  out.ll = sum / X.size();
  out.oob_frac = double(oob) / X.size();
  out.reliable = out.oob_frac <= 0.05;
  return out;
}

namespace {

// Sorted per-component (var_x, var_y) vector of an EM fit, components
// ordered by mean lexicographically so the two fits line up.
std::vector<double> variance_vector(const Gmm& g) {
  std::vector<int> order(g.size());
  for (int i = 0; i < g.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Vec2 &ma = g.comp(a).mean, &mb = g.comp(b).mean;
    return ma.x != mb.x ? ma.x < mb.x : ma.y < mb.y;
  });
  std::vector<double> v;
  v.reserve(2 * g.size());
  for (int i : order) {
    v.push_back(g.comp(i).cov.a);
    v.push_back(g.comp(i).cov.c);
  }
  return v;
}

}  // namespace

double var_metric(const SampleBatch& X, const SampleBatch& truth, int k,
                  std::uint64_t fit_seed) {
  const Gmm fx = fit_gmm_em(X.x.data(), X.size(), k, fit_seed);
  const Gmm ft = fit_gmm_em(truth.x.data(), truth.size(), k, fit_seed);
  const std::vector<double> vx = variance_vector(fx);
  const std::vector<double> vt = variance_vector(ft);
  double d2 = 0;
  for (std::size_t i = 0; i < vx.size(); ++i)
    d2 += (vx[i] - vt[i]) * (vx[i] - vt[i]);
  return std::sqrt(d2);
}

MetricsReport compute_metrics(const SampleBatch& X, const SampleBatch& truth,
                              const Model& tree, const GridOracle* oracle,
                              int var_k, const ChainStats* stats,
                              std::uint64_t fit_seed) {
  MetricsReport r;
  r.tree_id = X.tree_id;
  r.config_hash = X.config_hash;
  r.seed = X.seed;
  r.n = X.size();
  r.mmd2 = mmd2(X, truth);
  if (oracle) {
    const LlResult ll = ll_under_target(X, tree, *oracle);
    r.ll_computed = true;
    r.ll = ll.ll;
    r.ll_oob_frac = ll.oob_frac;
    r.ll_reliable = ll.reliable;
  }
  r.var_k = var_k;
  if (var_k > 0) r.var_l2 = var_metric(X, truth, var_k, fit_seed);

  Vec2 mean{0, 0};
  for (const auto& p : X.x) mean += p;
  if (r.n > 0) mean *= 1.0 / r.n;
  Sym2 cov{0, 0, 0};
  for (const auto& p : X.x) {
    const Vec2 z = p - mean;
    cov.a += z.x * z.x;
    cov.b += z.x * z.y;
    cov.c += z.y * z.y;
  }
  if (r.n > 0) {
    cov.a /= r.n;
    cov.b /= r.n;
    cov.c /= r.n;
  }
  r.mean = mean;
  r.cov = cov;
  if (stats) {
    r.sampler = to_string(stats->kind);
    r.kernel_evals = stats->kernel_evals;
    r.refresh_evals = stats->refresh_evals;
    r.reverse_evals = stats->reverse_evals;
  }
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["tree_id"] = tree_id;
  j["sampler"] = sampler;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["n"] = n;
  j["mmd2"] = mmd2;
  j["ll"] = {{"computed", ll_computed},
             {"value", ll},
             {"oob_frac", ll_oob_frac},
             {"reliable", ll_reliable}};
  j["var"] = {{"k", var_k}, {"l2", var_l2}};
  j["moments"] = {{"mean", {mean.x, mean.y}},
                  {"cov", {cov.a, cov.b, cov.c}}};
  j["evals"] = {{"kernel", kernel_evals},
                {"refresh", refresh_evals},
                {"reverse", reverse_evals},
                {"total", kernel_evals + refresh_evals + reverse_evals}};
  return j.dump(2);
}

}  // namespace compdiff
