#include "compdiff/train.hpp"

#include <cmath>
#include <string>

#include "compdiff/errors.hpp"
#include "compdiff/tape.hpp"

namespace compdiff {

double dsm_loss(const NeuralModel& model, const std::vector<Vec2>& x0,
                const std::vector<int>& ts, const std::vector<Vec2>& eps,
                std::vector<double>* grad) {
  const int B = static_cast<int>(x0.size());
  if (B == 0 || ts.size() != x0.size() || eps.size() != x0.size())
    throw ConfigError("dsm_loss: batch arrays must be nonempty and equal-sized");

  const NoiseSchedule& sched = model.schedule();
  std::vector<Vec2> xt(B);
  std::vector<double> u(B);
  for (int i = 0; i < B; ++i) {
    const auto [ca, cb] = sched.marginal_coeffs(ts[i]);
    xt[i] = {ca * x0[i].x + cb * eps[i].x, ca * x0[i].y + cb * eps[i].y};
    u[i] = double(ts[i]) / sched.steps();
  }

  ad::Tape tape;
  auto g = detail::build_mlp_graph(tape, model.arch(), model.parameterization(),
                                   model.params().data(), xt.data(), u.data(),
                                   B, grad != nullptr, false);
  ad::Tensor tgt(B, 2);
  for (int i = 0; i < B; ++i) {
    tgt.at(i, 0) = eps[i].x;
    tgt.at(i, 1) = eps[i].y;
  }
  const ad::NodeId t_node = tape.leaf(std::move(tgt), false);
  const ad::NodeId r = tape.sub(g.eps, t_node);
  const ad::NodeId loss = tape.scale(tape.sum_all(tape.mul(r, r)), 1.0 / B);
  const double value = tape.val(loss).v[0];

  if (grad) {
    grad->assign(model.params().size(), 0.0);
    auto adj = tape.gradients(loss, -1, g.params);
    detail::flatten_param_grads(tape, model.arch(), adj, grad->data());
  }
  return value;
}

TrainReport train_dsm(NeuralModel& model, const Sampler0& sample0,
                      const TrainConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (cfg.batch < 1) throw ConfigError("train: batch must be >= 1");
  if (!sample0) throw ConfigError("train: no base sampler");

  const int T = model.schedule().steps();
  std::vector<double>& w = model.params();
  std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0), g;
  std::vector<Vec2> x0(cfg.batch), eps(cfg.batch);
  std::vector<int> ts(cfg.batch);

  TrainReport rep;
  rep.losses.reserve(cfg.iterations);
  double window = 0.0;
  int window_n = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(it));
    for (int i = 0; i < cfg.batch; ++i) {
      x0[i] = sample0(rng);
      ts[i] = 1 + static_cast<int>(rng.uniform_index(std::uint64_t(T)));
      eps[i] = rng.normal2();
    }

    const double loss = dsm_loss(model, x0, ts, eps, &g);
    if (!std::isfinite(loss))
      throw NumericError("training diverged: non-finite loss at iteration " +
                         std::to_string(it));
    rep.losses.push_back(loss);
    window += loss;
    ++window_n;

    double n2 = 0.0;
    for (double x : g) n2 += x * x;
    if (!std::isfinite(n2))
      throw NumericError("training diverged: non-finite gradient at iteration " +
                         std::to_string(it));
    const double gn = std::sqrt(n2);
    if (gn > cfg.clip_norm) {
      const double s = cfg.clip_norm / gn;
      for (double& x : g) x *= s;
    }

    const double c1 = 1.0 - std::pow(cfg.adam_beta1, it + 1);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, it + 1);
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g[j];
      v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
      w[j] -= cfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.adam_eps);
    }

    if (cfg.log_every > 0 && cfg.on_log && (it + 1) % cfg.log_every == 0) {
      cfg.on_log(it + 1, window / window_n);
      window = 0.0;
      window_n = 0;
    }
  }

  const int tail = std::min<int>(100, static_cast<int>(rep.losses.size()));
  double s = 0.0;
  for (int i = 0; i < tail; ++i) s += rep.losses[rep.losses.size() - 1 - i];
  rep.final_loss = s / tail;
  return rep;
}

}  // namespace compdiff
