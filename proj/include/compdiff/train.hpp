#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "compdiff/nn.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

struct TrainConfig {
  int iterations = 15000;
  int batch = 128;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 10.0;  // global gradient norm
  std::uint64_t seed = 1;
  int log_every = 0;  // 0 disables on_log
  std::function<void(int iter, double loss_window)> on_log;
};

struct TrainReport {
  std::vector<double> losses;  // one entry per iteration
  double final_loss = 0.0;     // mean over the last min(100, n) iterations
};

// Draws one base sample x0 ~ q_0 from the stream.
using Sampler0 = std::function<Vec2(RngStream&)>;

// Denoising score matching: minimizes E ||eps - eps_theta(xt, t)||^2 over
// (x0, t, eps) drawn fresh each iteration, Adam with bias correction and
// global-norm clipping. Iteration i draws from RngStream(seed, i), so the
// trajectory is reproducible regardless of how many values sample0 consumes.
TrainReport train_dsm(NeuralModel& model, const Sampler0& sample0,
                      const TrainConfig& cfg);

// Loss of one explicit batch at the current weights; fills the flat parameter
// gradient when grad is non-null. Shared by the trainer and by tests.
double dsm_loss(const NeuralModel& model, const std::vector<Vec2>& x0,
                const std::vector<int>& ts, const std::vector<Vec2>& eps,
                std::vector<double>* grad);

}  // namespace compdiff
