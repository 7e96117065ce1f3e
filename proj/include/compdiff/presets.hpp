#pragma once

#include <string>
#include <vector>

#include "compdiff/config.hpp"

namespace compdiff {

// Canned experiment configurations for the reproduction protocol:
//   product2d            ring GMM x uniform box, HMC headline settings
//   mixture2d            two 3-component GMM columns, equal weights
//   equal-steps-baseline product target, focus on reverse vs stretched reverse
//   guidance2d           annealed classifier guidance (lambda = 3) on an
//                        asymmetric labeled pair
std::vector<std::string> preset_names();
ExperimentConfig make_preset(const std::string& name);

// One compared method in a reproduction run. The two reverse rows carry
// kind Reverse; the equal-steps row additionally rebuilds the target on a
// schedule stretched to T' = T * equal_steps_budget(hmc) so its evaluation
// count matches the MCMC budget.
struct ReproduceMethod {
  std::string name;
  SamplerConfig cfg;
  bool equal_steps = false;
};
std::vector<ReproduceMethod> reproduce_methods(const ExperimentConfig& cfg);
int equal_steps_budget(const SamplerConfig& hmc);  // 1 + N * L

}  // namespace compdiff
