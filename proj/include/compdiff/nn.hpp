#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compdiff/model.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/tape.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

// How the network output S(x, t) is interpreted.
//   Epsilon:   eps = S directly; no energy is available.
//   EnergyL2:  f = -||S||^2 / 2
//   EnergyDae: f = -||x - S||^2 / 2
//   EnergyIp:  f = <x, S>
// For the energy forms eps = -grad_x f, computed by differentiating through
// the network, so the exposed score -eps/sigma_t is conservative by
// construction.
enum class Parameterization { Epsilon, EnergyL2, EnergyDae, EnergyIp };

const char* to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& s);

struct MlpArch {
  int hidden = 128;
  int blocks = 4;
  int time_embed = 32;  // even, >= 4
};

std::size_t param_count(const MlpArch& a);

// t scaled to u = t/T, expanded into interleaved sin/cos features with
// E/2 geometrically spaced frequencies from 1 to 1000.
void time_features(double u, int E, double* out);

namespace detail {

// Handles into a network graph built on a tape. `f` is -1 for Epsilon.
struct MlpGraph {
  ad::NodeId x = -1;
  ad::NodeId eps = -1;
  ad::NodeId f = -1;
  std::vector<ad::NodeId> params;  // leaves in flat layout order
};

// Builds the forward graph for a batch. `u` holds t_i/T per row. When
// params_rg is set the parameter leaves participate in backward passes
// (training); x_rg controls input gradients (required for energy forms,
// since eps itself is an input gradient).
MlpGraph build_mlp_graph(ad::Tape& tape, const MlpArch& arch,
                         Parameterization p, const double* params,
                         const Vec2* xs, const double* u, int n,
                         bool params_rg, bool x_rg);

// Copies adjoint tensors (aligned with MlpGraph::params) into a flat
// gradient vector; unreached adjoints contribute zero.
void flatten_param_grads(const ad::Tape& tape, const MlpArch& arch,
                         const std::vector<ad::NodeId>& adjoints,
                         double* grad);

}  // namespace detail

// Residual MLP score network over (x, t) pairs.
class NeuralModel final : public Model {
 public:
  NeuralModel(MlpArch arch, Parameterization p, NoiseSchedule sched,
              std::uint64_t init_seed);

  const NoiseSchedule& schedule() const override { return sched_; }
  bool has_energy() const override { return param_ != Parameterization::Epsilon; }
  Vec2 score(const Vec2& x, int t) const override;
  double energy(const Vec2& x, int t) const override;
  void score_batch(const Vec2* xs, int n, int t, Vec2* out) const override;
  void energy_score_batch(const Vec2* xs, int n, int t, double* e_out,
                          Vec2* s_out) const override;

  // Raw network quantities, without the 1/sigma_t scaling of the Model
  // interface. f_out may be null; for Epsilon it must be null.
  void raw_batch(const Vec2* xs, const int* ts, int n, double* f_out,
                 Vec2* eps_out) const;
  Vec2 eps(const Vec2& x, int t) const;

  const MlpArch& arch() const { return arch_; }
  Parameterization parameterization() const { return param_; }
  std::vector<double>& params() { return w_; }
  const std::vector<double>& params() const { return w_; }

 private:
  MlpArch arch_;
  Parameterization param_;
  NoiseSchedule sched_;
  std::vector<double> w_;
};

}  // namespace compdiff
