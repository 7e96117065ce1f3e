#include "compdiff/presets.hpp"

#include "compdiff/analytic.hpp"
#include "compdiff/errors.hpp"

namespace compdiff {

namespace {

using json = nlohmann::ordered_json;

json gmm_components_json(const Gmm& g) {
  json arr = json::array();
  for (const GaussComp& c : g.comps())
    arr.push_back(json{{"w", c.w},
                       {"mean", {c.mean.x, c.mean.y}},
                       {"cov", {c.cov.a, c.cov.b, c.cov.c}}});
  return arr;
}

// Shared 2D protocol: T=100 linear schedule, HMC with 3 kernel steps of 3
// leapfrog steps each at a constant step size of 0.03 and unit mass, one
// reverse step on entering each level. The Langevin family's settings live
// in reproduce_methods.
ExperimentConfig base_2d() {
  ExperimentConfig c;
  c.schedule = json{{"kind", "linear"}, {"steps", 100}};
  c.sampler.kind = SamplerKind::HmcPmr;
  c.sampler.steps_per_t = 3;
  c.sampler.leapfrog_steps = 3;
  c.sampler.step_c = 0.03;
  c.sampler.step_p = 0.0;
  c.sampler.mass_c = 1.0;
  c.sampler.mass_p = 0.0;
  c.sampler.damping = 0.9;  // partial momentum refresh between kernel steps
  c.sampler.init_with_reverse_step = true;
  c.n_samples = 10000;
  return c;
}

constexpr int kMalaStepsPerT = 10;
constexpr double kMalaStepC = 0.002;

}  // namespace

std::vector<std::string> preset_names() {
  return {"product2d", "mixture2d", "equal-steps-baseline", "guidance2d"};
}

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig c = base_2d();
  c.out_dir = "out/" + name;

  if (name == "product2d" || name == "equal-steps-baseline") {
    c.distributions = json{
        {"ring",
         {{"type", "ring"}, {"k", 8}, {"radius", 0.5}, {"stddev", 0.3}}},
        {"box", {{"type", "box"}, {"lo", {-0.1, -1.0}}, {"hi", {0.1, 1.0}}}}};
    c.models = json{
        {"ring", {{"type", "analytic"}, {"distribution", "ring"}}},
        {"box", {{"type", "analytic"}, {"distribution", "box"}}}};
    c.tree = json{{"product", {json{{"leaf", "ring"}}, json{{"leaf", "box"}}}}};
    c.var_k = 2;  // ring cap intersects the box near (0, +-0.5)
    return c;
  }
  if (name == "mixture2d") {
    c.distributions = json{
        {"left",
         {{"type", "gmm"},
          {"components", gmm_components_json(make_mixture_pair_left())}}},
        {"right",
         {{"type", "gmm"},
          {"components", gmm_components_json(make_mixture_pair_right())}}}};
    c.models = json{
        {"left", {{"type", "analytic"}, {"distribution", "left"}}},
        {"right", {{"type", "analytic"}, {"distribution", "right"}}}};
    c.tree = json{
        {"mixture",
         {{"children", {json{{"leaf", "left"}}, json{{"leaf", "right"}}}},
          {"weights", {0.5, 0.5}}}}};
    c.var_k = 6;
    return c;
  }
  if (name == "guidance2d") {
    const Gmm pair({{0.5, {-0.7, 0.0}, Sym2::iso(0.0625)},
                    {0.5, {0.7, 0.0}, Sym2::iso(0.0625)}});
    c.distributions = json{
        {"pair",
         {{"type", "labeled_gmm"},
          {"components", gmm_components_json(pair)},
          {"labels", {0, 1}}}}};
    c.models =
        json{{"pair", {{"type", "analytic"}, {"distribution", "pair"}}}};
    c.tree = json{{"guidance",
                   {{"prior", json{{"leaf", "pair"}}},
                    {"term",
                     json{{"classifier",
                           {{"model", "pair"}, {"label", 0}}}}},
                    {"lambda", 3.0}}}};
    c.var_k = 1;  // the annealed posterior concentrates on one blob
    return c;
  }
  throw ConfigError("unknown preset \"" + name +
                    "\" (expected product2d, mixture2d, equal-steps-baseline "
                    "or guidance2d)");
}

int equal_steps_budget(const SamplerConfig& hmc) {
  return 1 + hmc.steps_per_t * hmc.leapfrog_steps;
}

std::vector<ReproduceMethod> reproduce_methods(const ExperimentConfig& cfg) {
  SamplerConfig rev = cfg.sampler;
  rev.kind = SamplerKind::Reverse;

  // Langevin family: 10 kernel steps per level at a constant 0.002, the
  // same published protocol the HMC settings in the presets come from.
  SamplerConfig mala = cfg.sampler;
  mala.kind = SamplerKind::Mala;
  mala.steps_per_t = kMalaStepsPerT;
  mala.leapfrog_steps = 1;
  mala.step_c = kMalaStepC;
  mala.step_p = 0.0;
  SamplerConfig ula = mala;
  ula.kind = SamplerKind::Ula;

  SamplerConfig hmc = cfg.sampler;
  hmc.kind = SamplerKind::HmcPmr;
  SamplerConfig uhmc = hmc;
  uhmc.kind = SamplerKind::Uhmc;

  return {{"reverse", rev, false}, {"reverse_equal_steps", rev, true},
          {"ula", ula, false},     {"mala", mala, false},
          {"u-hmc", uhmc, false},  {"hmc", hmc, false}};
}

}  // namespace compdiff
