#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "compdiff/compose.hpp"
#include "compdiff/nn.hpp"
#include "compdiff/samplers.hpp"
#include "compdiff/schedule.hpp"

namespace compdiff {

// Declarative experiment description, the unit the CLI operates on. The
// nested specs (schedule, distributions, models, tree) stay as parsed JSON:
// they are validated structurally here and resolved into live objects by
// build_experiment, so parse -> serialize -> parse is exact by construction.
//
// Schema (schema_version 1):
//   schedule        {"kind":"linear"|"cosine","steps":T[,beta_min,beta_max]}
//   distributions   name -> {"type":"gmm","components":[{"w","mean","cov"}]}
//                         | {"type":"ring","k","radius","stddev"}
//                         | {"type":"box","lo","hi"}
//                         | {"type":"labeled_gmm","components",...,"labels"}
//   models          name -> {"type":"analytic","distribution":NAME}
//                         | {"type":"neural","parameterization","arch":
//                            {"hidden","blocks","time_embed"},
//                            "checkpoint":PATH,"data":NAME,
//                            "train":{"iterations","batch","lr","seed",
//                                     "resume"}}
//   tree            composition expression (see compose serialization)
//   sampler         SamplerConfig fields plus "kind"
//   metrics         {"n_samples","var_k","ll","gt_seed"}
//   verify          {"probes"}
//   seeds           run seeds for reproduction protocols
//   out             default output directory
// Covariances are [xx, xy, yy]; vectors are [x, y]. Relative checkpoint
// paths resolve against the output directory.
struct ExperimentConfig {
  int schema_version = 1;
  nlohmann::ordered_json schedule;
  nlohmann::ordered_json distributions;
  nlohmann::ordered_json models;
  nlohmann::ordered_json tree;
  SamplerConfig sampler;
  int n_samples = 10000;
  int var_k = 0;  // 0 disables the EM variance metric
  bool want_ll = true;
  std::uint64_t gt_seed = 9001;  // ground-truth draw, kept off the run seeds
  int verify_probes = 200;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "out";
};

nlohmann::ordered_json sampler_config_to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const nlohmann::ordered_json& j);

// Both directions validate: unknown keys, missing fields, wrong types and
// unsupported schema versions all raise ConfigError naming the offender.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& c, const std::string& path);

// Live objects resolved from the declarative specs. Leaves are keyed by
// model name; the registry round-trips through tree_to_json.
struct BuiltExperiment {
  NoiseSchedule sched = NoiseSchedule::default_linear();
  LeafRegistry leaves;
  ModelPtr tree;
};

NoiseSchedule schedule_from_json(const nlohmann::ordered_json& j);

// Resolves every name reference and loads neural checkpoints. A non-null
// sched_override rebuilds the analytic leaves on that schedule instead
// (the equal-steps baseline); neural leaves reject overrides since their
// weights are tied to the training schedule.
BuiltExperiment build_experiment(const ExperimentConfig& cfg,
                                 const NoiseSchedule* sched_override = nullptr);

// Exact base-distribution sampler for a named distribution (training data).
std::function<Vec2(RngStream&)> base_sampler(const ExperimentConfig& cfg,
                                             const std::string& dist_name);

// Shared by cmd_train and build_experiment.
MlpArch mlp_arch_from_json(const nlohmann::ordered_json& j);
std::string resolve_checkpoint_path(const ExperimentConfig& cfg,
                                    const std::string& path);

}  // namespace compdiff
