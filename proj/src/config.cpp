#include "compdiff/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "compdiff/analytic.hpp"
#include "compdiff/checkpoint.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/io.hpp"

namespace compdiff {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) {
  throw ConfigError("config: " + msg);
}

const json& need(const json& obj, const std::string& ctx, const char* key) {
  if (!obj.is_object()) fail(ctx + ": expected an object");
  if (!obj.contains(key)) fail(ctx + ": missing field \"" + key + "\"");
  return obj.at(key);
}

double as_num(const json& v, const std::string& ctx) {
  if (!v.is_number()) fail(ctx + ": expected a number, got " + v.dump());
  return v.get<double>();
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) fail(ctx + ": expected an integer, got " + v.dump());
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& ctx) {
  if (!v.is_boolean()) fail(ctx + ": expected a boolean, got " + v.dump());
  return v.get<bool>();
}

std::string as_str(const json& v, const std::string& ctx) {
  if (!v.is_string()) fail(ctx + ": expected a string, got " + v.dump());
  return v.get<std::string>();
}

// Optional field accessors keep defaults in one place (the struct).
double opt_num(const json& o, const std::string& ctx, const char* k, double d) {
  return o.contains(k) ? as_num(o.at(k), ctx + "." + k) : d;
}
int opt_int(const json& o, const std::string& ctx, const char* k, int d) {
  return o.contains(k) ? as_int(o.at(k), ctx + "." + k) : d;
}
bool opt_bool(const json& o, const std::string& ctx, const char* k, bool d) {
  return o.contains(k) ? as_bool(o.at(k), ctx + "." + k) : d;
}

void reject_unknown_keys(const json& obj, const std::string& ctx,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(ctx + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) fail(ctx + ": unknown field \"" + key + "\"");
}

Vec2 vec2_from(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 2)
    fail(ctx + ": expected [x, y], got " + v.dump());
  return {as_num(v[0], ctx), as_num(v[1], ctx)};
}

Sym2 sym2_from(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.size() != 3)
    fail(ctx + ": expected a covariance [xx, xy, yy], got " + v.dump());
  return {as_num(v[0], ctx), as_num(v[1], ctx), as_num(v[2], ctx)};
}

Gmm gmm_from_components(const json& comps, const std::string& ctx) {
  if (!comps.is_array() || comps.empty())
    fail(ctx + ": \"components\" must be a nonempty array");
  std::vector<GaussComp> out;
  int i = 0;
  for (const auto& c : comps) {
    const std::string cctx = ctx + ".components[" + std::to_string(i++) + "]";
    reject_unknown_keys(c, cctx, {"w", "mean", "cov"});
    GaussComp g;
    g.w = opt_num(c, cctx, "w", 1.0);
    g.mean = vec2_from(need(c, cctx, "mean"), cctx + ".mean");
    g.cov = c.contains("cov") ? sym2_from(c.at("cov"), cctx + ".cov")
                              : Sym2::iso(1.0);
    out.push_back(g);
  }
  return Gmm(std::move(out));
}

// One distribution spec resolved to its concrete payload.
struct BuiltDist {
  std::string type;  // gmm | box | labeled_gmm (ring folds into gmm)
  Gmm gmm;
  UniformBox box;
  std::vector<int> labels;
};

BuiltDist build_distribution(const json& spec, const std::string& name) {
  const std::string ctx = "distributions." + name;
  const std::string type = as_str(need(spec, ctx, "type"), ctx + ".type");
  BuiltDist d;
  if (type == "gmm") {
    reject_unknown_keys(spec, ctx, {"type", "components"});
    d.type = "gmm";
    d.gmm = gmm_from_components(need(spec, ctx, "components"), ctx);
  } else if (type == "ring") {
    reject_unknown_keys(spec, ctx, {"type", "k", "radius", "stddev"});
    d.type = "gmm";
    d.gmm = make_ring_gmm(opt_int(spec, ctx, "k", 8),
                          opt_num(spec, ctx, "radius", 0.5),
                          opt_num(spec, ctx, "stddev", 0.3));
  } else if (type == "box") {
    reject_unknown_keys(spec, ctx, {"type", "lo", "hi"});
    d.type = "box";
    if (spec.contains("lo")) d.box.lo = vec2_from(spec.at("lo"), ctx + ".lo");
    if (spec.contains("hi")) d.box.hi = vec2_from(spec.at("hi"), ctx + ".hi");
    if (!(d.box.lo.x < d.box.hi.x) || !(d.box.lo.y < d.box.hi.y))
      fail(ctx + ": box needs lo < hi per axis");
  } else if (type == "labeled_gmm") {
    reject_unknown_keys(spec, ctx, {"type", "components", "labels"});
    d.type = "labeled_gmm";
    d.gmm = gmm_from_components(need(spec, ctx, "components"), ctx);
    const json& labels = need(spec, ctx, "labels");
    if (!labels.is_array() || static_cast<int>(labels.size()) != d.gmm.size())
      fail(ctx + ": \"labels\" must list one label per component");
    for (const auto& l : labels)
      d.labels.push_back(as_int(l, ctx + ".labels"));
  } else {
    fail(ctx + ": unknown distribution type \"" + type + "\"");
  }
  return d;
}

const json& find_distribution(const ExperimentConfig& cfg,
                              const std::string& name,
                              const std::string& ctx) {
  if (!cfg.distributions.contains(name))
    fail(ctx + ": unresolved distribution \"" + name + "\"");
  return cfg.distributions.at(name);
}

}  // namespace

MlpArch mlp_arch_from_json(const json& j) {
  MlpArch a;
  if (j.is_null()) return a;
  const std::string ctx = "arch";
  reject_unknown_keys(j, ctx, {"hidden", "blocks", "time_embed"});
  a.hidden = opt_int(j, ctx, "hidden", a.hidden);
  a.blocks = opt_int(j, ctx, "blocks", a.blocks);
  a.time_embed = opt_int(j, ctx, "time_embed", a.time_embed);
  return a;
}

std::string resolve_checkpoint_path(const ExperimentConfig& cfg,
                                    const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(cfg.out_dir) / p).string();
}

NoiseSchedule schedule_from_json(const json& j) {
  const std::string ctx = "schedule";
  reject_unknown_keys(j, ctx, {"kind", "steps", "beta_min", "beta_max"});
  const std::string kind = as_str(need(j, ctx, "kind"), ctx + ".kind");
  const int steps = opt_int(j, ctx, "steps", 100);
  if (steps < 1) fail(ctx + ": steps must be >= 1");
  if (kind == "cosine") {
    if (j.contains("beta_min") || j.contains("beta_max"))
      fail(ctx + ": beta endpoints only apply to the linear schedule");
    return NoiseSchedule::cosine(steps);
  }
  if (kind != "linear") fail(ctx + ": unknown kind \"" + kind + "\"");
  if (j.contains("beta_min") != j.contains("beta_max"))
    fail(ctx + ": give both beta endpoints or neither");
  if (j.contains("beta_min"))
    return NoiseSchedule::linear(steps, as_num(j.at("beta_min"), ctx),
                                 as_num(j.at("beta_max"), ctx));
  return NoiseSchedule::linear(steps);
}

json sampler_config_to_json(const SamplerConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"steps_per_t", c.steps_per_t},
              {"leapfrog_steps", c.leapfrog_steps},
              {"step_c", c.step_c},
              {"step_p", c.step_p},
              {"mass_c", c.mass_c},
              {"mass_p", c.mass_p},
              {"damping", c.damping},
              {"init_with_reverse_step", c.init_with_reverse_step},
              {"clip_intermediate", c.clip_intermediate},
              {"track_energy", c.track_energy},
              {"seed", c.seed}};
}

SamplerConfig sampler_config_from_json(const json& j) {
  const std::string ctx = "sampler";
  reject_unknown_keys(j, ctx,
                      {"kind", "steps_per_t", "leapfrog_steps", "step_c",
                       "step_p", "mass_c", "mass_p", "damping",
                       "init_with_reverse_step", "clip_intermediate",
                       "track_energy", "seed"});
  SamplerConfig c;
  if (j.contains("kind"))
    c.kind = sampler_kind_from_string(as_str(j.at("kind"), ctx + ".kind"));
  c.steps_per_t = opt_int(j, ctx, "steps_per_t", c.steps_per_t);
  c.leapfrog_steps = opt_int(j, ctx, "leapfrog_steps", c.leapfrog_steps);
  c.step_c = opt_num(j, ctx, "step_c", c.step_c);
  c.step_p = opt_num(j, ctx, "step_p", c.step_p);
  c.mass_c = opt_num(j, ctx, "mass_c", c.mass_c);
  c.mass_p = opt_num(j, ctx, "mass_p", c.mass_p);
  c.damping = opt_num(j, ctx, "damping", c.damping);
  c.init_with_reverse_step =
      opt_bool(j, ctx, "init_with_reverse_step", c.init_with_reverse_step);
  c.clip_intermediate =
      opt_bool(j, ctx, "clip_intermediate", c.clip_intermediate);
  c.track_energy = opt_bool(j, ctx, "track_energy", c.track_energy);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      fail(ctx + ".seed: expected an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.validate();
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown_keys(j, "top level",
                      {"schema_version", "schedule", "distributions", "models",
                       "tree", "sampler", "metrics", "verify", "seeds",
                       "out"});
  ExperimentConfig c;
  c.schema_version = as_int(need(j, "top level", "schema_version"),
                            "schema_version");
  if (c.schema_version != 1)
    fail("unsupported schema_version " + std::to_string(c.schema_version) +
         " (this build reads version 1)");

  c.schedule = need(j, "top level", "schedule");
  (void)schedule_from_json(c.schedule);  // validate eagerly

  c.distributions = j.contains("distributions") ? j.at("distributions")
                                                : json::object();
  if (!c.distributions.is_object()) fail("distributions: expected an object");
  for (const auto& [name, spec] : c.distributions.items())
    (void)build_distribution(spec, name);

  c.models = j.contains("models") ? j.at("models") : json::object();
  if (!c.models.is_object()) fail("models: expected an object");
  for (const auto& [name, spec] : c.models.items()) {
    const std::string ctx = "models." + name;
    const std::string type = as_str(need(spec, ctx, "type"), ctx + ".type");
    if (type == "analytic") {
      reject_unknown_keys(spec, ctx, {"type", "distribution"});
      (void)as_str(need(spec, ctx, "distribution"), ctx + ".distribution");
    } else if (type == "neural") {
      reject_unknown_keys(
          spec, ctx,
          {"type", "parameterization", "arch", "checkpoint", "data", "train"});
      (void)parameterization_from_string(as_str(
          need(spec, ctx, "parameterization"), ctx + ".parameterization"));
      (void)as_str(need(spec, ctx, "checkpoint"), ctx + ".checkpoint");
      if (spec.contains("arch"))
        (void)mlp_arch_from_json(spec.at("arch"));
      if (spec.contains("train")) {
        const std::string tctx = ctx + ".train";
        reject_unknown_keys(
            spec.at("train"), tctx,
            {"iterations", "batch", "lr", "seed", "resume"});
        (void)as_str(need(spec, ctx, "data"), ctx + ".data");
      }
    } else {
      fail(ctx + ": unknown model type \"" + type + "\"");
    }
  }

  c.tree = need(j, "top level", "tree");

  if (j.contains("sampler"))
    c.sampler = sampler_config_from_json(j.at("sampler"));

  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    reject_unknown_keys(m, "metrics", {"n_samples", "var_k", "ll", "gt_seed"});
    c.n_samples = opt_int(m, "metrics", "n_samples", c.n_samples);
    c.var_k = opt_int(m, "metrics", "var_k", c.var_k);
    c.want_ll = opt_bool(m, "metrics", "ll", c.want_ll);
    if (m.contains("gt_seed")) c.gt_seed = m.at("gt_seed").get<std::uint64_t>();
    if (c.n_samples < 0 || c.var_k < 0)
      fail("metrics: n_samples and var_k must be nonnegative");
  }

  if (j.contains("verify")) {
    reject_unknown_keys(j.at("verify"), "verify", {"probes"});
    c.verify_probes = opt_int(j.at("verify"), "verify", "probes",
                              c.verify_probes);
    if (c.verify_probes < 1) fail("verify.probes must be >= 1");
  }

  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array() || j.at("seeds").empty())
      fail("seeds: expected a nonempty array");
    c.seeds.clear();
    for (const auto& s : j.at("seeds"))
      c.seeds.push_back(s.get<std::uint64_t>());
  }

  if (j.contains("out")) c.out_dir = as_str(j.at("out"), "out");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return json{{"schema_version", c.schema_version},
              {"schedule", c.schedule},
              {"distributions", c.distributions},
              {"models", c.models},
              {"tree", c.tree},
              {"sampler", sampler_config_to_json(c.sampler)},
              {"metrics",
               {{"n_samples", c.n_samples},
                {"var_k", c.var_k},
                {"ll", c.want_ll},
                {"gt_seed", c.gt_seed}}},
              {"verify", {{"probes", c.verify_probes}}},
              {"seeds", c.seeds},
              {"out", c.out_dir}};
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& c, const std::string& path) {
  write_text_file(path, config_to_json(c).dump(2) + "\n");
}

BuiltExperiment build_experiment(const ExperimentConfig& cfg,
                                 const NoiseSchedule* sched_override) {
  BuiltExperiment built;
  built.sched = sched_override ? *sched_override
                               : schedule_from_json(cfg.schedule);
  const NoiseSchedule& s = built.sched;

  for (const auto& [name, spec] : cfg.models.items()) {
    const std::string ctx = "models." + name;
    const std::string type = as_str(need(spec, ctx, "type"), ctx + ".type");
    if (type == "analytic") {
      const std::string dist =
          as_str(need(spec, ctx, "distribution"), ctx + ".distribution");
      const BuiltDist d =
          build_distribution(find_distribution(cfg, dist, ctx), dist);
      if (d.type == "gmm")
        built.leaves[name] = std::make_shared<GmmModel>(d.gmm, s);
      else if (d.type == "box")
        built.leaves[name] = std::make_shared<BoxModel>(d.box, s);
      else
        built.leaves[name] =
            std::make_shared<LabeledGmmModel>(d.gmm, d.labels, s);
    } else {
      if (sched_override)
        fail(ctx + ": neural weights are tied to their training schedule; "
             "the equal-steps baseline needs analytic leaves");
      const std::string path = resolve_checkpoint_path(
          cfg, as_str(need(spec, ctx, "checkpoint"), ctx + ".checkpoint"));
      auto model = std::make_shared<NeuralModel>(load_checkpoint(path));
      if (model->schedule().describe() != s.describe())
        fail(ctx + ": checkpoint schedule (" + model->schedule().describe() +
             ") differs from the configured schedule (" + s.describe() + ")");
      built.leaves[name] = model;
    }
  }

  built.tree = tree_from_json(cfg.tree, built.leaves);
  return built;
}

std::function<Vec2(RngStream&)> base_sampler(const ExperimentConfig& cfg,
                                             const std::string& dist_name) {
  const BuiltDist d = build_distribution(
      find_distribution(cfg, dist_name, "base_sampler"), dist_name);
  if (d.type == "box") {
    const UniformBox b = d.box;
    return [b](RngStream& rng) {
      return Vec2{b.lo.x + rng.uniform() * (b.hi.x - b.lo.x),
                  b.lo.y + rng.uniform() * (b.hi.y - b.lo.y)};
    };
  }
  const Gmm g = d.gmm;  // labeled pools to its mixture for data draws
  return [g](RngStream& rng) { return g.sample(rng); };
}

}  // namespace compdiff
