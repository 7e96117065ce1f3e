#include "compdiff/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <utility>

#include "compdiff/checkpoint.hpp"
#include "compdiff/config.hpp"
#include "compdiff/errors.hpp"
#include "compdiff/io.hpp"
#include "compdiff/metrics.hpp"
#include "compdiff/parallel.hpp"
#include "compdiff/presets.hpp"
#include "compdiff/svg.hpp"
#include "compdiff/train.hpp"
#include "compdiff/verify.hpp"

namespace compdiff {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

ExperimentConfig resolve_config(const CliOptions& opt) {
  if (!opt.config_path.empty() && !opt.preset.empty())
    throw ConfigError("give either --config or --preset, not both");
  ExperimentConfig cfg;
  if (!opt.config_path.empty())
    cfg = load_config(opt.config_path);
  else if (!opt.preset.empty())
    cfg = make_preset(opt.preset);
  else
    throw ConfigError("give --config PATH or --preset NAME");
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  return cfg;
}

std::uint64_t run_seed(const CliOptions& opt, const ExperimentConfig& cfg) {
  return opt.seed_set ? opt.seed : cfg.sampler.seed;
}

std::string joined(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Level-1 oracle for the likelihood metric; empty when the tree offers no
// energy (nothing to normalize).
std::optional<GridOracle> make_ll_oracle(const ExperimentConfig& cfg,
                                         const ModelPtr& tree) {
  if (!cfg.want_ll || !tree->has_energy()) return std::nullopt;
  return GridOracle(GridSpec{},
                    [&tree](Vec2 x) { return tree->energy(x, 1); });
}

json metrics_to_json(const MetricsReport& r) {
  return json::parse(r.to_json());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// The same forward process discretized with more steps: linear endpoints
// scale with 1/T so the continuous beta profile is preserved; the cosine
// alpha-bar profile is T-invariant by construction.
NoiseSchedule stretch_schedule(const json& spec, int new_steps) {
  const NoiseSchedule base = schedule_from_json(spec);
  if (base.kind() == ScheduleKind::Cosine)
    return NoiseSchedule::cosine(new_steps);
  if (spec.contains("beta_min")) {
    const double scale = static_cast<double>(base.steps()) / new_steps;
    return NoiseSchedule::linear(new_steps, base.beta_min() * scale,
                                 base.beta_max() * scale);
  }
  return NoiseSchedule::linear(new_steps);
}

std::vector<Vec2> head(const std::vector<Vec2>& xs, std::size_t n) {
  return {xs.begin(), xs.begin() + std::min(n, xs.size())};
}

struct OrderingCheck {
  std::string text;
  double lhs = 0, rhs = 0;
  bool strict = true;
  bool pass() const { return strict ? lhs < rhs : lhs <= rhs; }
};

}  // namespace

int cmd_sample(const CliOptions& opt) {
  const ExperimentConfig cfg = resolve_config(opt);
  const std::uint64_t seed = run_seed(opt, cfg);
  const BuiltExperiment built = build_experiment(cfg);

  ChainStats stats;
  SampleBatch batch =
      annealed_mcmc(*built.tree, cfg.sampler, cfg.n_samples, seed, &stats);
  batch.tree_id = cfg.tree.dump();

  write_samples_csv(joined(cfg.out_dir, "samples.csv"), batch.x);
  write_json_file(joined(cfg.out_dir, "stats.json"),
                  json{{"tree_id", batch.tree_id},
                       {"config_hash", batch.config_hash},
                       {"seed", seed},
                       {"n", batch.size()},
                       {"chains", json::parse(stats.to_json())}});
  save_config(cfg, joined(cfg.out_dir, "config.json"));

  std::cout << "wrote " << batch.size() << " samples ("
            << to_string(cfg.sampler.kind) << ", " << stats.total_evals()
            << " score evals) to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  const ExperimentConfig cfg = resolve_config(opt);
  const std::uint64_t seed = run_seed(opt, cfg);
  const BuiltExperiment built = build_experiment(cfg);

  ChainStats stats;
  SampleBatch batch =
      annealed_mcmc(*built.tree, cfg.sampler, cfg.n_samples, seed, &stats);
  batch.tree_id = cfg.tree.dump();
  const SampleBatch truth =
      ground_truth_samples(built.tree, cfg.n_samples, cfg.gt_seed);
  const auto oracle = make_ll_oracle(cfg, built.tree);

  const MetricsReport report =
      compute_metrics(batch, truth, *built.tree,
                      oracle ? &*oracle : nullptr, cfg.var_k, &stats);

  write_samples_csv(joined(cfg.out_dir, "samples.csv"), batch.x);
  write_json_file(joined(cfg.out_dir, "metrics.json"),
                  metrics_to_json(report));
  save_config(cfg, joined(cfg.out_dir, "config.json"));

  std::cout << "mmd2 " << format_g17(report.mmd2);
  if (report.ll_computed) std::cout << "  ll " << format_g17(report.ll);
  if (report.var_k > 0) std::cout << "  var_l2 " << format_g17(report.var_l2);
  std::cout << "\n";

  if (report.ll_computed && !report.ll_reliable) {
    std::cerr << "warning: " << format_g17(100 * report.ll_oob_frac)
              << "% of samples left the evaluation grid; the likelihood "
                 "metric is unreliable\n";
    return 4;
  }
  return 0;
}

int cmd_verify(const CliOptions& opt) {
  const ExperimentConfig cfg = resolve_config(opt);
  const std::uint64_t seed = run_seed(opt, cfg);

  const VerificationReport rep =
      run_default_verification(seed, cfg.verify_probes);
  write_text_file(joined(cfg.out_dir, "verification.json"),
                  rep.to_json() + "\n");

  bool inconclusive = false;
  for (const ClaimRecord& c : rep.claims) {
    std::cout << c.claim << ": " << to_string(c.verdict) << "\n";
    inconclusive |= c.verdict == Verdict::Inconclusive;
  }
  if (inconclusive) {
    std::cerr << "warning: at least one claim was inconclusive (grid "
                 "diagnostics too poor to decide)\n";
    return 4;
  }
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const ExperimentConfig cfg = resolve_config(opt);
  const NoiseSchedule sched = schedule_from_json(cfg.schedule);

  int trainable = 0;
  for (const auto& [name, spec] : cfg.models.items())
    trainable += spec.at("type") == "neural" && spec.contains("train");
  if (trainable == 0)
    throw ConfigError("no neural model with a \"train\" block in the config");

  for (const auto& [name, spec] : cfg.models.items()) {
    if (spec.at("type") != "neural" || !spec.contains("train")) continue;
    const json& tr = spec.at("train");
    const MlpArch arch = mlp_arch_from_json(spec.value("arch", json()));
    const Parameterization param = parameterization_from_string(
        spec.at("parameterization").get<std::string>());
    const std::string ckpt =
        resolve_checkpoint_path(cfg, spec.at("checkpoint").get<std::string>());

    TrainConfig tc;
    tc.iterations = tr.value("iterations", tc.iterations);
    tc.batch = tr.value("batch", tc.batch);
    tc.lr = tr.value("lr", tc.lr);
    tc.seed = opt.seed_set ? opt.seed : tr.value("seed", std::uint64_t{1});

    NeuralModel model(arch, param, sched, tc.seed);
    if (tr.value("resume", false) && fs::exists(ckpt)) {
      NeuralModel loaded = load_checkpoint(ckpt);
      const MlpArch& la = loaded.arch();
      if (la.hidden != arch.hidden || la.blocks != arch.blocks ||
          la.time_embed != arch.time_embed ||
          loaded.parameterization() != param ||
          loaded.schedule().describe() != sched.describe())
        throw ConfigError("models." + name + ": resume checkpoint " + ckpt +
                          " does not match the configured architecture");
      model = std::move(loaded);
      std::cout << "resuming " << name << " from " << ckpt << "\n";
    }

    const auto sample0 =
        base_sampler(cfg, spec.at("data").get<std::string>());
    const TrainReport report = train_dsm(model, sample0, tc);
    save_checkpoint(ckpt, model);

    std::string loss_csv = "iteration,loss\n";
    for (std::size_t i = 0; i < report.losses.size(); ++i)
      loss_csv += std::to_string(i + 1) + "," + format_g17(report.losses[i]) +
                  "\n";
    const std::string loss_name =
        trainable == 1 ? "loss.csv" : "loss_" + name + ".csv";
    write_text_file(joined(cfg.out_dir, loss_name), loss_csv);

    std::cout << "trained " << name << " (" << param_count(arch)
              << " params, " << tc.iterations << " iterations): final loss "
              << format_g17(report.final_loss) << " -> " << ckpt << "\n";
  }
  save_config(cfg, joined(cfg.out_dir, "config.json"));
  return 0;
}

int cmd_plot(const CliOptions& opt) {
  if (opt.inputs.empty())
    throw ConfigError("plot: give 1 to 4 sample CSV files");
  std::vector<ScatterPanel> panels;
  for (const std::string& path : opt.inputs)
    panels.push_back({fs::path(path).stem().string(),
                      read_samples_csv(path)});
  const std::string out_dir = opt.out_dir.empty() ? "out" : opt.out_dir;
  const std::string path = joined(out_dir, "plot.svg");
  write_text_file(path, render_scatter_svg(panels));
  std::cout << "wrote " << path << " (" << panels.size() << " panels)\n";
  return 0;
}

int cmd_reproduce(const CliOptions& opt) {
  const ExperimentConfig cfg = resolve_config(opt);
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (opt.seed_set)
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = opt.seed + i;

  const BuiltExperiment built = build_experiment(cfg);
  const SampleBatch truth =
      ground_truth_samples(built.tree, cfg.n_samples, cfg.gt_seed);
  write_samples_csv(joined(cfg.out_dir, "ground_truth.csv"), truth.x);
  const auto oracle = make_ll_oracle(cfg, built.tree);

  const std::vector<ReproduceMethod> methods = reproduce_methods(cfg);
  const int stretched_T =
      built.sched.steps() * equal_steps_budget(cfg.sampler);
  const NoiseSchedule stretched = stretch_schedule(cfg.schedule, stretched_T);
  const BuiltExperiment built_eq = build_experiment(cfg, &stretched);

  std::string table =
      "method,seed,mmd2,ll,ll_reliable,var_l2,mean_x,mean_y,cov_xx,cov_xy,"
      "cov_yy,mean_accept,kernel_evals,refresh_evals,reverse_evals,"
      "total_evals\n";
  std::map<std::string, std::vector<double>> mmd2s, lls, vars;
  std::map<std::string, SampleBatch> first_seed_batch;
  std::map<std::uint64_t, std::vector<Vec2>> hmc_by_seed;

  for (const ReproduceMethod& m : methods) {
    for (const std::uint64_t s : seeds) {
      ChainStats stats;
      const Model& target = m.equal_steps ? *built_eq.tree : *built.tree;
      SampleBatch batch =
          annealed_mcmc(target, m.cfg, cfg.n_samples, s, &stats);
      batch.tree_id = cfg.tree.dump();
      write_samples_csv(joined(cfg.out_dir, "samples_" + m.name + "_seed" +
                                                std::to_string(s) + ".csv"),
                        batch.x);
      // Metrics always target the configured schedule's level-1 tree.
      const MetricsReport r =
          compute_metrics(batch, truth, *built.tree,
                          oracle ? &*oracle : nullptr, cfg.var_k, &stats);
      table += m.name + "," + std::to_string(s) + "," + format_g17(r.mmd2) +
               "," + (r.ll_computed ? format_g17(r.ll) : "") + "," +
               (r.ll_computed ? (r.ll_reliable ? "1" : "0") : "") + "," +
               (r.var_k > 0 ? format_g17(r.var_l2) : "") + "," +
               format_g17(r.mean.x) + "," + format_g17(r.mean.y) + "," +
               format_g17(r.cov.a) + "," + format_g17(r.cov.b) + "," +
               format_g17(r.cov.c) + "," + format_g17(stats.mean_accept()) +
               "," + std::to_string(r.kernel_evals) + "," +
               std::to_string(r.refresh_evals) + "," +
               std::to_string(r.reverse_evals) + "," +
               std::to_string(r.kernel_evals + r.refresh_evals +
                              r.reverse_evals) +
               "\n";
      mmd2s[m.name].push_back(r.mmd2);
      if (r.ll_computed) lls[m.name].push_back(r.ll);
      if (r.var_k > 0) vars[m.name].push_back(r.var_l2);
      if (s == seeds.front()) first_seed_batch[m.name] = batch;
      if (m.name == "hmc") hmc_by_seed[s] = batch.x;
    }
    std::cout << m.name << ": median mmd2 "
              << format_g17(median(mmd2s[m.name])) << " over "
              << seeds.size() << " seeds\n";
  }
  write_text_file(joined(cfg.out_dir, "metrics.csv"), table);

  // Verification claims ride along with every reproduction run.
  const VerificationReport vrep =
      run_default_verification(seeds.front(), cfg.verify_probes);
  write_text_file(joined(cfg.out_dir, "verification.json"),
                  vrep.to_json() + "\n");
  std::map<std::string, std::string> verdicts;
  for (const ClaimRecord& c : vrep.claims)
    verdicts[c.claim] = to_string(c.verdict);

  // Figure panels: component bases, ground truth, plain reverse, HMC.
  {
    std::vector<ScatterPanel> panels;
    bool analytic_leaves = true;
    for (const auto& [name, leaf] : built.leaves)
      analytic_leaves &=
          dynamic_cast<const AnalyticModel*>(leaf.get()) != nullptr;
    if (analytic_leaves && !built.leaves.empty()) {
      ScatterPanel comp{"components", {}};
      int li = 0;
      for (const auto& [name, leaf] : built.leaves) {
        RngStream rng(cfg.gt_seed, 1000 + li++);
        const auto* a = dynamic_cast<const AnalyticModel*>(leaf.get());
        for (int i = 0; i < 1000; ++i) comp.points.push_back(a->sample0(rng));
      }
      panels.push_back(std::move(comp));
    }
    panels.push_back({"ground truth", head(truth.x, 2000)});
    panels.push_back({"reverse", head(first_seed_batch["reverse"].x, 2000)});
    panels.push_back({"hmc", head(first_seed_batch["hmc"].x, 2000)});
    write_text_file(joined(cfg.out_dir, "plot.svg"),
                    render_scatter_svg(panels));
  }

  // Ordering assertions over across-seed medians.
  const auto med = [&](const std::string& name) {
    return median(mmd2s.at(name));
  };
  std::vector<OrderingCheck> checks;
  const auto add = [&](const std::string& a, const std::string& b,
                       bool strict) {
    checks.push_back({"median mmd2: " + a + (strict ? " < " : " <= ") + b,
                      med(a), med(b), strict});
  };
  if (opt.preset == "equal-steps-baseline") {
    add("hmc", "reverse_equal_steps", true);
    add("hmc", "reverse", true);
  } else if (opt.preset == "guidance2d") {
    add("hmc", "reverse", true);
    add("mala", "reverse", true);
  } else if (opt.preset == "mixture2d") {
    // Mixtures of analytic leaves compose exactly (the verification suite
    // confirms the score identity), so every sampler sits at the MMD noise
    // floor and only the reverse-vs-adjusted gap is resolvable.
    add("hmc", "reverse", true);
  } else {
    // Every MCMC refinement beats plain reverse diffusion, the adjusted
    // kernel in each family is no worse than its unadjusted variant, and
    // adjusted HMC is the best method overall (including against the
    // equal-budget reverse baseline).
    add("hmc", "mala", true);
    add("hmc", "u-hmc", false);
    add("mala", "ula", false);
    add("u-hmc", "reverse", true);
    add("ula", "reverse", true);
    add("mala", "reverse", true);
    add("hmc", "reverse", true);
    add("hmc", "reverse_equal_steps", true);
  }

  json summary{{"preset", opt.preset.empty() ? "custom" : opt.preset},
               {"n_samples", cfg.n_samples},
               {"seeds", seeds}};
  json jmed = json::object();
  for (const auto& [name, vals] : mmd2s) jmed[name] = median(vals);
  summary["median_mmd2"] = jmed;
  if (!lls.empty()) {
    json jll = json::object();
    for (const auto& [name, vals] : lls) jll[name] = median(vals);
    summary["median_ll"] = jll;
  }
  if (!vars.empty()) {
    json jv = json::object();
    for (const auto& [name, vals] : vars) jv[name] = median(vals);
    summary["median_var_l2"] = jv;
  }

  bool pass = true;
  json jorder = json::array();
  for (const OrderingCheck& c : checks) {
    jorder.push_back(json{{"ordering", c.text},
                          {"lhs", c.lhs},
                          {"rhs", c.rhs},
                          {"pass", c.pass()}});
    if (c.pass()) {
      std::cout << "ok: " << c.text << " (" << format_g17(c.lhs) << " vs "
                << format_g17(c.rhs) << ")\n";
    } else {
      std::cerr << "failed ordering: " << c.text << " (" << format_g17(c.lhs)
                << " vs " << format_g17(c.rhs) << ")\n";
      pass = false;
    }
  }
  summary["orderings"] = jorder;

  // Mode coverage: every true mode of the mixture target must attract a
  // nontrivial share of HMC samples, in every seed's run.
  if (opt.preset == "mixture2d") {
    std::vector<Vec2> centers;
    const Gmm left = make_mixture_pair_left();
    const Gmm right = make_mixture_pair_right();
    for (const GaussComp& c : left.comps()) centers.push_back(c.mean);
    for (const GaussComp& c : right.comps()) centers.push_back(c.mean);
    double min_cov = 1.0;
    for (const std::uint64_t s : seeds) {
      const std::vector<Vec2>& xs = hmc_by_seed.at(s);
      std::vector<int> counts(centers.size(), 0);
      for (const Vec2& p : xs) {
        int best = 0;
        double bd = 1e300;
        for (std::size_t i = 0; i < centers.size(); ++i) {
          const double d = (p - centers[i]).norm2();
          if (d < bd) bd = d, best = static_cast<int>(i);
        }
        counts[best]++;
      }
      for (const int c : counts)
        min_cov = std::min(min_cov, static_cast<double>(c) / xs.size());
    }
    summary["min_mode_coverage"] = min_cov;
    const bool cov_ok = min_cov >= 0.05;
    jorder.push_back(json{{"ordering", "min mode coverage >= 0.05"},
                          {"lhs", min_cov},
                          {"rhs", 0.05},
                          {"pass", cov_ok}});
    summary["orderings"] = jorder;
    if (cov_ok) {
      std::cout << "ok: min mode coverage " << format_g17(min_cov)
                << " >= 0.05\n";
    } else {
      std::cerr << "failed ordering: min mode coverage " << format_g17(min_cov)
                << " < 0.05\n";
      pass = false;
    }
  }

  // Preset-relevant verification verdicts.
  std::vector<std::pair<std::string, std::string>> expected_claims;
  if (opt.preset == "product2d")
    expected_claims = {{"product_score_gap", "GAP_CONFIRMED"}};
  else if (opt.preset == "mixture2d")
    expected_claims = {{"mixture_score_identity", "EQUALITY_HOLDS"}};
  else if (opt.preset == "guidance2d")
    expected_claims = {{"guidance_bayes_identity", "EQUALITY_HOLDS"},
                       {"annealed_guidance_gap", "GAP_CONFIRMED"}};
  json jclaims = json::object();
  for (const auto& [claim, verdict] : verdicts) jclaims[claim] = verdict;
  summary["claims"] = jclaims;
  for (const auto& [claim, want] : expected_claims) {
    if (verdicts[claim] != want) {
      std::cerr << "failed claim check: " << claim << " is " << verdicts[claim]
                << ", expected " << want << "\n";
      pass = false;
    }
  }

  summary["pass"] = pass;
  write_json_file(joined(cfg.out_dir, "summary.json"), summary);
  save_config(cfg, joined(cfg.out_dir, "config.json"));
  std::cout << (pass ? "all assertions passed\n" : "assertions FAILED\n");
  return pass ? 0 : 1;
}

int run_command(const CliOptions& opt) {
  try {
    set_max_threads(opt.threads);
    if (opt.command == "train") return cmd_train(opt);
    if (opt.command == "sample") return cmd_sample(opt);
    if (opt.command == "eval") return cmd_eval(opt);
    if (opt.command == "verify") return cmd_verify(opt);
    if (opt.command == "plot") return cmd_plot(opt);
    if (opt.command == "reproduce") return cmd_reproduce(opt);
    throw ConfigError("unknown command \"" + opt.command + "\"");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace compdiff
