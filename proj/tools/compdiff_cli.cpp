#include <string>
#include <vector>

#include "CLI11.hpp"

#include "compdiff/commands.hpp"

// Subcommand surface: train | sample | eval | verify | plot | reproduce,
// each taking --config/--preset plus the shared overrides. Everything else
// lives in the config file.
int main(int argc, char** argv) {
  CLI::App app{"compositional diffusion sampling toolkit"};
  app.require_subcommand(1);

  compdiff::CliOptions opt;

  const auto add_common = [&](CLI::App* sub, bool with_experiment) {
    if (with_experiment) {
      sub->add_option("--config", opt.config_path,
                      "experiment config file (JSON)");
      sub->add_option("--preset", opt.preset,
                      "built-in experiment: product2d, mixture2d, "
                      "equal-steps-baseline, guidance2d");
    }
    sub->add_option("--out", opt.out_dir, "output directory override");
    sub->add_option("--seed", opt.seed, "run seed override")
        ->trigger_on_parse()
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--threads", opt.threads,
                    "worker threads (0 = all cores, 1 = bit-deterministic)");
  };

  add_common(app.add_subcommand("train",
                                "train the config's neural models and write "
                                "checkpoints plus loss curves"),
             true);
  add_common(app.add_subcommand(
                 "sample", "draw samples from the composed target; writes "
                           "samples.csv and stats.json"),
             true);
  add_common(app.add_subcommand(
                 "eval", "sample, then score against ground truth; writes "
                         "metrics.json"),
             true);
  add_common(app.add_subcommand(
                 "verify", "run the score-composition claim suite; writes "
                           "verification.json"),
             true);
  add_common(app.add_subcommand(
                 "reproduce", "full method comparison across seeds with "
                              "ordering assertions"),
             true);
  CLI::App* plot = app.add_subcommand(
      "plot", "render up to 4 sample CSVs as labeled scatter panels");
  plot->add_option("csv", opt.inputs, "sample CSV files (1 to 4)");
  add_common(plot, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad flags are configuration errors
  }

  opt.command = app.get_subcommands().front()->get_name();
  return compdiff::run_command(opt);
}
