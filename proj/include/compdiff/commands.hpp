#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace compdiff {

// Parsed command line. Exactly one of config_path / preset selects the
// experiment; out_dir and seed override the config when given; threads
// follows parallel.hpp (0 = all cores, 1 = bit-deterministic).
struct CliOptions {
  std::string command;
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::vector<std::string> inputs;  // plot: sample CSV paths
};

// Dispatches and maps errors to the exit-code contract:
//   0 success, 1 failed reproduction assertion (named on stderr),
//   2 configuration / capability, 3 numeric, 4 unreliable metrics.
int run_command(const CliOptions& opt);

int cmd_train(const CliOptions& opt);
int cmd_sample(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_verify(const CliOptions& opt);
int cmd_plot(const CliOptions& opt);
int cmd_reproduce(const CliOptions& opt);

}  // namespace compdiff
