#pragma once

#include <stdexcept>
#include <string>

namespace compdiff {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a stable process exit code (see exit_code_for).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration: bad bounds, unknown names,
// malformed config files, serialized-state format problems.
struct ConfigError : Error {
  using Error::Error;
};

// An operation was requested from an object that cannot provide it,
// e.g. energy from an EPSILON-parameterized model. Reported before any
// sampling compute starts.
struct CapabilityError : Error {
  using Error::Error;
};

// Non-finite state or values encountered mid-computation.
struct NumericError : Error {
  using Error::Error;
};

// A metric was computed but is untrustworthy (e.g. too much probability
// mass outside the evaluation grid).
struct MetricError : Error {
  using Error::Error;
};

// Checkpoint loading failures carry a machine-checkable code.
enum class CheckpointFault {
  BadMagic,
  VersionMismatch,
  Truncated,
  ChecksumMismatch,
  ArchMismatch,
};

struct CheckpointError : ConfigError {
  CheckpointFault fault;
  CheckpointError(CheckpointFault f, const std::string& msg)
      : ConfigError(msg), fault(f) {}
};

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const MetricError*>(&e)) return 4;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;  // ConfigError, CapabilityError, and anything config-shaped
}

}  // namespace compdiff
