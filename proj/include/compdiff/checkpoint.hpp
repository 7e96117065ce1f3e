#pragma once

#include <string>

#include "compdiff/nn.hpp"

namespace compdiff {

// Binary model checkpoint: magic, version, parameterization, schedule
// (kind + builder arguments), architecture, raw little-endian weights and a
// trailing checksum of everything before it. load_checkpoint throws
// CheckpointError with a specific fault for each way a file can be bad.
void save_checkpoint(const std::string& path, const NeuralModel& model);
NeuralModel load_checkpoint(const std::string& path);

}  // namespace compdiff
