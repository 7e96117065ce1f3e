#pragma once

#include <cstdint>
#include <functional>

namespace compdiff {

// Global worker-count knob (0 = hardware concurrency). Every parallel kernel
// in the library routes through parallel_for below, and every kernel assigns
// each output element to exactly one worker with a fixed serial reduction
// order inside the element. Consequence: results are bit-identical for any
// thread count, so tests can compare threads=1 against threads=k directly.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Uses OpenMP static scheduling when more than
// one worker is configured, otherwise a plain loop.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace compdiff
