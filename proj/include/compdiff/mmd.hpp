#pragma once

#include "compdiff/samplers.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

// Unbiased squared-MMD estimator with a Gaussian kernel
// k(a,b) = exp(-|a-b|^2 / (2 sigma^2)). The estimator may dip slightly
// below zero; callers get the raw value. Throws ConfigError unless both
// sides have at least 2 points. Pairwise sums are accumulated per row in a
// fixed order, so parallel and serial runs agree bitwise.
double mmd2(const Vec2* x, int n, const Vec2* y, int m);
double mmd2(const SampleBatch& x, const SampleBatch& y);

// Bandwidth rule: lower median of pairwise distances over the pooled
// sample, taken on a deterministic stride subsample of at most 1024 points
// per side so the cost stays bounded; falls back to 1 when the median
// degenerates to 0.
double mmd_bandwidth(const Vec2* x, int n, const Vec2* y, int m);

}  // namespace compdiff
