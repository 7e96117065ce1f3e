#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "compdiff/vec2.hpp"

namespace compdiff {

// Counter-based random stream (Philox4x32-10). A stream is addressed by
// (seed, stream id); draws depend only on that address and the number of
// values already consumed, never on which thread runs the chain. This is
// what makes parallel samplers worker-count invariant: chain i always uses
// RngStream(seed, i) and consumes draws in the chain's own program order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    // Key derivation mixes seed and stream so that (0,1) and (1,0) collide
    // with probability ~2^-64 rather than by construction.
    std::uint64_t k = mix64(seed ^ 0x9e3779b97f4a7c15ull);
    std::uint64_t s = mix64(stream ^ 0xbf58476d1ce4e5b9ull);
    key_[0] = static_cast<std::uint32_t>(k);
    key_[1] = static_cast<std::uint32_t>(k >> 32);
    key_[2] = static_cast<std::uint32_t>(s);
    key_[3] = static_cast<std::uint32_t>(s >> 32);
  }

  std::uint32_t next_u32() {
    if (block_pos_ == 4) refill();
    return block_[block_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1], safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // 64-bit multiply-shift; bias is < n/2^64, irrelevant at our n.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. Pairs are generated together; the spare
  // is part of the stream state so consumption order stays well defined.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec2 normal2() {
    double a = normal();
    double b = normal();
    return {a, b};
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
    std::uint32_t x0 = c0, x1 = c1, x2 = key_[2], x3 = key_[3];
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = 0xD2511F53ull * x0;
      std::uint64_t p1 = 0xCD9E8D57ull * x2;
      std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      std::uint32_t y0 = hi1 ^ x1 ^ k0;
      std::uint32_t y1 = lo1;
      std::uint32_t y2 = hi0 ^ x3 ^ k1;
      std::uint32_t y3 = lo0;
      x0 = y0;
      x1 = y1;
      x2 = y2;
      x3 = y3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    block_ = {x0, x1, x2, x3};
    block_pos_ = 0;
    ++counter_;
  }

  std::array<std::uint32_t, 4> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Deterministic per-purpose seed derivation (FNV-1a over tag, mixed with seed).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

}  // namespace compdiff
