#include "compdiff/rng.hpp"

#include <string_view>

namespace compdiff {

// FNV-1a over a purpose tag, folded into the seed. Lets independent
// consumers (EM restarts, pilot chains, probe draws) share one user seed
// without colliding streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h ^ (seed * 0x9e3779b97f4a7c15ull + 0x165667b19e3779f9ull);
}

}  // namespace compdiff
