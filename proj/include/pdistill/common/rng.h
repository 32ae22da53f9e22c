#pragma once

#include <cstdint>
#include <string_view>

namespace pdistill {

// splitmix64 generator. Small, fast, and bit-reproducible across platforms,
// which the standard distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one draw per call, no caching).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// Seed for an independent stream keyed by name, e.g. a parameter name.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pdistill
