#pragma once

// Portable random streams.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so uniform and Gaussian variates are derived here:
//   uniform01: top 53 bits of one engine draw, scaled by 2^-53, in [0, 1)
//   normal:    Box-Muller on two uniform01 draws (u1 mapped to (0, 1]),
//              both variates of a pair are used, cosine branch first
// Child streams are keyed with SplitMix64 so that stream k does not depend
// on how many other streams were drawn.

#include <cstdint>
#include <random>

namespace bsdtq {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed for child stream `index` of `root`.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n). Rejection sampling, no modulo bias. Throws
  // DomainError for n == 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bsdtq
