#pragma once

#include <array>
#include <cstdint>

namespace ltr {

// splitmix64 step; also used as the mixing function for hash-derived streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Mixes an arbitrary key sequence into one 64-bit value.
std::uint64_t hash64(std::uint64_t a, std::uint64_t b = 0x9e3779b97f4a7c15ULL,
                     std::uint64_t c = 0xbf58476d1ce4e5b9ULL);

// Seedable 64-bit generator: xoshiro256** (Blackman & Vigna), state
// initialized from the seed via splitmix64. All derived draws (uniform
// doubles from the top 53 bits, bounded integers by rejection, normals by
// the Marsaglia polar method) are defined here rather than taken from
// <random>, so identical seeds replay identical sequences on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n); n must be > 0. Rejection sampling, unbiased.
  std::uint64_t uniform_below(std::uint64_t n);

  // Standard normal via the polar method (one value per accepted pair; the
  // second root is discarded to keep the state a pure function of draws).
  double normal();

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace ltr
