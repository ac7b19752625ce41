// Deterministic random streams for the simulation oracle.
//
// Stream seeds are derived with splitmix64 (Steele/Lea/Flood 2014): the
// stream for trial i under master seed s is splitmix64(s ^ splitmix64(i)).
// This mapping is part of the output contract; changing it changes every
// simulated trajectory.
#pragma once

#include <cstdint>

namespace umarkov {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

// xoshiro-free: a splitmix64 sequence is a full-period 64-bit generator and
// is more than enough for the jump-chain draws made here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform on [0, 1), 53-bit mantissa, identical on every platform.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log argument.
  double next_unit_pos() { return 1.0 - next_unit(); }

 private:
  std::uint64_t state_;
};

}  // namespace umarkov
