#pragma once

// Counter-based uniform stream: the k-th draw of stream s under seed is a
// pure function of (seed, s, k), built from the SplitMix64 finaliser.
// Results do not depend on thread scheduling or platform.

#include <cstdint>

namespace convexmdp {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ + counter * 0xD1B54A32D192ED03ULL);
  }

  /// Uniform on the open interval (0, 1).
  constexpr double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

}  // namespace convexmdp
