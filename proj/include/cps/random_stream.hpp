#pragma once

#include <cstdint>
#include <limits>

namespace cps {

// Counter-based random substream keyed by (seed, agent, round). The value of
// the i-th draw depends only on the key and i, so agents can be stepped in
// any order (or concurrently) and still reproduce the same transcript.
class RandomStream {
 public:
  static constexpr std::uint64_t kInitialValuesRound = std::numeric_limits<std::uint64_t>::max();

  RandomStream(std::uint64_t seed, std::uint64_t agent, std::uint64_t round)
      : key_(mix(mix(mix(seed) ^ (agent * 0xD1B54A32D192ED03ULL)) ^
                 (round * 0xABC98388FB8FAC03ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t draws() const { return counter_; }

  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cps
