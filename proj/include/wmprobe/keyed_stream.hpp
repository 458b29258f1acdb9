#pragma once

#include <cstdint>

namespace wmprobe {

/// Counter-based pseudo-random stream addressed by (seed, index, purpose).
///
/// Each (seed, index, purpose) triple yields an independent sequence, so one
/// image's draws never depend on how many other images were processed. The
/// generator is splitmix64 over a mixed key; every operation is fully
/// specified here, so output is identical across compilers and standard
/// libraries (unlike std::uniform_int_distribution).
class KeyedStream {
 public:
  enum Purpose : std::uint64_t { kText = 1, kPlacement = 2, kShuffle = 3 };

  KeyedStream(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose);

  std::uint64_t next();

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace wmprobe
