#include "wmprobe/keyed_stream.hpp"

#include <cassert>

namespace wmprobe {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

KeyedStream::KeyedStream(std::uint64_t seed, std::uint64_t index,
                         std::uint64_t purpose)
    : state_(splitmix64(splitmix64(splitmix64(seed) ^ index) ^ purpose)) {}

std::uint64_t KeyedStream::next() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t KeyedStream::uniform_below(std::uint64_t bound) {
  assert(bound > 0);
  // Reject the low partial block so every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace wmprobe
