#pragma once

#include <cstdint>
#include <random>

namespace mvlrr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed from (seed, stream, index).
///
/// Streams separate the consumers inside one trial (data synthesis,
/// corruption, clustering); index is the trial or sweep-cell number. The
/// mapping is a pure function, so any trial can be replayed in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) + index);
}

}  // namespace mvlrr
