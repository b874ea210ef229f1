#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace phasegen {

/// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and an ordered list of keys.
///
/// The result is `h_n` where `h_0 = splitmix64(seed)` and
/// `h_i = splitmix64(h_{i-1} ^ splitmix64(key_i + i))`. Order matters, so
/// (seed, 1, 2) and (seed, 2, 1) give unrelated streams.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  std::uint64_t i = 0;
  for (std::uint64_t k : keys) {
    ++i;
    h = splitmix64(h ^ splitmix64(k + i));
  }
  return h;
}

using Rng = std::mt19937_64;

}  // namespace phasegen
