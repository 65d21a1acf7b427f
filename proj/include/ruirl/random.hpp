// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace ruirl {

using RandomStream = std::mt19937_64;

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives an independent, reproducible generator from a master seed and a
/// stream name. All randomness in the library flows through named substreams
/// so that one seed pins an entire run.
inline RandomStream substream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t base = detail::splitmix64(seed ^ detail::fnv1a(name));
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(detail::splitmix64(base)),
                    static_cast<std::uint32_t>(detail::splitmix64(base) >> 32)};
  return RandomStream(seq);
}

/// Uniform draw on the open interval (0, 1); safe as a log/log-log argument.
inline double uniform01(RandomStream& rng) {
  std::uniform_real_distribution<double> dist(
      std::numeric_limits<double>::min(), 1.0);
  return dist(rng);
}

}  // namespace ruirl
