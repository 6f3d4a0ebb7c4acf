#pragma once

// Keyed random streams. Every random draw in a simulation comes from a stream
// identified by (seed, trial, round, slot), so results do not depend on the
// order in which agents or trials are executed.

#include <cstdint>
#include <random>

namespace ctxbandit {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Reserved slot ids; agent streams use slot = agent index.
enum class StreamSlot : std::uint64_t {
  kEnvironment = 0xE0000000ULL,  // environment construction (actions, probes)
  kContext = 0xC0000000ULL,      // per-round context distribution and realization
  kDiagnostics = 0xD0000000ULL,  // resampling checks
};

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t trial, std::uint64_t round,
                                std::uint64_t slot) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ trial);
  h = detail::splitmix64(h ^ round);
  h = detail::splitmix64(h ^ slot);
  return h;
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t round,
                       std::uint64_t slot) {
  return Rng(stream_key(seed, trial, round, slot));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t round,
                       StreamSlot slot) {
  return make_stream(seed, trial, round, static_cast<std::uint64_t>(slot));
}

}  // namespace ctxbandit
