#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace robsel::rng {

// Deterministic substream derivation. Every consumer of randomness owns a
// stream keyed by (seed, path...) so that results do not depend on the order
// in which independent pieces of work are executed or on the worker count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// fold a key path into a single 64-bit stream key
inline std::uint64_t derive_key(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part : path) h = splitmix64(h ^ splitmix64(part));
  return h;
}

inline std::mt19937_64 stream(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive_key(seed, path));
}

// purposes used by the simulation harness substreams
enum class Purpose : std::uint64_t {
  design = 1,
  response = 2,
  contamination = 3,
  bootstrap = 4,
};

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t run,
                              Purpose purpose, std::uint64_t extra = 0) {
  return stream(seed, {run, static_cast<std::uint64_t>(purpose), extra});
}

}  // namespace robsel::rng
