#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mfgmesh {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags for the per-trial RNG discipline. Every consumer of randomness
/// owns one stream so that architecture variants share draws wherever the
/// algorithm itself does not differ.
enum class Stream : std::uint64_t {
  Init = 1,      // initial positions and entity placement
  Entity = 2,    // shark noise / object field sampling
  Weights = 3,   // per-agent network initialisation
  Action = 4,    // per-agent action sampling
  Batch = 5,     // per-agent minibatch sampling
  Adoption = 6,  // per-agent adoption draws
};

inline Rng make_stream(std::uint64_t master, Stream tag, std::uint64_t agent = 0) {
  std::uint64_t s = mix_seed(master);
  s = mix_seed(s ^ static_cast<std::uint64_t>(tag));
  s = mix_seed(s ^ (agent + 0x5851f42d4c957f2dULL));
  return Rng{s};
}

// Uniform double in [0,1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) (n > 0).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

// Draws an index from an unnormalized nonnegative weight vector.
inline std::size_t sample_weighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // rounding fallthrough: last index with positive weight
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

}  // namespace mfgmesh
