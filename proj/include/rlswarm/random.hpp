#pragma once

#include <cstdint>
#include <random>

namespace rlswarm {

// Uniform double in [0, 1) from the top 53 bits of one draw. Used instead
// of std::uniform_real_distribution so trajectories are identical across
// standard library implementations.
inline double uniform01(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

// Mixes a master seed and an index into an independent stream seed.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace rlswarm
