#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "phdae/numerics.hpp"

namespace phdae {

/// Seed used by every deterministic sampler unless overridden
/// (CLI: PHDAE_SEED environment variable).
inline constexpr std::uint64_t kDefaultSeed = 20240117;

/// Axis-aligned sampling box.
struct Box {
  Vec lo, hi;

  static Box centered(int n, double half_width = 1.0);
  int dim() const { return static_cast<int>(lo.size()); }
};

/// Fully specified uniform double in [0, 1) from raw mt19937_64 bits;
/// avoids std::uniform_real_distribution, whose output is
/// implementation-defined.
double uniform01(std::mt19937_64& rng);

/// `count` deterministic pseudo-random points in `box`.
std::vector<Vec> sample_box(const Box& box, int count, std::uint64_t seed);

/// Multi-start grid for existence probes: the 3^d lattice over [-2, 2]^d
/// with seeded deterministic jitter, in lexicographic order.
std::vector<Vec> lattice_starts(int dim, std::uint64_t seed);

/// Per-index derived seed so parallel workers draw independent,
/// schedule-independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace phdae
