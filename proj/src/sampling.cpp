#include "phdae/sampling.hpp"

namespace phdae {

Box Box::centered(int n, double half_width) {
  Box b;
  b.lo.assign(n, -half_width);
  b.hi.assign(n, half_width);
  return b;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Vec> sample_box(const Box& box, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> out;
  out.reserve(count);
  const int n = box.dim();
  for (int s = 0; s < count; ++s) {
    Vec x(n);
    for (int i = 0; i < n; ++i)
      x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * uniform01(rng);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Vec> lattice_starts(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (dim == 0) return {Vec{}};
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= 3;
  std::vector<Vec> out;
  out.reserve(total);
  for (int idx = 0; idx < total; ++idx) {
    Vec p(dim);
    int rem = idx;
    for (int i = dim - 1; i >= 0; --i) {
      p[i] = 2.0 * (rem % 3 - 1);  // {-2, 0, 2}
      rem /= 3;
    }
    for (int i = 0; i < dim; ++i) p[i] += 0.2 * (uniform01(rng) - 0.5);
    out.push_back(std::move(p));
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 step keeps derived streams well separated
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace phdae
