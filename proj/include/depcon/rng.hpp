#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace depcon {

// splitmix64; used both as the stream generator and to derive sub-seeds.
// Self-contained so runs reproduce bit-exactly regardless of libstdc++
// distribution internals.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // derive an independent stream for a named sub-task
  Rng fork(std::uint64_t salt) {
    std::uint64_t s = state_ ^ (0x632be59bd9b4e019ULL * (salt + 1));
    return Rng(splitmix64(s));
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Latin hypercube sample of n points in [0,1)^dim, row-major.
inline std::vector<std::vector<double>> latin_hypercube(Rng& rng, int n, int dim) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim, 0.0));
  std::vector<int> perm(n);
  for (int d = 0; d < dim; ++d) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[i], perm[j]);
    }
    for (int i = 0; i < n; ++i)
      pts[i][d] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
  }
  return pts;
}

}  // namespace depcon
