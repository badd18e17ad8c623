#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace deltarl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic sub-stream seed for (root, path). Trajectory j of a run
// seeded S draws from derive_seed(S, {j}); phased sampling of cell (s, a)
// at phase t uses derive_seed(S, {t, s, a, j}).
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// 64-bit seeded generator. All sampling goes through uniform(), so results
// never depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // {0, ..., n-1}
  int uniform_int(int n) {
    int i = static_cast<int>(uniform() * n);
    return i < n ? i : n - 1;
  }

  // [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // index drawn from a probability row (assumed to sum to 1)
  int categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace deltarl
