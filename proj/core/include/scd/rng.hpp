#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace scd {

// Deterministic RNG used everywhere instead of <random> distributions, whose
// output is implementation-defined. SplitMix64 core; uniform doubles take the
// top 53 bits so the stream is identical on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire's multiply-shift; bias is unmeasurable
  // for the n used here and the mapping is fully deterministic.
  uint64_t below(uint64_t n) {
    return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(below(uint64_t(hi - lo + 1)));
  }

  // Box-Muller. Draws two uniforms per call; no caching so the stream
  // position is a simple function of call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

// Derives an independent stream from a master seed and up to three tags.
// Two splitmix steps per word decorrelate adjacent tags.
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  Rng r(master);
  uint64_t s = r.next_u64();
  for (uint64_t t : {a, b, c}) {
    Rng m(s ^ (t * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL));
    m.next_u64();
    s = m.next_u64();
  }
  return s;
}

}  // namespace scd
