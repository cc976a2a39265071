#ifndef BSQ_RNG_HPP
#define BSQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bsq {

// Reproducible random source.
//
// The bit generator is std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The distributions in <random> are implementation-defined, so
// uniforms and normals are derived here from raw 64-bit draws:
//   uniform()  = (x >> 11) * 2^-53                      in [0, 1)
//   normal()   = Box-Muller on two uniforms, cosine branch only
// Results are therefore identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  double normal() {
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double r = std::sqrt(-2.0 * std::log(1.0 - uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace bsq

#endif  // BSQ_RNG_HPP
