#ifndef BSQ_ERROR_BOUNDS_HPP
#define BSQ_ERROR_BOUNDS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <thread>
#include <vector>

#include "bsq/error.hpp"
#include "bsq/quantizer.hpp"
#include "bsq/rng.hpp"

namespace bsq {

// Expected BSQ quantization error |u - q(u)| for u uniform on the sphere.
struct McReport {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  unsigned shards = 1;

  friend bool operator==(const McReport&, const McReport&) = default;
};

// Largest possible quantization error, attained when u lies on an axis:
// sqrt(2 - 2/sqrt(L)).
inline double bound_loose(unsigned L) {
  if (L < 1) fail(ErrorKind::OutOfRange, "L must be >= 1");
  return std::sqrt(2.0 - 2.0 / std::sqrt(static_cast<double>(L)));
}

namespace detail {

struct SimpsonStep {
  double a, b, fa, fm, fb, whole;
};

inline double adaptive_simpson_rec(const std::function<double(double)>& f, const SimpsonStep& s, double tol, int depth) {
  const double m = 0.5 * (s.a + s.b);
  const double lm = 0.5 * (s.a + m);
  const double rm = 0.5 * (m + s.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
  const double right = (s.b - m) / 6.0 * (s.fm + 4.0 * frm + s.fb);
  const double delta = left + right - s.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, {s.a, m, s.fa, flm, s.fm, left}, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, {m, s.b, s.fm, frm, s.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature with Richardson correction. The interval is
// pre-split into 16 panels so narrow peaks are not skipped by the first estimate.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
  constexpr int kPanels = 16;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kPanels) ? b : lo + h;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += detail::adaptive_simpson_rec(f, {lo, hi, flo, fm, fhi, whole}, tol / kPanels, 50);
  }
  return total;
}

// Bound from integrating only over the first hyperspherical angle:
//   2 G(L/2) / (sqrt(pi) G((L-1)/2)) * int_0^{pi/2} sqrt(2 - 2 cos(phi)/sqrt(L)) sin^{L-2}(phi) dphi
// The prefactor normalizes the sin^{L-2} weight to unit mass on [0, pi/2].
inline double bound_tight(unsigned L) {
  if (L < 2) fail(ErrorKind::Unsupported, "bound_tight needs L >= 2 (Gamma(0) diverges)");
  const double l = static_cast<double>(L);
  const double inv_sqrt_l = 1.0 / std::sqrt(l);
  const double prefactor = 2.0 * std::exp(std::lgamma(0.5 * l) - std::lgamma(0.5 * (l - 1.0))) / std::sqrt(std::numbers::pi);
  const auto integrand = [&](double phi) {
    return std::sqrt(2.0 - 2.0 * inv_sqrt_l * std::cos(phi)) * std::pow(std::sin(phi), l - 2.0);
  };
  return prefactor * adaptive_simpson(integrand, 0.0, 0.5 * std::numbers::pi, 1e-10);
}

namespace detail {

struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  // Chan et al. pairwise merge.
  void merge(const RunningStats& o) {
    if (o.n == 0) return;
    const std::size_t total = n + o.n;
    const double delta = o.mean - mean;
    mean += delta * static_cast<double>(o.n) / static_cast<double>(total);
    m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(total);
    n = total;
  }
};

inline RunningStats quant_error_shard(unsigned L, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double m = code_magnitude(L);
  Vec g(L);
  RunningStats stats;
  for (std::size_t s = 0; s < n; ++s) {
    double norm = 0.0;
    while (!(norm > kZeroNormThreshold)) {
      for (double& x : g) x = rng.normal();
      norm = l2_norm(g);
    }
    double d2 = 0.0;
    for (unsigned i = 0; i < L; ++i) {
      const double u = g[i] / norm;
      const double diff = u - (u >= 0.0 ? m : -m);
      d2 += diff * diff;
    }
    stats.push(std::sqrt(d2));
  }
  return stats;
}

}  // namespace detail

// Monte Carlo estimate of E|u - bsq_quantize(u)| with u drawn as a normalized
// isotropic Gaussian. Shard s uses seed mix_seed(seed, s) and the first
// n % shards shards take one extra sample; shards run on separate threads and
// are merged in shard order, so the result depends only on (L, n, seed, shards).
inline McReport mc_quant_error(unsigned L, std::size_t n_samples, std::uint64_t seed, unsigned shards = 1) {
  if (L < 1 || L > 4096) fail(ErrorKind::OutOfRange, "L must be in [1, 4096]");
  if (n_samples < 1000) fail(ErrorKind::OutOfRange, "Monte Carlo needs at least 1000 samples");
  if (shards < 1) fail(ErrorKind::OutOfRange, "shards must be >= 1");
  std::vector<detail::RunningStats> parts(shards);
  {
    std::vector<std::jthread> workers;
    for (unsigned s = 0; s < shards; ++s) {
      const std::size_t n = n_samples / shards + (s < n_samples % shards ? 1 : 0);
      const std::uint64_t shard_seed = mix_seed(seed, s);
      if (shards == 1) {
        parts[s] = detail::quant_error_shard(L, n, shard_seed);
      } else {
        workers.emplace_back([&parts, s, L, n, shard_seed] { parts[s] = detail::quant_error_shard(L, n, shard_seed); });
      }
    }
  }
  detail::RunningStats total;
  for (const auto& p : parts) total.merge(p);
  McReport r;
  r.mean = total.mean;
  const double variance = total.n > 1 ? total.m2 / static_cast<double>(total.n - 1) : 0.0;
  r.std_error = std::sqrt(variance / static_cast<double>(total.n));
  r.n_samples = total.n;
  r.seed = seed;
  r.shards = shards;
  return r;
}

}  // namespace bsq

#endif  // BSQ_ERROR_BOUNDS_HPP
