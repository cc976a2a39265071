#ifndef BSQ_ENTROPY_HPP
#define BSQ_ENTROPY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bsq/error.hpp"
#include "bsq/quantizer.hpp"

namespace bsq {

// Largest L for which a full 2^L distribution may be materialized.
inline constexpr unsigned kMaxBruteForceBits = 20;
// Largest L accepted by approximation_gap (needs the exact batch mixture).
inline constexpr unsigned kMaxMixtureBits = 12;
inline constexpr double kProbClamp = 1e-12;

// Factorized soft quantizer: probs[d] is the Bernoulli parameter of c_d = +1/sqrt(L).
struct SoftAssignment {
  Vec probs;
  std::size_t dim() const { return probs.size(); }
};

// Mass over all 2^L implicit codes, indexed by TokenCode value.
struct CodeDistribution {
  Vec mass;
  unsigned bits = 0;
};

struct BatchMarginals {
  Vec mean_probs;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Binary entropy in bits. Exactly 0 at p in {0, 1}; clamped to
// [1e-12, 1 - 1e-12] everywhere else before taking logs.
inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

// dH_b/dp = log2((1-p)/p), evaluated on the clamped p.
inline double binary_entropy_slope(double p) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return std::log2((1.0 - p) / p);
}

inline double distribution_entropy(std::span<const double> mass) {
  double h = 0.0;
  for (double m : mass) {
    if (m > 0.0) h -= m * std::log2(m);
  }
  return h;
}

inline double distribution_entropy(const CodeDistribution& dist) { return distribution_entropy(dist.mass); }

// KL(p || q) in bits. Infinite when q vanishes where p does not.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorKind::ShapeMismatch, "distributions differ in support size");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return INFINITY;
    kl += p[i] * std::log2(p[i] / q[i]);
  }
  return kl;
}

inline SoftAssignment soft_assign(std::span<const double> u, double tau) {
  const double scale = 2.0 * tau * code_magnitude(u.size());
  SoftAssignment a{Vec(u.size())};
  for (std::size_t d = 0; d < u.size(); ++d) a.probs[d] = sigmoid(scale * u[d]);
  return a;
}

inline SoftAssignment soft_assign(const SphereVec& u, double tau) { return soft_assign(std::span<const double>(u.values), tau); }

namespace detail {

inline void require_brute_force_size(std::size_t L) {
  if (L > kMaxBruteForceBits) fail(ErrorKind::TooLarge, "brute-force distributions are limited to L <= 20");
  if (L == 0) fail(ErrorKind::OutOfRange, "L must be >= 1");
}

// Softmax over 2^L logits produced by logit(k); max-subtracted for stability.
template <typename LogitFn>
CodeDistribution softmax_over_codes(unsigned L, LogitFn logit) {
  const std::size_t n = std::size_t{1} << L;
  CodeDistribution dist{Vec(n), L};
  double peak = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    dist.mass[k] = logit(k);
    peak = std::max(peak, dist.mass[k]);
  }
  double total = 0.0;
  for (double& m : dist.mass) {
    m = std::exp(m - peak);
    total += m;
  }
  for (double& m : dist.mass) m /= total;
  return dist;
}

}  // namespace detail

// Unfactorized soft BSQ: mass[k] proportional to exp(tau * <c_k, u>), summed over the whole codebook.
inline CodeDistribution brute_force_code_dist(std::span<const double> u, double tau) {
  detail::require_brute_force_size(u.size());
  const unsigned L = static_cast<unsigned>(u.size());
  const double m = code_magnitude(L);
  return detail::softmax_over_codes(L, [&](std::size_t k) {
    double dot = 0.0;
    for (unsigned d = 0; d < L; ++d) dot += ((k >> d) & 1U) ? m * u[d] : -m * u[d];
    return tau * dot;
  });
}

// Soft LFQ over {-1, 1}^L: mass[k] proportional to exp(-tau * |c_k - z|^2).
inline CodeDistribution lfq_soft_assign(std::span<const double> z, double tau) {
  detail::require_brute_force_size(z.size());
  const unsigned L = static_cast<unsigned>(z.size());
  return detail::softmax_over_codes(L, [&](std::size_t k) {
    double d2 = 0.0;
    for (unsigned d = 0; d < L; ++d) {
      const double diff = (((k >> d) & 1U) ? 1.0 : -1.0) - z[d];
      d2 += diff * diff;
    }
    return -tau * d2;
  });
}

// Because |c|^2 = L is constant over {-1,1}^L, the LFQ softmax factorizes
// too: P(c_d = +1) = sigmoid(4 tau z_d).
inline SoftAssignment lfq_factorized_assign(std::span<const double> z, double tau) {
  SoftAssignment a{Vec(z.size())};
  for (std::size_t d = 0; d < z.size(); ++d) a.probs[d] = sigmoid(4.0 * tau * z[d]);
  return a;
}

// Expands a factorized assignment into its joint distribution over codes.
inline CodeDistribution factorized_code_dist(std::span<const double> probs) {
  detail::require_brute_force_size(probs.size());
  const unsigned L = static_cast<unsigned>(probs.size());
  const std::size_t n = std::size_t{1} << L;
  CodeDistribution dist{Vec(n, 1.0), L};
  for (std::size_t k = 0; k < n; ++k) {
    for (unsigned d = 0; d < L; ++d) dist.mass[k] *= ((k >> d) & 1U) ? probs[d] : 1.0 - probs[d];
  }
  return dist;
}

inline double per_sample_entropy(const SoftAssignment& a) {
  double h = 0.0;
  for (double p : a.probs) h += binary_entropy(p);
  return h;
}

namespace detail {

inline std::size_t require_batch(std::span<const SoftAssignment> batch) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "batch is empty");
  const std::size_t L = batch.front().dim();
  for (const auto& a : batch) {
    if (a.dim() != L) fail(ErrorKind::ShapeMismatch, "assignments in a batch must share L");
  }
  return L;
}

}  // namespace detail

inline BatchMarginals batch_marginals(std::span<const SoftAssignment> batch) {
  const std::size_t L = detail::require_batch(batch);
  BatchMarginals m{Vec(L, 0.0)};
  for (const auto& a : batch) {
    for (std::size_t d = 0; d < L; ++d) m.mean_probs[d] += a.probs[d];
  }
  for (double& p : m.mean_probs) p /= static_cast<double>(batch.size());
  return m;
}

// Entropy of the closest factorized distribution to the batch mixture.
inline double dataset_entropy_approx(std::span<const SoftAssignment> batch) {
  const BatchMarginals m = batch_marginals(batch);
  double h = 0.0;
  for (double p : m.mean_probs) h += binary_entropy(p);
  return h;
}

inline double mean_per_sample_entropy(std::span<const SoftAssignment> batch) {
  detail::require_batch(batch);
  double h = 0.0;
  for (const auto& a : batch) h += per_sample_entropy(a);
  return h / static_cast<double>(batch.size());
}

struct EntropyLossTerms {
  double per_sample = 0.0;  // E_u[H(q(c|u))]
  double dataset = 0.0;     // H(q~), the factorized dataset entropy
  double total = 0.0;       // per_sample - gamma * dataset
};

inline EntropyLossTerms entropy_loss_terms(std::span<const SoftAssignment> batch, double gamma) {
  if (!(gamma >= 0.0)) fail(ErrorKind::OutOfRange, "gamma must be >= 0");
  EntropyLossTerms t;
  t.per_sample = mean_per_sample_entropy(batch);
  t.dataset = dataset_entropy_approx(batch);
  t.total = t.per_sample - gamma * t.dataset;
  return t;
}

inline double entropy_loss(std::span<const SoftAssignment> batch, double gamma) { return entropy_loss_terms(batch, gamma).total; }

// Gradient of entropy_loss with respect to the Bernoulli parameters of every sample.
inline std::vector<Vec> entropy_loss_grad_probs(std::span<const SoftAssignment> batch, double gamma) {
  const std::size_t L = detail::require_batch(batch);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const BatchMarginals m = batch_marginals(batch);
  Vec dataset_slope(L);
  for (std::size_t d = 0; d < L; ++d) dataset_slope[d] = binary_entropy_slope(m.mean_probs[d]);
  std::vector<Vec> grads(batch.size(), Vec(L));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t d = 0; d < L; ++d) {
      grads[i][d] = inv_n * (binary_entropy_slope(batch[i].probs[d]) - gamma * dataset_slope[d]);
    }
  }
  return grads;
}

// Chains entropy_loss_grad_probs through p = sigmoid(scale * x), where x is u
// (BSQ, scale = 2 tau / sqrt(L)) or v (LFQ, scale = 4 tau).
inline std::vector<Vec> entropy_loss_grad_logits(std::span<const SoftAssignment> batch, double gamma, double scale) {
  std::vector<Vec> grads = entropy_loss_grad_probs(batch, gamma);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t d = 0; d < grads[i].size(); ++d) {
      const double p = batch[i].probs[d];
      grads[i][d] *= scale * p * (1.0 - p);
    }
  }
  return grads;
}

// Exact batch mixture Q(c) = mean_u q(c|u), built from brute-force distributions.
inline CodeDistribution exact_mixture(std::span<const SphereVec> batch, double tau) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "batch is empty");
  const std::size_t L = batch.front().dim();
  detail::require_brute_force_size(L);
  CodeDistribution q{Vec(std::size_t{1} << L, 0.0), static_cast<unsigned>(L)};
  for (const auto& u : batch) {
    if (u.dim() != L) fail(ErrorKind::ShapeMismatch, "vectors in a batch must share L");
    const CodeDistribution p = brute_force_code_dist(u.values, tau);
    for (std::size_t k = 0; k < q.mass.size(); ++k) q.mass[k] += p.mass[k];
  }
  for (double& m : q.mass) m /= static_cast<double>(batch.size());
  return q;
}

// H(q~) - H(Q): how much the factorized dataset entropy overstates the true one.
inline double approximation_gap(std::span<const SphereVec> batch, double tau) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "batch is empty");
  if (batch.front().dim() > kMaxMixtureBits) fail(ErrorKind::TooLarge, "approximation_gap needs L <= 12");
  std::vector<SoftAssignment> soft;
  soft.reserve(batch.size());
  for (const auto& u : batch) soft.push_back(soft_assign(u, tau));
  return dataset_entropy_approx(soft) - distribution_entropy(exact_mixture(batch, tau));
}

namespace detail {

inline void require_group_size(std::size_t L, std::size_t g) {
  if (g == 0 || g > kMaxBruteForceBits || L % g != 0) fail(ErrorKind::BadGroupSize, "group size must divide L and be in [1, 20]");
}

// Joint distribution of dimensions [first, first + g) under a factorized assignment.
inline Vec group_joint(const SoftAssignment& a, std::size_t first, std::size_t g) {
  return factorized_code_dist(std::span<const double>(a.probs).subspan(first, g)).mass;
}

}  // namespace detail

// Entropy of one group of g dimensions of a factorized assignment. A group of
// one dimension is its binary entropy.
inline double group_entropy(const SoftAssignment& a, std::size_t first, std::size_t g) {
  if (g == 1) return binary_entropy(a.probs[first]);
  return distribution_entropy(detail::group_joint(a, first, g));
}

// Per-sample entropy computed group by group over 2^g joint outcomes, summed
// over the L/g groups and averaged over the batch.
inline double grouped_entropy(std::span<const SoftAssignment> batch, std::size_t g) {
  const std::size_t L = detail::require_batch(batch);
  detail::require_group_size(L, g);
  double h = 0.0;
  for (const auto& a : batch) {
    double sample = 0.0;
    for (std::size_t first = 0; first < L; first += g) sample += group_entropy(a, first, g);
    h += sample;
  }
  return h / static_cast<double>(batch.size());
}

// Dataset entropy with dimensions grouped: each group's batch mixture is kept
// exact and groups are treated as independent. g = 1 is the fully factorized
// approximation; g = L is the exact mixture entropy.
inline double grouped_dataset_entropy(std::span<const SoftAssignment> batch, std::size_t g) {
  const std::size_t L = detail::require_batch(batch);
  detail::require_group_size(L, g);
  double total = 0.0;
  for (std::size_t first = 0; first < L; first += g) {
    Vec mixture(std::size_t{1} << g, 0.0);
    for (const auto& a : batch) {
      const Vec joint = detail::group_joint(a, first, g);
      for (std::size_t k = 0; k < joint.size(); ++k) mixture[k] += joint[k];
    }
    for (double& m : mixture) m /= static_cast<double>(batch.size());
    total += distribution_entropy(mixture);
  }
  return total;
}

}  // namespace bsq

#endif  // BSQ_ENTROPY_HPP
