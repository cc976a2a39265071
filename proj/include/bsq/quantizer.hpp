#ifndef BSQ_QUANTIZER_HPP
#define BSQ_QUANTIZER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bsq/error.hpp"

namespace bsq {

using Vec = std::vector<double>;

inline constexpr unsigned kMaxTokenBits = 63;
inline constexpr double kZeroNormThreshold = 1e-12;

// Unit-norm vector u on S^{L-1}.
struct SphereVec {
  Vec values;
  std::size_t dim() const { return values.size(); }
};

// Corner of the hypercube inscribed in the unit sphere: every entry is +-1/sqrt(L).
struct QuantizedSphereVec {
  Vec values;
  std::size_t dim() const { return values.size(); }
};

// Packed implicit-codebook index. Bit d-1 holds the sign of dimension d.
struct TokenCode {
  std::uint64_t value = 0;
  unsigned bits = 0;

  friend bool operator==(const TokenCode&, const TokenCode&) = default;
};

struct BsqConfig {
  unsigned L = 18;
  double tau = 1.0;
  double gamma = 1.0;
  unsigned d = 32;

  void validate() const {
    if (L < 1) fail(ErrorKind::OutOfRange, "L must be >= 1");
    if (!(tau > 0.0)) fail(ErrorKind::OutOfRange, "tau must be > 0");
    if (!(gamma >= 0.0)) fail(ErrorKind::OutOfRange, "gamma must be >= 0");
    if (d < L) fail(ErrorKind::OutOfRange, "latent dimension d must be >= L");
  }
};

// Magnitude of every code entry, 1/sqrt(L). All paths that produce code
// vectors go through here so hard quantization and token decoding agree bit
// for bit.
inline double code_magnitude(std::size_t L) { return 1.0 / std::sqrt(static_cast<double>(L)); }

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline SphereVec project_to_sphere(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > kZeroNormThreshold)) fail(ErrorKind::ZeroNorm, "cannot normalize a vector with norm <= 1e-12");
  SphereVec u{Vec(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) u.values[i] = v[i] / n;
  return u;
}

// sign(u_d)/sqrt(L) with sign(0) = +1.
inline QuantizedSphereVec bsq_quantize(std::span<const double> u) {
  const double m = code_magnitude(u.size());
  QuantizedSphereVec q{Vec(u.size())};
  for (std::size_t i = 0; i < u.size(); ++i) q.values[i] = u[i] >= 0.0 ? m : -m;
  return q;
}

inline QuantizedSphereVec bsq_quantize(const SphereVec& u) { return bsq_quantize(std::span<const double>(u.values)); }

// Zero entries map to bit 1, matching sign(0) = +1 above.
inline TokenCode encode_token(std::span<const double> v) {
  if (v.size() > kMaxTokenBits) fail(ErrorKind::Unsupported, "token codes hold at most 63 bits");
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= 0.0) k |= std::uint64_t{1} << i;
  }
  return {k, static_cast<unsigned>(v.size())};
}

inline QuantizedSphereVec decode_token(std::uint64_t k, unsigned L) {
  if (L < 1 || L > kMaxTokenBits) fail(ErrorKind::Unsupported, "L must be in [1, 63]");
  if ((k >> L) != 0) fail(ErrorKind::OutOfRange, "token " + std::to_string(k) + " needs more than " + std::to_string(L) + " bits");
  const double m = code_magnitude(L);
  QuantizedSphereVec q{Vec(L)};
  for (unsigned i = 0; i < L; ++i) q.values[i] = ((k >> i) & 1U) ? m : -m;
  return q;
}

inline QuantizedSphereVec decode_token(TokenCode code) { return decode_token(code.value, code.bits); }

// Lookup-free quantization onto {-1, +1}^L, sign(0) = +1.
inline Vec lfq_quantize(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= 0.0 ? 1.0 : -1.0;
  return out;
}

// K x dim codebook, row-major.
class VqCodebook {
 public:
  VqCodebook() = default;
  VqCodebook(std::size_t K, std::size_t dim, Vec data) : K_(K), dim_(dim), data_(std::move(data)) {
    if (data_.size() != K_ * dim_) fail(ErrorKind::ShapeMismatch, "codebook data does not match K x dim");
    for (double x : data_) {
      if (!std::isfinite(x)) fail(ErrorKind::NonFinite, "codebook entries must be finite");
    }
  }

  std::size_t size() const { return K_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return K_ == 0; }
  std::span<const double> row(std::size_t k) const { return {data_.data() + k * dim_, dim_}; }
  const Vec& data() const { return data_; }

 private:
  std::size_t K_ = 0;
  std::size_t dim_ = 0;
  Vec data_;
};

struct VqResult {
  std::size_t index = 0;
  double distance = 0.0;
  Vec codevector;
};

// Nearest codebook row in Euclidean distance; ties go to the lowest index.
inline VqResult vq_quantize(std::span<const double> z, const VqCodebook& cb) {
  if (cb.empty()) fail(ErrorKind::EmptyCodebook, "codebook has no entries");
  if (z.size() != cb.dim()) fail(ErrorKind::ShapeMismatch, "latent dimension does not match codebook");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cb.size(); ++k) {
    const auto c = cb.row(k);
    double d2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double diff = z[i] - c[i];
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  const auto c = cb.row(best);
  return {best, std::sqrt(best_d2), Vec(c.begin(), c.end())};
}

}  // namespace bsq

#endif  // BSQ_QUANTIZER_HPP
