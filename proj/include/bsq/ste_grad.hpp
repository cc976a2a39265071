#ifndef BSQ_STE_GRAD_HPP
#define BSQ_STE_GRAD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bsq/error.hpp"
#include "bsq/quantizer.hpp"
#include "bsq/rng.hpp"

namespace bsq {

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1 };

// y = act(W x + b), W stored row-major as out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec weights;
  Vec bias;
  Activation activation = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act)
      : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0), activation(act) {}

  // Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  static DenseLayer random(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
    DenseLayer layer(in_dim, out_dim, act);
    const double r = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (double& w : layer.weights) w = rng.uniform(-r, r);
    return layer;
  }

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

struct DenseGrad {
  Vec input;
  Vec weights;
  Vec bias;
};

inline Vec dense_forward(const DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.in) fail(ErrorKind::ShapeMismatch, "dense input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(layer.in));
  Vec y(layer.out);
  for (std::size_t o = 0; o < layer.out; ++o) {
    double acc = layer.bias[o];
    const double* row = layer.weights.data() + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
    y[o] = layer.activation == Activation::Tanh ? std::tanh(acc) : acc;
  }
  return y;
}

// Reverse-mode step given the cached forward output y.
inline DenseGrad dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> y, std::span<const double> upstream) {
  if (x.size() != layer.in || y.size() != layer.out || upstream.size() != layer.out) {
    fail(ErrorKind::ShapeMismatch, "dense backward shapes disagree with the layer");
  }
  DenseGrad g{Vec(layer.in, 0.0), Vec(layer.weights.size()), Vec(layer.out)};
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double delta = layer.activation == Activation::Tanh ? upstream[o] * (1.0 - y[o] * y[o]) : upstream[o];
    g.bias[o] = delta;
    const double* row = layer.weights.data() + o * layer.in;
    double* grow = g.weights.data() + o * layer.in;
    for (std::size_t i = 0; i < layer.in; ++i) {
      grow[i] = delta * x[i];
      g.input[i] += delta * row[i];
    }
  }
  return g;
}

inline DenseGrad dense_backward(const DenseLayer& layer, std::span<const double> x, std::span<const double> upstream) {
  const Vec y = dense_forward(layer, x);
  return dense_backward(layer, x, y, upstream);
}

// Vector-Jacobian product of v -> v / |v|: (I - u u^T) g / |v|.
inline Vec normalize_backward(std::span<const double> v, std::span<const double> upstream) {
  if (v.size() != upstream.size()) fail(ErrorKind::ShapeMismatch, "upstream gradient does not match v");
  const double n = l2_norm(v);
  if (!(n > kZeroNormThreshold)) fail(ErrorKind::ZeroNorm, "normalization gradient undefined at |v| <= 1e-12");
  double radial = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) radial += (v[i] / n) * upstream[i];
  Vec g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = (upstream[i] - radial * v[i] / n) / n;
  return g;
}

// Straight-through gradient of BSQ. The surrogate path replaces sign() by the
// identity, leaving v -> v / (sqrt(L) |v|), whose Jacobian is
// (I - u u^T) / (sqrt(L) |v|).
inline Vec bsq_ste_backward(std::span<const double> v, std::span<const double> upstream) {
  Vec g = normalize_backward(v, upstream);
  const double m = code_magnitude(v.size());
  for (double& x : g) x *= m;
  return g;
}

// Forward value of the BSQ surrogate, v / (sqrt(L) |v|).
inline Vec bsq_surrogate(std::span<const double> v) {
  SphereVec u = project_to_sphere(v);
  const double m = code_magnitude(v.size());
  for (double& x : u.values) x *= m;
  return std::move(u.values);
}

// LFQ's straight-through estimator is the identity.
inline Vec lfq_ste_backward(std::span<const double> v, std::span<const double> upstream) {
  if (v.size() != upstream.size()) fail(ErrorKind::ShapeMismatch, "upstream gradient does not match v");
  return Vec(upstream.begin(), upstream.end());
}

template <typename F>
Vec finite_diff_grad(F&& f, std::span<const double> x, double h = 1e-5) {
  if (!(h > 0.0)) fail(ErrorKind::OutOfRange, "step h must be > 0");
  Vec probe(x.begin(), x.end());
  Vec g(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double orig = probe[d];
    probe[d] = orig + h;
    const double plus = f(std::span<const double>(probe));
    probe[d] = orig - h;
    const double minus = f(std::span<const double>(probe));
    probe[d] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus)) fail(ErrorKind::NonFinite, "function is not finite near the probe point");
    g[d] = (plus - minus) / (2.0 * h);
  }
  return g;
}

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  bool passed = true;
  double tolerance = 1e-4;

  // Folds another comparison into this report.
  void merge(const GradCheckReport& o) {
    max_abs_err = std::max(max_abs_err, o.max_abs_err);
    max_rel_err = std::max(max_rel_err, o.max_rel_err);
    passed = max_rel_err <= tolerance;
  }
};

// Relative error per entry is |a - n| / max(|a|, |n|, floor). The floor keeps
// entries whose true gradient is ~0 from being judged on rounding noise alone.
inline GradCheckReport compare_gradients(std::span<const double> analytic, std::span<const double> numeric, double tolerance = 1e-4, double floor = 1e-6) {
  if (analytic.size() != numeric.size()) fail(ErrorKind::ShapeMismatch, "gradient sizes differ");
  GradCheckReport r;
  r.tolerance = tolerance;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    r.max_abs_err = std::max(r.max_abs_err, err);
    r.max_rel_err = std::max(r.max_rel_err, err / denom);
  }
  r.passed = r.max_rel_err <= tolerance;
  return r;
}

// Central differences carry roundoff of about eps * |f| / h per entry. Entries
// smaller than that noise divided by the tolerance are judged on absolute error.
template <typename F>
GradCheckReport grad_check(F&& f, std::span<const double> x, std::span<const double> analytic, double tolerance = 1e-4, double h = 1e-5) {
  const Vec numeric = finite_diff_grad(f, x, h);
  const double scale = std::max(1.0, std::abs(f(x)));
  const double noise = 4.0 * std::numeric_limits<double>::epsilon() * scale / h;
  return compare_gradients(analytic, numeric, tolerance, std::max(1e-6, noise / tolerance));
}

}  // namespace bsq

#endif  // BSQ_STE_GRAD_HPP
