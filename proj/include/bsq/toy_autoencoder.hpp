#ifndef BSQ_TOY_AUTOENCODER_HPP
#define BSQ_TOY_AUTOENCODER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bsq/byte_io.hpp"
#include "bsq/entropy.hpp"
#include "bsq/error.hpp"
#include "bsq/quantizer.hpp"
#include "bsq/rng.hpp"
#include "bsq/ste_grad.hpp"

namespace bsq {

inline constexpr std::size_t kPatchSide = 8;
inline constexpr std::size_t kPatchDim = kPatchSide * kPatchSide;

enum class QuantizerKind : std::uint8_t { None = 0, Bsq = 1, Lfq = 2, Vq = 3 };

inline std::string_view to_string(QuantizerKind q) {
  switch (q) {
    case QuantizerKind::None: return "none";
    case QuantizerKind::Bsq: return "bsq";
    case QuantizerKind::Lfq: return "lfq";
    case QuantizerKind::Vq: return "vq";
  }
  return "?";
}

inline QuantizerKind parse_quantizer(std::string_view s) {
  if (s == "none") return QuantizerKind::None;
  if (s == "bsq") return QuantizerKind::Bsq;
  if (s == "lfq") return QuantizerKind::Lfq;
  if (s == "vq") return QuantizerKind::Vq;
  fail(ErrorKind::UnknownKind, "unknown quantizer '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Synthetic data

struct Dataset {
  std::vector<Vec> patches;  // each kPatchDim values in [0, 1], row-major 8x8
  std::size_t size() const { return patches.size(); }
  bool empty() const { return patches.empty(); }
};

// Deterministic 8x8 grayscale patches in [0, 1].
//   low-rank: 0.5 + sum_{r<rank-1} c_r B_r with fixed separable bases B_r and
//             c_r ~ U[-1, 1]. Each patch, viewed as an 8x8 matrix, has rank
//             <= rank, and all patches share one rank-dimensional subspace.
//   gabor:    Gabor wavelets with random orientation, frequency, phase and width.
//   checker:  4x4-cell checkerboard with random parity (two distinct patches).
inline Dataset make_synthetic_dataset(std::string_view kind, std::size_t n, std::uint64_t seed, std::size_t rank = 4) {
  if (n < 1) fail(ErrorKind::OutOfRange, "dataset needs at least one patch");
  Rng rng(seed);
  Dataset ds;
  ds.patches.reserve(n);
  if (kind == "low-rank") {
    if (rank < 1 || rank > kPatchDim) fail(ErrorKind::OutOfRange, "rank must be in [1, 64]");
    const std::size_t n_basis = rank - 1;
    // Separable +-1 sign patterns, scaled so any coefficient mix stays in [0, 1].
    const double amplitude = n_basis > 0 ? 0.5 / static_cast<double>(n_basis) : 0.0;
    std::vector<Vec> basis;
    for (std::size_t b = 0; b < n_basis; ++b) {
      Vec rows(kPatchSide), cols(kPatchSide);
      for (double& x : rows) x = rng.below(2) ? 1.0 : -1.0;
      for (double& x : cols) x = rng.below(2) ? 1.0 : -1.0;
      Vec B(kPatchDim);
      for (std::size_t i = 0; i < kPatchSide; ++i) {
        for (std::size_t j = 0; j < kPatchSide; ++j) B[i * kPatchSide + j] = amplitude * rows[i] * cols[j];
      }
      basis.push_back(std::move(B));
    }
    for (std::size_t s = 0; s < n; ++s) {
      Vec p(kPatchDim, 0.5);
      for (const Vec& B : basis) {
        const double c = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < kPatchDim; ++i) p[i] += c * B[i];
      }
      ds.patches.push_back(std::move(p));
    }
  } else if (kind == "gabor") {
    for (std::size_t s = 0; s < n; ++s) {
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double freq = rng.uniform(0.1, 0.3);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double sigma = rng.uniform(1.5, 3.0);
      const double cx = 3.5 + rng.uniform(-1.0, 1.0);
      const double cy = 3.5 + rng.uniform(-1.0, 1.0);
      Vec p(kPatchDim);
      for (std::size_t i = 0; i < kPatchSide; ++i) {
        for (std::size_t j = 0; j < kPatchSide; ++j) {
          const double x = static_cast<double>(j) - cx;
          const double y = static_cast<double>(i) - cy;
          const double along = x * std::cos(theta) + y * std::sin(theta);
          const double env = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
          p[i * kPatchSide + j] = 0.5 + 0.5 * env * std::cos(2.0 * std::numbers::pi * freq * along + phase);
        }
      }
      ds.patches.push_back(std::move(p));
    }
  } else if (kind == "checker") {
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t parity = rng.below(2);
      Vec p(kPatchDim);
      for (std::size_t i = 0; i < kPatchSide; ++i) {
        for (std::size_t j = 0; j < kPatchSide; ++j) p[i * kPatchSide + j] = static_cast<double>((i / 4 + j / 4 + parity) % 2);
      }
      ds.patches.push_back(std::move(p));
    }
  } else {
    fail(ErrorKind::UnknownKind, "unknown dataset kind '" + std::string(kind) + "'");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Model

struct ModelShape {
  QuantizerKind quantizer = QuantizerKind::Bsq;
  std::size_t d = 16;
  std::size_t L = 8;   // bottleneck width (bits for BSQ/LFQ, code dimension for VQ)
  std::size_t K = 0;   // VQ codebook rows
  double tau = 1.0;    // soft-assignment temperature
};

// patch -> [Dense tanh] -> z (d) -> Linear -> v (L) -> quantizer -> q (L)
//       -> Linear -> z_hat (d) -> [Dense tanh, Dense] -> reconstruction
struct ToyModel {
  ModelShape shape;
  std::vector<DenseLayer> encoder;
  DenseLayer proj_down;
  DenseLayer proj_up;
  std::vector<DenseLayer> decoder;
  VqCodebook codebook;  // fixed; VQ only

  static ToyModel create(const ModelShape& shape, std::uint64_t seed) {
    if (shape.L < 1 || shape.d < shape.L) fail(ErrorKind::OutOfRange, "model needs 1 <= L <= d");
    if ((shape.quantizer == QuantizerKind::Bsq || shape.quantizer == QuantizerKind::Lfq) && shape.L > kMaxTokenBits) {
      fail(ErrorKind::Unsupported, "binary bottlenecks hold at most 63 bits");
    }
    if (shape.quantizer == QuantizerKind::Vq && shape.K < 1) fail(ErrorKind::EmptyCodebook, "VQ needs K >= 1");
    if (!(shape.tau > 0.0)) fail(ErrorKind::OutOfRange, "tau must be > 0");
    Rng rng(seed);
    ToyModel m;
    m.shape = shape;
    m.encoder.push_back(DenseLayer::random(kPatchDim, shape.d, Activation::Tanh, rng));
    m.proj_down = DenseLayer::random(shape.d, shape.L, Activation::Identity, rng);
    m.proj_up = DenseLayer::random(shape.L, shape.d, Activation::Identity, rng);
    m.decoder.push_back(DenseLayer::random(shape.d, shape.d, Activation::Tanh, rng));
    m.decoder.push_back(DenseLayer::random(shape.d, kPatchDim, Activation::Identity, rng));
    if (shape.quantizer == QuantizerKind::Vq) {
      Vec cb(shape.K * shape.L);
      for (double& x : cb) x = rng.normal();
      m.codebook = VqCodebook(shape.K, shape.L, std::move(cb));
    }
    return m;
  }

  // Trainable layers in a fixed order; parameters and gradients are laid out in this order.
  std::vector<DenseLayer*> layers() {
    std::vector<DenseLayer*> out;
    for (auto& l : encoder) out.push_back(&l);
    out.push_back(&proj_down);
    out.push_back(&proj_up);
    for (auto& l : decoder) out.push_back(&l);
    return out;
  }

  std::vector<const DenseLayer*> layers() const {
    std::vector<const DenseLayer*> out;
    for (const auto& l : encoder) out.push_back(&l);
    out.push_back(&proj_down);
    out.push_back(&proj_up);
    for (const auto& l : decoder) out.push_back(&l);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer* l : layers()) n += l->weights.size() + l->bias.size();
    return n;
  }

  Vec flat_parameters() const {
    Vec out;
    out.reserve(parameter_count());
    for (const DenseLayer* l : layers()) {
      out.insert(out.end(), l->weights.begin(), l->weights.end());
      out.insert(out.end(), l->bias.begin(), l->bias.end());
    }
    return out;
  }

  void set_flat_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) fail(ErrorKind::ShapeMismatch, "parameter vector has the wrong length");
    std::size_t at = 0;
    for (DenseLayer* l : layers()) {
      std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(at), l->weights.size(), l->weights.begin());
      at += l->weights.size();
      std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(at), l->bias.size(), l->bias.begin());
      at += l->bias.size();
    }
  }

  bool uses_codes() const { return shape.quantizer != QuantizerKind::None; }
};

// Hard: the true quantizer output feeds the decoder (training and inference).
// Surrogate: the straight-through surrogate feeds the decoder, so the loss is
// differentiable and its gradient equals the STE gradient; used for checks.
enum class QuantMode { Hard, Surrogate };

struct SampleTrace {
  Vec x;
  std::vector<Vec> encoder_out;
  Vec v;          // projected latent (L)
  Vec u;          // v / |v| (BSQ only)
  Vec q;          // bottleneck output fed to proj_up
  Vec q_hard;     // quantized value (commitment target)
  std::uint64_t code = 0;
  Vec z_hat;      // proj_up output
  std::vector<Vec> decoder_out;

  const Vec& reconstruction() const { return decoder_out.back(); }
};

struct ForwardResult {
  std::vector<SampleTrace> samples;
  std::vector<SphereVec> u;             // BSQ only
  std::vector<SoftAssignment> soft;     // BSQ and LFQ

  std::vector<Vec> reconstruction() const {
    std::vector<Vec> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.reconstruction());
    return out;
  }
};

namespace detail {

inline Vec run_layers(const std::vector<DenseLayer>& layers, Vec x, std::vector<Vec>& trace) {
  for (const auto& l : layers) {
    x = dense_forward(l, x);
    trace.push_back(x);
  }
  return x;
}

inline void decode_into(const ToyModel& model, SampleTrace& t) {
  t.z_hat = dense_forward(model.proj_up, t.q);
  run_layers(model.decoder, t.z_hat, t.decoder_out);
}

}  // namespace detail

// Encoder half: fills x, encoder_out, v, u, q, q_hard and code.
inline SampleTrace encode_sample(const ToyModel& model, std::span<const double> x, QuantMode mode = QuantMode::Hard) {
  if (x.size() != kPatchDim) fail(ErrorKind::ShapeMismatch, "patch must have 64 values");
  SampleTrace t;
  t.x.assign(x.begin(), x.end());
  const Vec z = detail::run_layers(model.encoder, t.x, t.encoder_out);
  t.v = dense_forward(model.proj_down, z);
  switch (model.shape.quantizer) {
    case QuantizerKind::None:
      t.q = t.v;
      t.q_hard = t.v;
      break;
    case QuantizerKind::Bsq: {
      t.u = project_to_sphere(t.v).values;
      t.q_hard = bsq_quantize(t.u).values;
      t.code = encode_token(t.u).value;
      if (mode == QuantMode::Hard) {
        t.q = t.q_hard;
      } else {
        const double m = code_magnitude(t.u.size());
        t.q = t.u;
        for (double& e : t.q) e *= m;
      }
      break;
    }
    case QuantizerKind::Lfq:
      t.q_hard = lfq_quantize(t.v);
      t.code = encode_token(t.v).value;
      t.q = mode == QuantMode::Hard ? t.q_hard : t.v;
      break;
    case QuantizerKind::Vq: {
      VqResult r = vq_quantize(t.v, model.codebook);
      t.code = r.index;
      t.q_hard = std::move(r.codevector);
      t.q = mode == QuantMode::Hard ? t.q_hard : t.v;
      break;
    }
  }
  return t;
}

inline ForwardResult forward(const ToyModel& model, std::span<const Vec> batch, QuantMode mode = QuantMode::Hard) {
  ForwardResult r;
  r.samples.reserve(batch.size());
  for (const Vec& x : batch) {
    SampleTrace t = encode_sample(model, x, mode);
    detail::decode_into(model, t);
    if (model.shape.quantizer == QuantizerKind::Bsq) {
      r.u.push_back(SphereVec{t.u});
      r.soft.push_back(soft_assign(t.u, model.shape.tau));
    } else if (model.shape.quantizer == QuantizerKind::Lfq) {
      r.soft.push_back(lfq_factorized_assign(t.v, model.shape.tau));
    }
    r.samples.push_back(std::move(t));
  }
  return r;
}

// Decoder half for a stored code: BSQ/LFQ token bits or a VQ index.
inline Vec decode_code(const ToyModel& model, std::uint64_t code) {
  SampleTrace t;
  switch (model.shape.quantizer) {
    case QuantizerKind::Bsq:
      t.q = decode_token(code, static_cast<unsigned>(model.shape.L)).values;
      break;
    case QuantizerKind::Lfq:
      t.q = decode_token(code, static_cast<unsigned>(model.shape.L)).values;
      for (double& e : t.q) e = e > 0.0 ? 1.0 : -1.0;
      break;
    case QuantizerKind::Vq: {
      if (code >= model.codebook.size()) fail(ErrorKind::OutOfRange, "VQ index out of range");
      const auto row = model.codebook.row(code);
      t.q.assign(row.begin(), row.end());
      break;
    }
    case QuantizerKind::None:
      fail(ErrorKind::Unsupported, "a model without a quantizer has no codes");
  }
  detail::decode_into(model, t);
  return t.decoder_out.back();
}

// ---------------------------------------------------------------------------
// Loss

struct TrainConfig {
  QuantizerKind quantizer = QuantizerKind::Bsq;
  std::size_t d = 16;
  std::size_t L = 8;
  std::size_t K = 256;
  double tau = 1.0;
  double gamma = 1.0;
  double weight_entropy = 0.1;
  double weight_commit = 0.0;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;

  ModelShape shape() const { return {quantizer, d, L, quantizer == QuantizerKind::Vq ? K : 0, tau}; }

  void validate() const {
    if (steps < 1) fail(ErrorKind::OutOfRange, "steps must be >= 1");
    if (batch_size < 1) fail(ErrorKind::OutOfRange, "batch_size must be >= 1");
    if (!(weight_entropy >= 0.0) || !(weight_commit >= 0.0) || !(gamma >= 0.0)) fail(ErrorKind::OutOfRange, "loss weights must be >= 0");
    if (!(learning_rate >= 0.0)) fail(ErrorKind::OutOfRange, "learning rate must be >= 0");
  }
};

struct LossTerms {
  double mse = 0.0;
  double entropy = 0.0;      // per_sample - gamma * dataset (unweighted)
  double per_sample_entropy = 0.0;
  double dataset_entropy = 0.0;
  double commit = 0.0;       // unweighted
  double total = 0.0;

  friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline bool has_entropy_term(const ModelShape& s) { return s.quantizer == QuantizerKind::Bsq || s.quantizer == QuantizerKind::Lfq; }

// MSE + weight_entropy * entropy_loss + weight_commit * commitment.
// Commitment is mean |w - sg(q_hard)|^2 where w is u (BSQ) or v (LFQ, VQ).
inline LossTerms total_loss(const ForwardResult& fwd, const TrainConfig& cfg) {
  if (fwd.samples.empty()) fail(ErrorKind::EmptyBatch, "batch is empty");
  LossTerms t;
  const double n = static_cast<double>(fwd.samples.size());
  for (const auto& s : fwd.samples) {
    t.mse += squared_distance(s.reconstruction(), s.x);
    if (cfg.quantizer == QuantizerKind::Bsq) {
      t.commit += squared_distance(s.u, s.q_hard);
    } else if (cfg.quantizer == QuantizerKind::Lfq || cfg.quantizer == QuantizerKind::Vq) {
      t.commit += squared_distance(s.v, s.q_hard);
    }
  }
  t.mse /= n * static_cast<double>(kPatchDim);
  t.commit /= n;
  if (!fwd.soft.empty()) {
    const EntropyLossTerms e = entropy_loss_terms(fwd.soft, cfg.gamma);
    t.entropy = e.total;
    t.per_sample_entropy = e.per_sample;
    t.dataset_entropy = e.dataset;
  }
  t.total = t.mse + cfg.weight_entropy * t.entropy + cfg.weight_commit * t.commit;
  return t;
}

// Gradient of total_loss with respect to every parameter, laid out like
// ToyModel::flat_parameters(). The quantizer is differentiated through its
// straight-through surrogate.
inline Vec backward(const ToyModel& model, const ForwardResult& fwd, const TrainConfig& cfg) {
  const auto layers = model.layers();
  std::vector<DenseGrad> acc;
  for (const DenseLayer* l : layers) acc.push_back({Vec{}, Vec(l->weights.size(), 0.0), Vec(l->bias.size(), 0.0)});
  const auto add = [&](std::size_t idx, const DenseGrad& g) {
    for (std::size_t i = 0; i < g.weights.size(); ++i) acc[idx].weights[i] += g.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) acc[idx].bias[i] += g.bias[i];
  };

  const double n = static_cast<double>(fwd.samples.size());
  const std::size_t n_enc = model.encoder.size();
  const std::size_t idx_down = n_enc;
  const std::size_t idx_up = n_enc + 1;
  const std::size_t idx_dec = n_enc + 2;

  std::vector<Vec> entropy_grad;  // w.r.t. u (BSQ) or v (LFQ)
  if (cfg.weight_entropy != 0.0 && !fwd.soft.empty()) {
    const double scale = cfg.quantizer == QuantizerKind::Bsq ? 2.0 * model.shape.tau * code_magnitude(model.shape.L) : 4.0 * model.shape.tau;
    entropy_grad = entropy_loss_grad_logits(fwd.soft, cfg.gamma, scale);
  }

  for (std::size_t s = 0; s < fwd.samples.size(); ++s) {
    const SampleTrace& t = fwd.samples[s];
    Vec g(kPatchDim);
    const Vec& y = t.reconstruction();
    for (std::size_t i = 0; i < kPatchDim; ++i) g[i] = 2.0 * (y[i] - t.x[i]) / (n * static_cast<double>(kPatchDim));

    for (std::size_t k = model.decoder.size(); k-- > 0;) {
      const Vec& in = k == 0 ? t.z_hat : t.decoder_out[k - 1];
      DenseGrad dg = dense_backward(model.decoder[k], in, t.decoder_out[k], g);
      add(idx_dec + k, dg);
      g = std::move(dg.input);
    }
    DenseGrad up = dense_backward(model.proj_up, t.q, t.z_hat, g);
    add(idx_up, up);

    // Gradient reaching v.
    Vec gv;
    switch (cfg.quantizer) {
      case QuantizerKind::Bsq: {
        Vec gu(t.u.size(), 0.0);
        const double m = code_magnitude(t.u.size());
        for (std::size_t i = 0; i < gu.size(); ++i) gu[i] = m * up.input[i];
        if (!entropy_grad.empty()) {
          for (std::size_t i = 0; i < gu.size(); ++i) gu[i] += cfg.weight_entropy * entropy_grad[s][i];
        }
        if (cfg.weight_commit != 0.0) {
          for (std::size_t i = 0; i < gu.size(); ++i) gu[i] += cfg.weight_commit * 2.0 * (t.u[i] - t.q_hard[i]) / n;
        }
        gv = normalize_backward(t.v, gu);
        break;
      }
      case QuantizerKind::Lfq:
      case QuantizerKind::Vq:
      case QuantizerKind::None: {
        gv = std::move(up.input);
        if (!entropy_grad.empty()) {
          for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += cfg.weight_entropy * entropy_grad[s][i];
        }
        if (cfg.weight_commit != 0.0 && cfg.quantizer != QuantizerKind::None) {
          for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += cfg.weight_commit * 2.0 * (t.v[i] - t.q_hard[i]) / n;
        }
        break;
      }
    }

    const Vec& z = t.encoder_out.back();
    DenseGrad down = dense_backward(model.proj_down, z, t.v, gv);
    add(idx_down, down);
    g = std::move(down.input);
    for (std::size_t k = n_enc; k-- > 0;) {
      const Vec& in = k == 0 ? t.x : t.encoder_out[k - 1];
      DenseGrad dg = dense_backward(model.encoder[k], in, t.encoder_out[k], g);
      add(k, dg);
      g = std::move(dg.input);
    }
  }

  Vec flat;
  flat.reserve(model.parameter_count());
  for (const auto& a : acc) {
    flat.insert(flat.end(), a.weights.begin(), a.weights.end());
    flat.insert(flat.end(), a.bias.begin(), a.bias.end());
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Training

// Distinct codes over the achievable maximum min(vocab, N).
inline double code_usage(std::span<const std::uint64_t> tokens, std::uint64_t vocab) {
  if (tokens.empty()) fail(ErrorKind::EmptyBatch, "no tokens");
  const std::unordered_set<std::uint64_t> distinct(tokens.begin(), tokens.end());
  const std::uint64_t cap = std::min<std::uint64_t>(vocab, tokens.size());
  return static_cast<double>(distinct.size()) / static_cast<double>(cap);
}

inline double code_usage_bits(std::span<const std::uint64_t> tokens, unsigned L) {
  if (L > kMaxTokenBits) fail(ErrorKind::Unsupported, "L must be <= 63");
  return code_usage(tokens, std::uint64_t{1} << L);
}

inline std::vector<std::uint64_t> encode_dataset(const ToyModel& model, const Dataset& ds) {
  std::vector<std::uint64_t> codes;
  codes.reserve(ds.size());
  for (const Vec& x : ds.patches) codes.push_back(encode_sample(model, x).code);
  return codes;
}

inline double dataset_mse(const ToyModel& model, const Dataset& ds) {
  const ForwardResult r = forward(model, ds.patches);
  double s = 0.0;
  for (const auto& t : r.samples) s += squared_distance(t.reconstruction(), t.x);
  return s / (static_cast<double>(ds.size()) * static_cast<double>(kPatchDim));
}

inline double model_code_usage(const ToyModel& model, const Dataset& ds) {
  if (!model.uses_codes()) return 0.0;
  const auto codes = encode_dataset(model, ds);
  if (model.shape.quantizer == QuantizerKind::Vq) return code_usage(codes, model.shape.K);
  return code_usage_bits(codes, static_cast<unsigned>(model.shape.L));
}

struct TrainReport {
  std::vector<LossTerms> loss_curve;  // one entry per step, measured before the update
  double initial_mse = 0.0;           // whole dataset, before training
  double final_mse = 0.0;             // whole dataset, after training
  double code_usage = 0.0;            // whole dataset, after training

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainResult {
  ToyModel model;
  TrainReport report;
};

// Plain minibatch SGD with a constant learning rate. Batches are drawn with
// replacement from an Rng stream derived from the seed.
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds) {
  cfg.validate();
  if (ds.empty()) fail(ErrorKind::EmptyBatch, "dataset is empty");
  TrainResult out{ToyModel::create(cfg.shape(), cfg.seed), {}};
  ToyModel& model = out.model;
  TrainReport& rep = out.report;
  rep.initial_mse = dataset_mse(model, ds);
  rep.loss_curve.reserve(cfg.steps);

  Rng batch_rng(mix_seed(cfg.seed, 1));
  std::vector<Vec> batch(cfg.batch_size);
  Vec params = model.flat_parameters();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& x : batch) x = ds.patches[batch_rng.below(ds.size())];
    const ForwardResult fwd = forward(model, batch);
    const LossTerms loss = total_loss(fwd, cfg);
    if (!std::isfinite(loss.total)) fail(ErrorKind::Diverged, "loss became non-finite at step " + std::to_string(step));
    rep.loss_curve.push_back(loss);
    if (cfg.learning_rate == 0.0) continue;
    const Vec grad = backward(model, fwd, cfg);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grad[i];
    model.set_flat_parameters(params);
  }
  rep.final_mse = dataset_mse(model, ds);
  if (!std::isfinite(rep.final_mse)) fail(ErrorKind::Diverged, "final reconstruction error is non-finite");
  rep.code_usage = model_code_usage(model, ds);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint
//
// Little-endian layout, version 1:
//   0   4  magic "BSQM"
//   4   2  version (1)
//   6   1  quantizer (0 none, 1 bsq, 2 lfq, 3 vq)
//   7   1  reserved (0)
//   8   4  patch_dim (64)
//   12  4  d
//   16  4  L
//   20  4  K (VQ codebook rows, 0 otherwise)
//   24  8  tau (IEEE-754 binary64)
//   32  4  tensor count
//   36     tensors, each: u8 name length, name bytes, u32 rows, u32 cols,
//          rows * cols binary64 values (row-major)
// Tensors appear in layer order (encoder.*, proj_down, proj_up, decoder.*),
// weight before bias; biases are stored as rows x 1. VQ models end with
// "codebook" (K x L).

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline Bytes serialize_checkpoint(const ToyModel& m) {
  ByteWriter w;
  w.tag("BSQM");
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(m.shape.quantizer));
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(kPatchDim));
  w.u32(static_cast<std::uint32_t>(m.shape.d));
  w.u32(static_cast<std::uint32_t>(m.shape.L));
  w.u32(static_cast<std::uint32_t>(m.shape.K));
  w.f64(m.shape.tau);

  struct Named {
    std::string name;
    std::size_t rows, cols;
    const Vec* data;
  };
  std::vector<Named> tensors;
  const auto push_layer = [&](const std::string& name, const DenseLayer& l) {
    tensors.push_back({name + ".weight", l.out, l.in, &l.weights});
    tensors.push_back({name + ".bias", l.out, 1, &l.bias});
  };
  for (std::size_t i = 0; i < m.encoder.size(); ++i) push_layer("encoder." + std::to_string(i), m.encoder[i]);
  push_layer("proj_down", m.proj_down);
  push_layer("proj_up", m.proj_up);
  for (std::size_t i = 0; i < m.decoder.size(); ++i) push_layer("decoder." + std::to_string(i), m.decoder[i]);
  if (m.shape.quantizer == QuantizerKind::Vq) tensors.push_back({"codebook", m.codebook.size(), m.codebook.dim(), &m.codebook.data()});

  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u8(static_cast<std::uint8_t>(t.name.size()));
    w.tag(t.name);
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    for (double x : *t.data) w.f64(x);
  }
  return w.take();
}

inline ToyModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::BadCheckpoint);
  if (r.tag(4) != "BSQM") fail(ErrorKind::BadMagic, "not a model checkpoint");
  if (r.u16() != kCheckpointVersion) fail(ErrorKind::VersionMismatch, "unsupported checkpoint version");
  ModelShape shape;
  const std::uint8_t q = r.u8();
  if (q > 3) fail(ErrorKind::BadCheckpoint, "unknown quantizer id");
  shape.quantizer = static_cast<QuantizerKind>(q);
  r.u8();
  if (r.u32() != kPatchDim) fail(ErrorKind::BadCheckpoint, "checkpoint patch size is not 8x8");
  shape.d = r.u32();
  shape.L = r.u32();
  shape.K = r.u32();
  shape.tau = r.f64();
  if (shape.d < 1 || shape.d > 4096 || shape.L < 1 || shape.L > shape.d || shape.K > (1U << 24)) {
    fail(ErrorKind::BadCheckpoint, "implausible model shape");
  }
  ToyModel m;
  try {
    m = ToyModel::create(shape, 0);
  } catch (const Error& e) {
    fail(ErrorKind::BadCheckpoint, e.what());
  }

  std::vector<Vec*> targets;
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (DenseLayer* l : m.layers()) {
    targets.push_back(&l->weights);
    dims.emplace_back(l->out, l->in);
    targets.push_back(&l->bias);
    dims.emplace_back(l->out, 1);
  }
  Vec codebook;
  if (shape.quantizer == QuantizerKind::Vq) {
    targets.push_back(&codebook);
    dims.emplace_back(shape.K, shape.L);
  }
  if (r.u32() != targets.size()) fail(ErrorKind::BadCheckpoint, "tensor count does not match the architecture");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t name_len = r.u8();
    r.tag(name_len);
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    if (rows != dims[i].first || cols != dims[i].second) fail(ErrorKind::BadCheckpoint, "tensor " + std::to_string(i) + " has the wrong shape");
    Vec& dst = *targets[i];
    dst.resize(rows * cols);
    for (double& x : dst) {
      x = r.f64();
      if (!std::isfinite(x)) fail(ErrorKind::BadCheckpoint, "non-finite parameter");
    }
  }
  if (shape.quantizer == QuantizerKind::Vq) m.codebook = VqCodebook(shape.K, shape.L, std::move(codebook));
  if (r.remaining() != 0) fail(ErrorKind::BadCheckpoint, "trailing bytes after the last tensor");
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const ToyModel& m) { write_file_atomic(path, serialize_checkpoint(m)); }

inline ToyModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace bsq

#endif  // BSQ_TOY_AUTOENCODER_HPP
