#ifndef BSQ_CODEC_HPP
#define BSQ_CODEC_HPP

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bsq/arithmetic_coder.hpp"
#include "bsq/byte_io.hpp"
#include "bsq/error.hpp"
#include "bsq/pnm.hpp"
#include "bsq/prob_models.hpp"
#include "bsq/toy_autoencoder.hpp"

namespace bsq {

inline constexpr std::uint16_t kTokenFileVersion = 1;
inline constexpr std::uint16_t kCompressedFileVersion = 1;
inline constexpr std::size_t kTokenHeaderBytes = 28;
inline constexpr std::size_t kCompressedHeaderBytes = 32;

// Token grid of T frames, each H x W tokens of p x p pixels.
//
// Layout (little-endian):
//   0   4  magic "BSQT"
//   4   2  version (1)
//   6   1  L, bits per token (1..63)
//   7   1  p, patch size in pixels
//   8   4  T
//   12  4  H (tokens per column)
//   16  4  W (tokens per row)
//   20  8  N = T * H * W
//   28     N codes of ceil(L / 8) bytes each, frame-major then row-major
struct TokenFile {
  std::uint8_t L = 18;
  std::uint8_t p = 8;
  std::uint32_t T = 0;
  std::uint32_t H = 0;
  std::uint32_t W = 0;
  std::vector<std::uint64_t> codes;

  std::uint64_t count() const { return codes.size(); }
  std::uint64_t pixels() const { return std::uint64_t{T} * H * W * p * p; }
  std::size_t code_bytes() const { return (L + 7u) / 8u; }

  void validate() const {
    if (L < 1 || L > kMaxTokenBits) fail(ErrorKind::Unsupported, "L must be in [1, 63]");
    if (p < 1) fail(ErrorKind::BadDimensions, "patch size must be >= 1");
    if (codes.size() != std::uint64_t{T} * H * W) fail(ErrorKind::GeometryMismatch, "token count does not equal T * H * W");
    for (std::uint64_t k : codes) {
      if ((k >> L) != 0) fail(ErrorKind::OutOfRange, "token does not fit in L bits");
    }
  }

  bool same_geometry(const TokenFile& o) const { return L == o.L && p == o.p && T == o.T && H == o.H && W == o.W; }

  friend bool operator==(const TokenFile&, const TokenFile&) = default;
};

inline Bytes serialize_tokens(const TokenFile& f) {
  f.validate();
  ByteWriter w;
  w.tag("BSQT");
  w.u16(kTokenFileVersion);
  w.u8(f.L);
  w.u8(f.p);
  w.u32(f.T);
  w.u32(f.H);
  w.u32(f.W);
  w.u64(f.count());
  for (std::uint64_t k : f.codes) w.uint(k, f.code_bytes());
  return w.take();
}

inline TokenFile deserialize_tokens(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorKind::CorruptStream);
  if (r.tag(4) != "BSQT") fail(ErrorKind::BadMagic, "not a token file");
  if (r.u16() != kTokenFileVersion) fail(ErrorKind::VersionMismatch, "unsupported token file version");
  TokenFile f;
  f.L = r.u8();
  f.p = r.u8();
  f.T = r.u32();
  f.H = r.u32();
  f.W = r.u32();
  const std::uint64_t n = r.u64();
  if (f.L < 1 || f.L > kMaxTokenBits) fail(ErrorKind::CorruptStream, "invalid L in token header");
  if (n != std::uint64_t{f.T} * f.H * f.W) fail(ErrorKind::GeometryMismatch, "token count does not equal T * H * W");
  if (n > r.remaining() / f.code_bytes()) fail(ErrorKind::CorruptStream, "token section is truncated");
  f.codes.resize(n);
  for (auto& k : f.codes) k = r.uint(f.code_bytes());
  if (r.remaining() != 0) fail(ErrorKind::CorruptStream, "trailing bytes after the token section");
  f.validate();
  return f;
}

// Arithmetic-coded token file.
//
// Layout (little-endian):
//   0   4  magic "BSQC"
//   4   2  version (1)
//   6   1  model id (0 uniform, 1 adaptive-bit, 2 context-k)
//   7   1  context order k (context-k only, else 0)
//   8   1  L
//   9   1  p
//   10  2  reserved (0)
//   12  4  T
//   16  4  H
//   20  4  W
//   24  8  N
//   32     bitstream: u64 bit count, then the bits packed MSB-first, zero padded
struct CompressedFile {
  ModelKind model = ModelKind::ContextK;
  std::uint8_t order = 0;
  TokenFile geometry;  // codes left empty
  std::uint64_t n_tokens = 0;
  BitStream payload;

  friend bool operator==(const CompressedFile&, const CompressedFile&) = default;
};

inline Bytes serialize_compressed(const CompressedFile& c) {
  ByteWriter w;
  w.tag("BSQC");
  w.u16(kCompressedFileVersion);
  w.u8(static_cast<std::uint8_t>(c.model));
  w.u8(c.order);
  w.u8(c.geometry.L);
  w.u8(c.geometry.p);
  w.u16(0);
  w.u32(c.geometry.T);
  w.u32(c.geometry.H);
  w.u32(c.geometry.W);
  w.u64(c.n_tokens);
  c.payload.serialize(w);
  return w.take();
}

inline CompressedFile deserialize_compressed(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorKind::CorruptStream);
  if (r.tag(4) != "BSQC") fail(ErrorKind::BadMagic, "not a compressed token file");
  if (r.u16() != kCompressedFileVersion) fail(ErrorKind::VersionMismatch, "unsupported compressed file version");
  CompressedFile c;
  const std::uint8_t id = r.u8();
  if (id > 2) fail(ErrorKind::CorruptStream, "unknown model id " + std::to_string(id));
  c.model = static_cast<ModelKind>(id);
  c.order = r.u8();
  c.geometry.L = r.u8();
  c.geometry.p = r.u8();
  r.u16();
  c.geometry.T = r.u32();
  c.geometry.H = r.u32();
  c.geometry.W = r.u32();
  c.n_tokens = r.u64();
  if (c.geometry.L < 1 || c.geometry.L > kMaxTokenBits) fail(ErrorKind::CorruptStream, "invalid L in header");
  if (c.n_tokens != std::uint64_t{c.geometry.T} * c.geometry.H * c.geometry.W) fail(ErrorKind::CorruptStream, "token count does not equal T * H * W");
  c.payload = BitStream::deserialize(r);
  if (r.remaining() != 0) fail(ErrorKind::CorruptStream, "trailing bytes after the payload");
  return c;
}

// ---------------------------------------------------------------------------
// Token <-> symbol mapping
//
//   uniform:      tokens as symbols over 2^L when L <= 16, otherwise L bits per token
//   adaptive-bit: L bits per token, least significant first, one Bernoulli per bit
//   context-k:    tokens as symbols over 2^L conditioned on the previous k tokens (L <= 16)

struct SymbolPlan {
  ProbModel model;
  bool bitwise = false;
};

inline SymbolPlan plan_symbols(ModelKind kind, unsigned L, unsigned order) {
  switch (kind) {
    case ModelKind::Uniform:
      if (L <= kMaxScaleBits) return {ProbModel::uniform(1u << L), false};
      return {ProbModel::uniform(2), true};
    case ModelKind::AdaptiveBit:
      return {ProbModel::adaptive_bit(L), true};
    case ModelKind::ContextK:
      if (L > kMaxScaleBits) fail(ErrorKind::Unsupported, "context-k models need L <= 16; use adaptive-bit");
      return {ProbModel::context_k(1u << L, order), false};
  }
  fail(ErrorKind::Unsupported, "unknown model kind");
}

inline std::vector<std::uint32_t> tokens_to_symbols(std::span<const std::uint64_t> codes, unsigned L, bool bitwise) {
  std::vector<std::uint32_t> out;
  if (!bitwise) {
    out.reserve(codes.size());
    for (std::uint64_t k : codes) out.push_back(static_cast<std::uint32_t>(k));
    return out;
  }
  out.reserve(codes.size() * L);
  for (std::uint64_t k : codes) {
    for (unsigned b = 0; b < L; ++b) out.push_back(static_cast<std::uint32_t>((k >> b) & 1U));
  }
  return out;
}

inline std::vector<std::uint64_t> symbols_to_tokens(std::span<const std::uint32_t> symbols, unsigned L, bool bitwise) {
  std::vector<std::uint64_t> out;
  if (!bitwise) return {symbols.begin(), symbols.end()};
  out.reserve(symbols.size() / L);
  for (std::size_t i = 0; i + L <= symbols.size(); i += L) {
    std::uint64_t k = 0;
    for (unsigned b = 0; b < L; ++b) k |= std::uint64_t{symbols[i + b]} << b;
    out.push_back(k);
  }
  return out;
}

inline CompressedFile compress(const TokenFile& tokens, ModelKind kind, unsigned order = 1) {
  tokens.validate();
  if (kind != ModelKind::ContextK) order = 0;
  const SymbolPlan plan = plan_symbols(kind, tokens.L, order);
  const auto symbols = tokens_to_symbols(tokens.codes, tokens.L, plan.bitwise);
  CompressedFile c;
  c.model = kind;
  c.order = static_cast<std::uint8_t>(order);
  c.geometry = tokens;
  c.geometry.codes.clear();
  c.n_tokens = tokens.count();
  c.payload = ac_encode(std::span<const std::uint32_t>(symbols), plan.model);
  return c;
}

inline TokenFile decompress(const CompressedFile& c) {
  SymbolPlan plan = [&] {
    try {
      return plan_symbols(c.model, c.geometry.L, c.order);
    } catch (const Error& e) {
      fail(ErrorKind::CorruptStream, e.what());
    }
  }();
  const std::uint64_t n_symbols = plan.bitwise ? c.n_tokens * c.geometry.L : c.n_tokens;
  // Each symbol costs at least 2^-16 bit of payload, which bounds how many a stream can hold.
  if (n_symbols > (c.payload.size() + 64) * (std::uint64_t{1} << kMaxScaleBits)) fail(ErrorKind::CorruptStream, "token count is implausible for the payload size");
  const auto symbols = ac_decode(c.payload, plan.model, static_cast<std::size_t>(n_symbols));
  TokenFile t = c.geometry;
  t.codes = symbols_to_tokens(symbols, c.geometry.L, plan.bitwise);
  t.validate();
  return t;
}

// Ideal payload length for the tokens under the chosen model.
inline double ideal_bits(const TokenFile& tokens, ModelKind kind, unsigned order = 1) {
  const SymbolPlan plan = plan_symbols(kind, tokens.L, kind == ModelKind::ContextK ? order : 0);
  const auto symbols = tokens_to_symbols(tokens.codes, tokens.L, plan.bitwise);
  return stream_bits_lower_bound(plan.model, std::span<const std::uint32_t>(symbols));
}

// ---------------------------------------------------------------------------
// Statistics

struct StatsReport {
  std::uint64_t n_tokens = 0;
  unsigned L = 0;
  std::uint64_t pixels = 0;
  std::uint64_t raw_bits = 0;  // N * L
  double raw_bpp = 0.0;
  std::optional<std::uint64_t> coded_bits;      // arithmetic-coded payload
  std::optional<std::uint64_t> container_bits;  // whole compressed file
  std::optional<double> coded_bpp;
  std::optional<double> savings;  // 1 - coded_bits / raw_bits
};

inline StatsReport compute_stats(const TokenFile& tokens, const CompressedFile* compressed = nullptr) {
  StatsReport s;
  s.n_tokens = tokens.count();
  s.L = tokens.L;
  s.pixels = tokens.pixels();
  s.raw_bits = s.n_tokens * tokens.L;
  s.raw_bpp = s.pixels ? static_cast<double>(s.raw_bits) / static_cast<double>(s.pixels) : 0.0;
  if (compressed != nullptr) {
    if (!compressed->geometry.same_geometry(tokens) || compressed->n_tokens != tokens.count()) {
      fail(ErrorKind::GeometryMismatch, "compressed file geometry differs from the token file");
    }
    s.coded_bits = compressed->payload.size();
    s.container_bits = 8 * serialize_compressed(*compressed).size();
    s.coded_bpp = s.pixels ? static_cast<double>(*s.coded_bits) / static_cast<double>(s.pixels) : 0.0;
    s.savings = s.raw_bits ? 1.0 - static_cast<double>(*s.coded_bits) / static_cast<double>(s.raw_bits) : 0.0;
  }
  return s;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// key=value lines, one per field; absent fields are omitted.
inline std::string render_kv(const StatsReport& s) {
  std::ostringstream o;
  o << "tokens=" << s.n_tokens << "\n"
    << "bits_per_token=" << s.L << "\n"
    << "pixels=" << s.pixels << "\n"
    << "raw_bits=" << s.raw_bits << "\n"
    << "raw_bpp=" << format_double(s.raw_bpp) << "\n";
  if (s.coded_bits) {
    o << "coded_bits=" << *s.coded_bits << "\n"
      << "container_bits=" << *s.container_bits << "\n"
      << "coded_bpp=" << format_double(*s.coded_bpp) << "\n"
      << "savings=" << format_double(*s.savings) << "\n";
  }
  return o.str();
}

inline std::string render_table(const StatsReport& s) {
  char buf[256];
  std::ostringstream o;
  o << "quantity          value\n"
    << "----------------  ----------------\n";
  std::snprintf(buf, sizeof buf, "%-16s  %llu\n%-16s  %u\n%-16s  %llu\n%-16s  %llu\n%-16s  %.6f\n", "tokens",
                static_cast<unsigned long long>(s.n_tokens), "bits/token", s.L, "pixels", static_cast<unsigned long long>(s.pixels), "raw bits",
                static_cast<unsigned long long>(s.raw_bits), "raw bpp", s.raw_bpp);
  o << buf;
  if (s.coded_bits) {
    std::snprintf(buf, sizeof buf, "%-16s  %llu\n%-16s  %llu\n%-16s  %.6f\n%-16s  %.2f%%\n", "coded bits", static_cast<unsigned long long>(*s.coded_bits),
                  "container bits", static_cast<unsigned long long>(*s.container_bits), "coded bpp", *s.coded_bpp, "savings", 100.0 * *s.savings);
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------
// Images <-> tokens

inline unsigned token_bits(const ToyModel& m) {
  switch (m.shape.quantizer) {
    case QuantizerKind::Bsq:
    case QuantizerKind::Lfq:
      return static_cast<unsigned>(m.shape.L);
    case QuantizerKind::Vq:
      return std::max(1u, static_cast<unsigned>(std::bit_width(m.shape.K - 1)));
    case QuantizerKind::None:
      break;
  }
  fail(ErrorKind::BadCheckpoint, "checkpoint has no quantizer, so it cannot produce tokens");
}

inline TokenFile tokenize(const ToyModel& model, std::span<const GrayImage> frames) {
  const unsigned L = token_bits(model);
  TokenFile f;
  f.L = static_cast<std::uint8_t>(L);
  f.p = static_cast<std::uint8_t>(kPatchSide);
  f.T = static_cast<std::uint32_t>(frames.size());
  if (frames.empty()) return f;
  const std::size_t width = frames.front().width;
  const std::size_t height = frames.front().height;
  for (const auto& img : frames) {
    if (img.width != width || img.height != height) fail(ErrorKind::BadDimensions, "all frames must share one size");
  }
  if (width % kPatchSide != 0 || height % kPatchSide != 0) fail(ErrorKind::BadDimensions, "image sides must be multiples of 8");
  f.H = static_cast<std::uint32_t>(height / kPatchSide);
  f.W = static_cast<std::uint32_t>(width / kPatchSide);
  f.codes.reserve(std::size_t{f.T} * f.H * f.W);
  Vec patch(kPatchDim);
  for (const auto& img : frames) {
    for (std::size_t ti = 0; ti < f.H; ++ti) {
      for (std::size_t tj = 0; tj < f.W; ++tj) {
        for (std::size_t i = 0; i < kPatchSide; ++i) {
          for (std::size_t j = 0; j < kPatchSide; ++j) patch[i * kPatchSide + j] = img.at(ti * kPatchSide + i, tj * kPatchSide + j);
        }
        f.codes.push_back(encode_sample(model, patch).code);
      }
    }
  }
  return f;
}

inline std::vector<GrayImage> detokenize(const ToyModel& model, const TokenFile& tokens) {
  tokens.validate();
  if (token_bits(model) != tokens.L) fail(ErrorKind::BadCheckpoint, "checkpoint bottleneck does not match the token width");
  if (tokens.p != kPatchSide) fail(ErrorKind::BadDimensions, "the toy model decodes 8x8 patches only");
  std::vector<GrayImage> frames;
  std::size_t at = 0;
  for (std::size_t t = 0; t < tokens.T; ++t) {
    GrayImage img{std::size_t{tokens.W} * kPatchSide, std::size_t{tokens.H} * kPatchSide, {}};
    img.pixels.assign(img.width * img.height, 0.0);
    for (std::size_t ti = 0; ti < tokens.H; ++ti) {
      for (std::size_t tj = 0; tj < tokens.W; ++tj) {
        const Vec patch = decode_code(model, tokens.codes[at++]);
        for (std::size_t i = 0; i < kPatchSide; ++i) {
          for (std::size_t j = 0; j < kPatchSide; ++j) img.at(ti * kPatchSide + i, tj * kPatchSide + j) = patch[i * kPatchSide + j];
        }
      }
    }
    frames.push_back(std::move(img));
  }
  return frames;
}

// Every 8x8 tile of every image, images in order, tiles row-major.
inline Dataset dataset_from_images(std::span<const GrayImage> images) {
  Dataset ds;
  for (const auto& img : images) {
    if (img.width % kPatchSide != 0 || img.height % kPatchSide != 0 || img.width == 0 || img.height == 0) {
      fail(ErrorKind::BadDimensions, "image sides must be nonzero multiples of 8");
    }
    for (std::size_t ti = 0; ti < img.height / kPatchSide; ++ti) {
      for (std::size_t tj = 0; tj < img.width / kPatchSide; ++tj) {
        Vec patch(kPatchDim);
        for (std::size_t i = 0; i < kPatchSide; ++i) {
          for (std::size_t j = 0; j < kPatchSide; ++j) patch[i * kPatchSide + j] = img.at(ti * kPatchSide + i, tj * kPatchSide + j);
        }
        ds.patches.push_back(std::move(patch));
      }
    }
  }
  return ds;
}

// T frames of H x W tiles drawn from make_synthetic_dataset, frame-major then row-major.
inline std::vector<GrayImage> synthetic_frames(std::string_view kind, std::size_t T, std::size_t H, std::size_t W, std::uint64_t seed) {
  if (T == 0 || H == 0 || W == 0) fail(ErrorKind::BadDimensions, "synthetic input needs T, H, W >= 1");
  const Dataset ds = make_synthetic_dataset(kind, T * H * W, seed);
  std::vector<GrayImage> frames;
  std::size_t at = 0;
  for (std::size_t t = 0; t < T; ++t) {
    GrayImage img{W * kPatchSide, H * kPatchSide, std::vector<double>(W * H * kPatchDim)};
    for (std::size_t ti = 0; ti < H; ++ti) {
      for (std::size_t tj = 0; tj < W; ++tj) {
        const Vec& patch = ds.patches[at++];
        for (std::size_t i = 0; i < kPatchSide; ++i) {
          for (std::size_t j = 0; j < kPatchSide; ++j) img.at(ti * kPatchSide + i, tj * kPatchSide + j) = patch[i * kPatchSide + j];
        }
      }
    }
    frames.push_back(std::move(img));
  }
  return frames;
}

}  // namespace bsq

#endif  // BSQ_CODEC_HPP
