#ifndef BSQ_CAUSAL_MASK_HPP
#define BSQ_CAUSAL_MASK_HPP

#include <cstddef>
#include <vector>

#include "bsq/byte_io.hpp"
#include "bsq/error.hpp"
#include "bsq/pnm.hpp"

namespace bsq {

// Attention mask over N = T * tokens_per_frame tokens in frame-major order.
// allow[i * N + j] is true when query i may attend to key j, which holds iff
// frame(j) <= frame(i).
struct BlockMask {
  std::size_t T = 0;
  std::size_t tokens_per_frame = 0;
  std::vector<bool> allow;

  std::size_t size() const { return T * tokens_per_frame; }
  std::size_t frame(std::size_t i) const { return i / tokens_per_frame; }

  bool at(std::size_t i, std::size_t j) const { return allow[i * size() + j]; }

  // Same answer as at(), computed from indices alone.
  bool allows(std::size_t i, std::size_t j) const { return j / tokens_per_frame <= i / tokens_per_frame; }

  friend bool operator==(const BlockMask&, const BlockMask&) = default;
};

inline BlockMask blockwise_causal_mask(std::size_t T, std::size_t tokens_per_frame) {
  if (T < 1 || tokens_per_frame < 1) fail(ErrorKind::OutOfRange, "mask needs T >= 1 and tokens_per_frame >= 1");
  BlockMask m{T, tokens_per_frame, {}};
  const std::size_t n = m.size();
  m.allow.assign(n * n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t visible = (m.frame(i) + 1) * tokens_per_frame;
    for (std::size_t j = 0; j < visible; ++j) m.allow[i * n + j] = true;
  }
  return m;
}

// Leading (t * tokens_per_frame)^2 submatrix: the mask for the first t frames.
inline BlockMask prefix_restriction(const BlockMask& mask, std::size_t t) {
  if (t < 1 || t > mask.T) fail(ErrorKind::OutOfRange, "prefix length must be in [1, T]");
  BlockMask out{t, mask.tokens_per_frame, {}};
  const std::size_t n = out.size();
  const std::size_t full = mask.size();
  out.allow.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.allow[i * n + j] = mask.allow[i * full + j];
  }
  return out;
}

// PBM bitmap with one pixel per entry; allowed entries are black.
inline Bytes encode_mask_pbm(const BlockMask& mask) { return encode_pbm(mask.size(), mask.size(), mask.allow); }

}  // namespace bsq

#endif  // BSQ_CAUSAL_MASK_HPP
