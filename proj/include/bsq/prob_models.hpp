#ifndef BSQ_PROB_MODELS_HPP
#define BSQ_PROB_MODELS_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsq/error.hpp"

namespace bsq {

inline constexpr unsigned kDefaultScaleBits = 14;
inline constexpr unsigned kMaxScaleBits = 16;
inline constexpr unsigned kMaxContextOrder = 4;

namespace detail {
__extension__ typedef unsigned __int128 uint128;
}  // namespace detail

// Integer next-symbol distribution. cumulative has K + 1 entries, starts at 0,
// ends at scale and is strictly increasing.
struct FreqTable {
  std::vector<std::uint32_t> cumulative;
  std::uint32_t scale = 0;

  std::size_t size() const { return cumulative.empty() ? 0 : cumulative.size() - 1; }
  std::uint32_t low(std::uint32_t s) const { return cumulative[s]; }
  std::uint32_t high(std::uint32_t s) const { return cumulative[s + 1]; }
  std::uint32_t freq(std::uint32_t s) const { return cumulative[s + 1] - cumulative[s]; }

  // Symbol whose [low, high) contains target; target must be < scale.
  std::uint32_t symbol_for(std::uint32_t target) const {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    return static_cast<std::uint32_t>(it - cumulative.begin()) - 1;
  }

  bool valid() const {
    if (cumulative.size() < 2 || cumulative.front() != 0 || cumulative.back() != scale) return false;
    for (std::size_t i = 1; i < cumulative.size(); ++i) {
      if (cumulative[i] <= cumulative[i - 1]) return false;
    }
    return true;
  }

  friend bool operator==(const FreqTable&, const FreqTable&) = default;
};

// Smallest power of two >= max(K, 2^14); K above 2^16 cannot be represented.
inline std::uint32_t scale_for_alphabet(std::uint64_t K) {
  if (K < 1) fail(ErrorKind::OutOfRange, "alphabet must have at least one symbol");
  if (K > (std::uint64_t{1} << kMaxScaleBits)) fail(ErrorKind::Unsupported, "alphabets above 2^16 symbols exceed the frequency scale");
  return static_cast<std::uint32_t>(std::max<std::uint64_t>(std::bit_ceil(K), std::uint64_t{1} << kDefaultScaleBits));
}

// Maps positive counts to frequencies summing to scale with every symbol >= 1:
// f_s = 1 + floor(c_s (scale - K) / C); the rounding remainder goes to the
// first symbol with the largest count.
inline FreqTable quantize_counts(std::span<const std::uint64_t> counts, std::uint32_t scale) {
  const std::size_t K = counts.size();
  if (K < 1 || K > scale) fail(ErrorKind::OutOfRange, "alphabet does not fit the frequency scale");
  std::uint64_t total = 0;
  std::size_t peak = 0;
  for (std::size_t s = 0; s < K; ++s) {
    total += counts[s];
    if (counts[s] > counts[peak]) peak = s;
  }
  const std::uint64_t spare = scale - K;
  std::vector<std::uint32_t> f(K, 1);
  std::uint64_t used = K;
  if (total > 0) {
    for (std::size_t s = 0; s < K; ++s) {
      const auto extra = static_cast<std::uint32_t>(static_cast<detail::uint128>(counts[s]) * spare / total);
      f[s] += extra;
      used += extra;
    }
  }
  f[peak] += static_cast<std::uint32_t>(scale - used);
  FreqTable t;
  t.scale = scale;
  t.cumulative.resize(K + 1);
  t.cumulative[0] = 0;
  for (std::size_t s = 0; s < K; ++s) t.cumulative[s + 1] = t.cumulative[s] + f[s];
  return t;
}

// Conditioning information for one prediction. slot is a position class
// (bit index for bit models, history length for context models); history packs
// earlier symbols 16 bits apiece, most recent in the low bits.
struct Context {
  std::uint32_t slot = 0;
  std::uint64_t history = 0;

  friend auto operator<=>(const Context&, const Context&) = default;
};

template <typename M>
concept SymbolModel = requires(M m, const M cm, const Context& c, std::span<const std::uint32_t> h, std::uint32_t s) {
  { cm.context_of(h) } -> std::same_as<Context>;
  { cm.predict(c) } -> std::same_as<FreqTable>;
  m.update(c, s);
};

enum class ModelKind : std::uint8_t { Uniform = 0, AdaptiveBit = 1, ContextK = 2 };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Uniform: return "uniform";
    case ModelKind::AdaptiveBit: return "adaptive-bit";
    case ModelKind::ContextK: return "context-k";
  }
  return "?";
}

// Count-based adaptive model with Laplace (add-one) smoothing.
//   Uniform:     fixed equal frequencies over K symbols; update is a no-op.
//   AdaptiveBit: binary alphabet, one Bernoulli per bit position (slot = n mod L).
//   ContextK:    K-ary alphabet conditioned on the previous k symbols.
class ProbModel {
 public:
  static ProbModel uniform(std::uint32_t K) {
    ProbModel m(ModelKind::Uniform, K, 0, 1);
    return m;
  }

  static ProbModel adaptive_bit(unsigned bit_positions) {
    if (bit_positions < 1) fail(ErrorKind::OutOfRange, "adaptive-bit model needs at least one bit position");
    return ProbModel(ModelKind::AdaptiveBit, 2, 0, bit_positions);
  }

  static ProbModel context_k(std::uint32_t K, unsigned order) {
    if (order > kMaxContextOrder) fail(ErrorKind::Unsupported, "context order is limited to 4");
    return ProbModel(ModelKind::ContextK, K, order, 1);
  }

  ModelKind kind() const { return kind_; }
  std::uint32_t alphabet() const { return K_; }
  unsigned order() const { return order_; }
  unsigned bit_positions() const { return slots_; }
  std::uint32_t scale() const { return scale_; }

  Context context_of(std::span<const std::uint32_t> history) const {
    switch (kind_) {
      case ModelKind::Uniform: return {};
      case ModelKind::AdaptiveBit: return {static_cast<std::uint32_t>(history.size() % slots_), 0};
      case ModelKind::ContextK: {
        const std::size_t avail = std::min<std::size_t>(history.size(), order_);
        Context c{static_cast<std::uint32_t>(avail), 0};
        for (std::size_t i = 0; i < avail; ++i) c.history |= std::uint64_t{history[history.size() - 1 - i]} << (16 * i);
        return c;
      }
    }
    return {};
  }

  FreqTable predict(const Context& ctx) const {
    if (kind_ == ModelKind::Uniform) return *prior_;
    const auto it = counts_.find(ctx);
    if (it == counts_.end()) return *prior_;
    std::vector<std::uint64_t> smoothed(K_, 1);
    for (std::size_t s = 0; s < K_; ++s) smoothed[s] += it->second[s];
    return quantize_counts(smoothed, scale_);
  }

  void update(const Context& ctx, std::uint32_t symbol) {
    if (symbol >= K_) fail(ErrorKind::OutOfRange, "symbol " + std::to_string(symbol) + " outside alphabet of " + std::to_string(K_));
    if (kind_ == ModelKind::Uniform) return;
    auto& row = counts_[ctx];
    if (row.empty()) row.assign(K_, 0);
    ++row[symbol];
  }

  friend bool operator==(const ProbModel& a, const ProbModel& b) {
    return a.kind_ == b.kind_ && a.K_ == b.K_ && a.order_ == b.order_ && a.slots_ == b.slots_ && a.counts_ == b.counts_;
  }

 private:
  ProbModel(ModelKind kind, std::uint32_t K, unsigned order, unsigned slots)
      : kind_(kind), K_(K), order_(order), slots_(slots), scale_(scale_for_alphabet(K)) {
    prior_ = std::make_shared<const FreqTable>(quantize_counts(std::vector<std::uint64_t>(K_, 1), scale_));
  }

  ModelKind kind_;
  std::uint32_t K_;
  unsigned order_;
  unsigned slots_;
  std::uint32_t scale_;
  std::map<Context, std::vector<std::uint32_t>> counts_;
  std::shared_ptr<const FreqTable> prior_;  // table for a context with no counts
};

// Ideal code length in bits, sum of -log2(f / scale), of a stream under the
// model's own integer frequencies. The model is taken by value in its initial state.
template <SymbolModel M>
double stream_bits_lower_bound(M model, std::span<const std::uint32_t> symbols) {
  double bits = 0.0;
  for (std::size_t n = 0; n < symbols.size(); ++n) {
    const Context ctx = model.context_of(symbols.first(n));
    const FreqTable t = model.predict(ctx);
    if (symbols[n] >= t.size() || t.freq(symbols[n]) == 0) fail(ErrorKind::UncodableSymbol, "symbol has zero probability");
    bits -= std::log2(static_cast<double>(t.freq(symbols[n])) / static_cast<double>(t.scale));
    model.update(ctx, symbols[n]);
  }
  return bits;
}

}  // namespace bsq

#endif  // BSQ_PROB_MODELS_HPP
