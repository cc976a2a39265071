#ifndef BSQ_ARITHMETIC_CODER_HPP
#define BSQ_ARITHMETIC_CODER_HPP

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsq/byte_io.hpp"
#include "bsq/error.hpp"
#include "bsq/prob_models.hpp"

namespace bsq {

// Bit sequence packed big-endian within bytes (first bit is the MSB of byte 0).
// Serialized form: u64 little-endian bit count, then ceil(bits / 8) bytes with
// a zero-padded tail.
class BitStream {
 public:
  void push(bool bit) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> (bits_ % 8));
    ++bits_;
  }

  // Reads past the end return 0.
  bool bit(std::uint64_t i) const { return i < bits_ && ((bytes_[i / 8] >> (7 - i % 8)) & 1U); }

  std::uint64_t size() const { return bits_; }
  const Bytes& bytes() const { return bytes_; }

  void serialize(ByteWriter& w) const {
    w.u64(bits_);
    w.bytes(bytes_);
  }

  Bytes serialize() const {
    ByteWriter w;
    serialize(w);
    return w.take();
  }

  static BitStream deserialize(ByteReader& r) {
    BitStream s;
    s.bits_ = r.u64();
    const std::uint64_t n_bytes = (s.bits_ + 7) / 8;
    if (n_bytes > r.remaining()) fail(ErrorKind::CorruptStream, "bitstream is shorter than its length prefix");
    const auto b = r.bytes(static_cast<std::size_t>(n_bytes));
    s.bytes_.assign(b.begin(), b.end());
    if (s.bits_ % 8 != 0 && (s.bytes_.back() & (0xFFU >> (s.bits_ % 8))) != 0) {
      fail(ErrorKind::CorruptStream, "nonzero padding after the last bit");
    }
    return s;
  }

  static BitStream deserialize(std::span<const std::uint8_t> data) {
    ByteReader r(data, ErrorKind::CorruptStream);
    BitStream s = deserialize(r);
    if (r.remaining() != 0) fail(ErrorKind::CorruptStream, "trailing bytes after the bitstream");
    return s;
  }

  friend bool operator==(const BitStream&, const BitStream&) = default;

 private:
  Bytes bytes_;
  std::uint64_t bits_ = 0;
};

namespace ac {

inline constexpr unsigned kRegisterBits = 32;
inline constexpr std::uint64_t kTop = (std::uint64_t{1} << kRegisterBits) - 1;
inline constexpr std::uint64_t kHalf = std::uint64_t{1} << (kRegisterBits - 1);
inline constexpr std::uint64_t kQuarter = kHalf >> 1;
inline constexpr std::uint64_t kThreeQuarters = kHalf + kQuarter;

}  // namespace ac

// Integer arithmetic encoder with 32-bit registers over the closed interval
// [low, high]. After renormalization high - low + 1 > 2^30, and scales are at
// most 2^16, so every symbol keeps a sub-interval of width >= 2^14.
class ArithmeticEncoder {
 public:
  void encode(const FreqTable& table, std::uint32_t symbol) {
    if (symbol >= table.size() || table.freq(symbol) == 0) {
      fail(ErrorKind::UncodableSymbol, "symbol " + std::to_string(symbol) + " has zero frequency");
    }
    const std::uint64_t range = high_ - low_ + 1;
    high_ = low_ + range * table.high(symbol) / table.scale - 1;
    low_ = low_ + range * table.low(symbol) / table.scale;
    assert(low_ <= high_);
    for (;;) {
      if (high_ < ac::kHalf) {
        emit(false);
      } else if (low_ >= ac::kHalf) {
        emit(true);
        low_ -= ac::kHalf;
        high_ -= ac::kHalf;
      } else if (low_ >= ac::kQuarter && high_ < ac::kThreeQuarters) {
        ++pending_;
        low_ -= ac::kQuarter;
        high_ -= ac::kQuarter;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
    }
    assert(low_ < high_ && high_ - low_ >= ac::kQuarter);
    ++symbols_;
  }

  // Emits the pending bits plus two bits selecting a quarter that lies inside
  // [low, high]. An empty message produces no bits at all.
  BitStream finish() {
    if (symbols_ > 0) {
      ++pending_;
      emit(low_ >= ac::kQuarter);
    }
    BitStream out = std::move(out_);
    out_ = {};
    return out;
  }

 private:
  void emit(bool bit) {
    out_.push(bit);
    for (; pending_ > 0; --pending_) out_.push(!bit);
  }

  std::uint64_t low_ = 0;
  std::uint64_t high_ = ac::kTop;
  std::uint64_t pending_ = 0;
  std::uint64_t symbols_ = 0;
  BitStream out_;
};

class ArithmeticDecoder {
 public:
  explicit ArithmeticDecoder(const BitStream& in) : in_(in) {
    for (unsigned i = 0; i < ac::kRegisterBits; ++i) value_ = (value_ << 1) | next_bit();
  }

  std::uint32_t decode(const FreqTable& table) {
    if (value_ < low_ || value_ > high_) fail(ErrorKind::CorruptStream, "code value left the coding interval");
    const std::uint64_t range = high_ - low_ + 1;
    const std::uint64_t target = ((value_ - low_ + 1) * table.scale - 1) / range;
    if (target >= table.scale) fail(ErrorKind::CorruptStream, "code value outside the frequency table");
    const std::uint32_t symbol = table.symbol_for(static_cast<std::uint32_t>(target));
    high_ = low_ + range * table.high(symbol) / table.scale - 1;
    low_ = low_ + range * table.low(symbol) / table.scale;
    for (;;) {
      if (high_ < ac::kHalf) {
      } else if (low_ >= ac::kHalf) {
        low_ -= ac::kHalf;
        high_ -= ac::kHalf;
        value_ -= ac::kHalf;
      } else if (low_ >= ac::kQuarter && high_ < ac::kThreeQuarters) {
        low_ -= ac::kQuarter;
        high_ -= ac::kQuarter;
        value_ -= ac::kQuarter;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
      value_ = (value_ << 1) | next_bit();
    }
    return symbol;
  }

 private:
  std::uint64_t next_bit() { return in_.bit(pos_++) ? 1 : 0; }

  const BitStream& in_;
  std::uint64_t pos_ = 0;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = ac::kTop;
  std::uint64_t value_ = 0;
};

// Encodes symbols, querying the model for each next-symbol table and updating
// it afterwards. The model is taken by value so the caller's copy stays in its
// initial state.
template <SymbolModel M>
BitStream ac_encode(std::span<const std::uint32_t> symbols, M model) {
  ArithmeticEncoder enc;
  for (std::size_t n = 0; n < symbols.size(); ++n) {
    const Context ctx = model.context_of(symbols.first(n));
    enc.encode(model.predict(ctx), symbols[n]);
    model.update(ctx, symbols[n]);
  }
  return enc.finish();
}

// Decodes n_symbols with an identically initialized model. The decoded symbols
// are re-encoded and must reproduce the input exactly; encodings for a fixed
// count are prefix-free, so truncated or altered streams raise CorruptStream
// instead of decoding to something else.
template <SymbolModel M>
std::vector<std::uint32_t> ac_decode(const BitStream& stream, const M& model, std::size_t n_symbols) {
  std::vector<std::uint32_t> out;
  out.reserve(n_symbols);
  if (n_symbols == 0) {
    if (stream.size() != 0) fail(ErrorKind::CorruptStream, "payload present for an empty message");
    return out;
  }
  M live = model;
  ArithmeticDecoder dec(stream);
  for (std::size_t n = 0; n < n_symbols; ++n) {
    const Context ctx = live.context_of(out);
    const std::uint32_t s = dec.decode(live.predict(ctx));
    live.update(ctx, s);
    out.push_back(s);
  }
  if (!(ac_encode(std::span<const std::uint32_t>(out), model) == stream)) {
    fail(ErrorKind::CorruptStream, "stream is not the encoding of the decoded symbols");
  }
  return out;
}

}  // namespace bsq

#endif  // BSQ_ARITHMETIC_CODER_HPP
