#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "bsq/prob_models.hpp"
#include "bsq/rng.hpp"
#include "test_support.hpp"

namespace bsq {
namespace {

using test::expect_error;

void expect_valid(const FreqTable& t, std::size_t K) {
  ASSERT_TRUE(t.valid());
  ASSERT_EQ(t.size(), K);
  for (std::uint32_t s = 0; s < K; ++s) ASSERT_GE(t.freq(s), 1U);
  ASSERT_EQ(std::popcount(t.scale), 1);
  ASSERT_LE(t.scale, 1U << 16);
}

TEST(FreqTable, SymbolLookup) {
  const FreqTable t{{0, 3, 4, 10, 16}, 16};
  EXPECT_EQ(t.symbol_for(0), 0U);
  EXPECT_EQ(t.symbol_for(2), 0U);
  EXPECT_EQ(t.symbol_for(3), 1U);
  EXPECT_EQ(t.symbol_for(4), 2U);
  EXPECT_EQ(t.symbol_for(15), 3U);
  EXPECT_TRUE(t.valid());
  EXPECT_FALSE((FreqTable{{0, 3, 3, 16}, 16}.valid()));
  EXPECT_FALSE((FreqTable{{0, 3, 15}, 16}.valid()));
}

TEST(ScaleForAlphabet, PowersOfTwo) {
  EXPECT_EQ(scale_for_alphabet(2), 1U << 14);
  EXPECT_EQ(scale_for_alphabet(16384), 1U << 14);
  EXPECT_EQ(scale_for_alphabet(16385), 1U << 15);
  EXPECT_EQ(scale_for_alphabet(65536), 1U << 16);
  expect_error(ErrorKind::Unsupported, [] { scale_for_alphabet(65537); });
  expect_error(ErrorKind::OutOfRange, [] { scale_for_alphabet(0); });
}

TEST(QuantizeCounts, EverySymbolKeepsMass) {
  Rng rng(40);
  for (int i = 0; i < 300; ++i) {
    const std::size_t K = 1 + rng.below(2000);
    std::vector<std::uint64_t> counts(K);
    for (auto& c : counts) c = rng.below(3) == 0 ? rng.below(1000000) : 0;
    const FreqTable t = quantize_counts(counts, scale_for_alphabet(K));
    expect_valid(t, K);
  }
}

TEST(QuantizeCounts, FullAlphabetAtMaximumScale) {
  const FreqTable t = quantize_counts(std::vector<std::uint64_t>(65536, 7), 1U << 16);
  for (std::uint32_t s = 0; s < 65536; ++s) ASSERT_EQ(t.freq(s), 1U);
}

TEST(Predict, UniformIsFlat) {
  const ProbModel m = ProbModel::uniform(4);
  const FreqTable t = m.predict(m.context_of({}));
  for (std::uint32_t s = 0; s < 4; ++s) EXPECT_EQ(t.freq(s), t.scale / 4);
}

TEST(Predict, AdaptiveBitLaplaceCounts) {
  ProbModel m = ProbModel::adaptive_bit(1);
  std::vector<std::uint32_t> history;
  for (int i = 0; i < 10; ++i) {
    const Context c = m.context_of(history);
    m.update(c, 1);
    history.push_back(1);
  }
  const FreqTable t = m.predict(m.context_of(history));
  const double p1 = static_cast<double>(t.freq(1)) / t.scale;
  EXPECT_NEAR(p1, 11.0 / 12.0, 1.0 / t.scale);
  EXPECT_EQ(t.freq(0), 1366U);
  EXPECT_EQ(t.freq(1), 15018U);
}

TEST(Predict, AdaptiveBitSlotsAreBitPositions) {
  ProbModel m = ProbModel::adaptive_bit(3);
  std::vector<std::uint32_t> h;
  for (int token = 0; token < 50; ++token) {
    for (std::uint32_t bit : {1U, 0U, 1U}) {
      const Context c = m.context_of(h);
      EXPECT_EQ(c.slot, h.size() % 3);
      m.update(c, bit);
      h.push_back(bit);
    }
  }
  EXPECT_GT(m.predict({0, 0}).freq(1), 15000U);
  EXPECT_GT(m.predict({1, 0}).freq(0), 15000U);
  EXPECT_GT(m.predict({2, 0}).freq(1), 15000U);
}

TEST(Predict, ContextOneLearnsAlternation) {
  ProbModel m = ProbModel::context_k(2, 1);
  std::vector<std::uint32_t> h;
  double last = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const std::uint32_t s = static_cast<std::uint32_t>(i % 2);
    const Context c = m.context_of(h);
    if (!h.empty() && h.back() == 0) {
      const FreqTable t = m.predict(c);
      const double p = static_cast<double>(t.freq(1)) / t.scale;
      EXPECT_GE(p, last);
      last = p;
    }
    m.update(c, s);
    h.push_back(s);
  }
  EXPECT_GT(last, 0.998);
}

TEST(Predict, ContextOfPacksHistory) {
  const ProbModel m = ProbModel::context_k(300, 3);
  EXPECT_EQ(m.context_of({}), (Context{0, 0}));
  const std::vector<std::uint32_t> h{7, 299, 5, 9};
  const Context c = m.context_of(h);
  EXPECT_EQ(c.slot, 3U);
  EXPECT_EQ(c.history, 9ULL | (5ULL << 16) | (299ULL << 32));
  EXPECT_EQ(m.context_of(std::span<const std::uint32_t>(h).first(1)), (Context{1, 7}));
}

TEST(Update, Errors) {
  ProbModel m = ProbModel::context_k(4, 1);
  expect_error(ErrorKind::OutOfRange, [&] { m.update({}, 4); });
  ProbModel b = ProbModel::adaptive_bit(4);
  expect_error(ErrorKind::OutOfRange, [&] { b.update({}, 2); });
  expect_error(ErrorKind::Unsupported, [] { ProbModel::context_k(4, 5); });
  expect_error(ErrorKind::OutOfRange, [] { ProbModel::adaptive_bit(0); });
}

TEST(Update, UniformIsNoOp) {
  ProbModel m = ProbModel::uniform(8);
  const ProbModel before = m;
  m.update({}, 3);
  m.update({}, 7);
  EXPECT_EQ(m, before);
}

TEST(Update, CountIncrementsCommute) {
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    ProbModel a = ProbModel::context_k(16, 2);
    ProbModel b = a;
    const Context c1{static_cast<std::uint32_t>(rng.below(3)), rng.below(256)};
    const Context c2{static_cast<std::uint32_t>(rng.below(3)), rng.below(256)};
    const auto s1 = static_cast<std::uint32_t>(rng.below(16));
    const auto s2 = static_cast<std::uint32_t>(rng.below(16));
    a.update(c1, s1);
    a.update(c2, s2);
    b.update(c2, s2);
    b.update(c1, s1);
    EXPECT_EQ(a, b);
  }
}

TEST(Update, ReplayIsDeterministic) {
  Rng rng(42);
  std::vector<std::uint32_t> stream(5000);
  for (auto& s : stream) s = static_cast<std::uint32_t>(rng.below(64));
  const auto replay = [&] {
    ProbModel m = ProbModel::context_k(64, 2);
    for (std::size_t n = 0; n < stream.size(); ++n) m.update(m.context_of(std::span<const std::uint32_t>(stream).first(n)), stream[n]);
    return m;
  };
  EXPECT_EQ(replay(), replay());
}

TEST(Synchrony, EncoderAndDecoderSidesAgree) {
  Rng rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    const int kind = static_cast<int>(rng.below(3));
    const std::uint32_t K = kind == 1 ? 2 : static_cast<std::uint32_t>(1 + rng.below(300));
    ProbModel enc = kind == 0 ? ProbModel::uniform(K) : kind == 1 ? ProbModel::adaptive_bit(1 + static_cast<unsigned>(rng.below(20))) : ProbModel::context_k(K, static_cast<unsigned>(rng.below(5)));
    ProbModel dec = enc;
    std::vector<std::uint32_t> h;
    for (int n = 0; n < 400; ++n) {
      const auto s = static_cast<std::uint32_t>(rng.below(K));
      const Context ce = enc.context_of(h);
      const Context cd = dec.context_of(h);
      ASSERT_EQ(ce, cd);
      const FreqTable te = enc.predict(ce);
      ASSERT_EQ(te, dec.predict(cd));
      expect_valid(te, K);
      enc.update(ce, s);
      dec.update(cd, s);
      h.push_back(s);
    }
  }
}

// Oracle model that knows the stream and puts scale - (K - 1) on the true symbol.
struct DeterministicModel {
  std::vector<std::uint32_t> script;
  std::uint32_t K = 2;

  Context context_of(std::span<const std::uint32_t> h) const { return {static_cast<std::uint32_t>(h.size()), 0}; }
  FreqTable predict(const Context& c) const {
    std::vector<std::uint64_t> counts(K, 0);
    if (c.slot < script.size()) counts[script[c.slot]] = 1;
    return quantize_counts(counts, scale_for_alphabet(K));
  }
  void update(const Context&, std::uint32_t) {}
};
static_assert(SymbolModel<DeterministicModel>);
static_assert(SymbolModel<ProbModel>);

TEST(StreamBitsLowerBound, UniformBinaryIsExact) {
  const std::vector<std::uint32_t> bits{1, 0, 0, 1, 1, 1, 0, 1};
  EXPECT_EQ(stream_bits_lower_bound(ProbModel::uniform(2), bits), 8.0);
}

TEST(StreamBitsLowerBound, DeterministicModel) {
  Rng rng(44);
  for (std::uint32_t K : {2U, 16U, 1000U}) {
    std::vector<std::uint32_t> s(300);
    for (auto& x : s) x = static_cast<std::uint32_t>(rng.below(K));
    const double scale = scale_for_alphabet(K);
    const double expected = 300.0 * std::log2(scale / (scale - K + 1));
    EXPECT_NEAR(stream_bits_lower_bound(DeterministicModel{s, K}, s), expected, 1e-9);
  }
}

TEST(StreamBitsLowerBound, DoesNotMutateCallerModel) {
  const ProbModel m = ProbModel::context_k(8, 1);
  const ProbModel copy = m;
  stream_bits_lower_bound(m, std::vector<std::uint32_t>{1, 2, 3, 1, 2, 3});
  EXPECT_EQ(m, copy);
}

}  // namespace
}  // namespace bsq
