#include <set>

#include <gtest/gtest.h>

#include "lfba/codec.hpp"
#include "lfba/error.hpp"
#include "oracles.hpp"

using namespace lfba;

TEST(Codec, EncodeMatchesCatalogOutputs) {
  EXPECT_EQ(encode_label(parse_bits("0000")).value, 0);
  EXPECT_EQ(encode_label(parse_bits("1000")).value, 8);
  EXPECT_EQ(encode_label(parse_bits("0011")).value, 3);
}

TEST(Codec, DecodeMatchesCatalogOutputs) {
  EXPECT_EQ(format_bits(decode_label({0, 4})), "0000");
  EXPECT_EQ(format_bits(decode_label({8, 4})), "1000");
  EXPECT_EQ(format_bits(decode_label({15, 4})), "1111");
}

TEST(Codec, DecodeRejectsOutOfRange) {
  EXPECT_THROW(decode_label({16, 4}), ValidationError);
  EXPECT_THROW(decode_label({-1, 4}), ValidationError);
  EXPECT_THROW(decode_label({0, 11}), ValidationError);
}

TEST(Codec, Toggle) {
  EXPECT_EQ(format_bits(toggle(parse_bits("0000"), 3)), "0010");
  EXPECT_EQ(format_bits(toggle(parse_bits("0010"), 3)), "0000");
  EXPECT_EQ(format_bits(toggle(parse_bits("1111"), 1)), "0111");
  EXPECT_THROW(toggle(parse_bits("0000"), 0), ValidationError);
  EXPECT_THROW(toggle(parse_bits("0000"), 5), ValidationError);
}

TEST(Codec, ParseBits) {
  EXPECT_EQ(parse_bits("0110").bits(), (std::vector<int>{0, 1, 1, 0}));
  EXPECT_THROW(parse_bits(""), ValidationError);
  EXPECT_THROW(parse_bits("012"), ValidationError);
  EXPECT_THROW(parse_bits("01a0"), ValidationError);
  EXPECT_THROW(parse_bits("00000000000"), ValidationError);
  EXPECT_NO_THROW(parse_bits("0000000000"));
}

TEST(Codec, VectorConstructionValidates) {
  EXPECT_THROW(SwitchVector(std::vector<int>{0, 2}), ValidationError);
  EXPECT_THROW(SwitchVector(std::vector<int>{}), ValidationError);
  EXPECT_THROW(SwitchVector(0), ValidationError);
  EXPECT_THROW(SwitchVector(11), ValidationError);
  EXPECT_EQ(SwitchVector().size(), 4);
}

TEST(Codec, ExhaustiveBijectionAgainstOracle) {
  for (int n = 1; n <= kMaxSwitches; ++n) {
    std::set<int> seen;
    const auto vectors = oracle::all_vectors(n);
    ASSERT_EQ(static_cast<std::int64_t>(vectors.size()), oracle::pow2(n));
    for (const auto& bits : vectors) {
      const SwitchVector s(bits);
      const ClassLabel y = encode_label(s);
      ASSERT_EQ(y.value, oracle::label_of(bits));
      ASSERT_EQ(y.n, n);
      ASSERT_TRUE(seen.insert(y.value).second) << "label collision at n=" << n;
      ASSERT_EQ(decode_label(y).bits(), bits);
      ASSERT_EQ(oracle::bits_of(y.value, n), bits);
      ASSERT_EQ(parse_bits(format_bits(s)), s);
    }
  }
}

TEST(Codec, ToggleIsAnInvolution) {
  for (int n = 1; n <= 6; ++n) {
    for (const auto& bits : oracle::all_vectors(n)) {
      const SwitchVector s(bits);
      for (int i = 1; i <= n; ++i) {
        const SwitchVector t = toggle(s, i);
        EXPECT_EQ(toggle(t, i), s);
        for (int j = 1; j <= n; ++j) EXPECT_EQ(t.at(j), j == i ? !s.at(j) : s.at(j));
      }
    }
  }
}

TEST(Codec, RolesShareBits) {
  const SwitchVector s = parse_bits("1010");
  EXPECT_EQ(format_bits(as_controls(s)), "1010");
  EXPECT_EQ(as_switches(as_controls(s)), s);
  EXPECT_EQ(format_label({5, 4}), "0101");
}
