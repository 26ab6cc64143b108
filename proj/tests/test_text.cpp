#include <gtest/gtest.h>

#include "rentyield/rng.hpp"
#include "rentyield/text.hpp"

using namespace rentyield;

TEST(Text, StripAccentsMapsSpanishLetters) {
  EXPECT_EQ(text::strip_accents("Legan\xC3\xA9s"), "Leganes");
  EXPECT_EQ(text::strip_accents("Opa\xC3\xB1" "el"), "Opanel");
  EXPECT_EQ(text::strip_accents("\xC3\x81VILA Ping\xC3\xBCino"), "AVILA Pinguino");
  EXPECT_EQ(text::strip_accents("\xE2\x82\xAC"), "\xE2\x82\xAC");  // euro sign untouched
}

TEST(Text, NormalizeNameFoldsCaseAndWhitespace) {
  EXPECT_EQ(text::normalize_name("  Casco   Hist\xC3\xB3rico\tde Vallecas "), "casco historico de vallecas");
  EXPECT_EQ(text::normalize_name("PROSPERIDAD"), text::normalize_name("prosperidad"));
  EXPECT_EQ(text::normalize_name(""), "");
}

TEST(Text, Utf8Validation) {
  EXPECT_TRUE(text::is_valid_utf8("plain"));
  EXPECT_TRUE(text::is_valid_utf8("Legan\xC3\xA9s"));
  EXPECT_FALSE(text::is_valid_utf8("Legan\xE9s"));
  EXPECT_FALSE(text::is_valid_utf8("\xC0\xAF"));      // overlong
  EXPECT_FALSE(text::is_valid_utf8("\xED\xA0\x80"));  // surrogate
  EXPECT_EQ(text::latin1_to_utf8("Legan\xE9s"), "Legan\xC3\xA9s");
}

TEST(Text, Fnv1aKnownVectors) {
  EXPECT_EQ(text::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(text::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(7, 3), b = Rng::stream(7, 3), c = Rng::stream(7, 4);
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIndexStaysInRangeAndCoversIt) {
  Rng rng(1);
  std::array<int, 7> counts{};
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, Uniform01AndNormalMoments) {
  Rng rng(99);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}
