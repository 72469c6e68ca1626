#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "kwmhn/rng.hpp"

using kwmhn::Rng;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs |= x != c();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitIsDeterministicAndDistinct) {
  Rng root(7);
  Rng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  EXPECT_EQ(s1.seed(), s1b.seed());
  EXPECT_NE(s1.seed(), s2.seed());
  EXPECT_EQ(s1(), s1b());
  EXPECT_EQ(kwmhn::derive_seed(7, 1), s1.seed());
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 5 * std::sqrt(10000.0 * 6 / 7));
  EXPECT_EQ(r.below(1), 0u);
}

TEST(Rng, UniformMoments) {
  Rng r(5);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal(1.5, 0.25);
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  EXPECT_NEAR(m, 1.5, 0.005);
  EXPECT_NEAR(std::sqrt(s2 / n - m * m), 0.25, 0.005);
}

TEST(Rng, Mix64IsInjectiveOnSmallRange) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(kwmhn::mix64(i));
  EXPECT_EQ(seen.size(), 10000u);
}
