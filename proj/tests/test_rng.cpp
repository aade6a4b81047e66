#include <gtest/gtest.h>

#include <csgd/rng.hpp>

#include <vector>

using namespace csgd;

TEST(Philox, KnownAnswerVectors) {
  auto c = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(c, (Philox4x32Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  c = philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(c, (Philox4x32Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  c = philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(c, (Philox4x32Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct) {
  Philox4x32 a(42, 1, 3, 7), b(42, 1, 3, 7), c(42, 1, 3, 8), d(43, 1, 3, 7);
  std::vector<std::uint32_t> va, vb, vc, vd;
  for (int i = 0; i < 20; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_NE(va, vd);
}

TEST(Philox, UniformHelpers) {
  Philox4x32 r(1);
  double mean = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double u = uniform01(r);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u / N;
  }
  EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(1.0 / 12 / N));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) counts[uniform_index(r, 7)]++;
  for (int c : counts) EXPECT_NEAR(c, 10000, 4 * std::sqrt(10000 * 6.0 / 7));
  EXPECT_EQ(uniform_index(r, 1), 0);
}
