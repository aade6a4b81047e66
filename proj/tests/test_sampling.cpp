#include <gtest/gtest.h>

#include <csgd/sampling.hpp>

#include <cmath>
#include <set>

using namespace csgd;

namespace {
SchemeSpec spec(SchemeKind k, Index n, Index K, std::optional<Index> l = {}) { return {k, n, K, l}; }
}  // namespace

TEST(Draw, StandardSingleRowIsForced) {
  Philox4x32 rng(1);
  for (int r = 0; r < 10; ++r) {
    const auto s = draw(spec(SchemeKind::standard, 1, 4), rng);
    ASSERT_EQ(s.pairs.size(), 4u);
    for (Index k = 0; k < 4; ++k) EXPECT_EQ(s.pairs[k], (ComponentIndex{0, k}));
  }
}

TEST(Draw, StructuralInvariants) {
  Philox4x32 rng(2);
  for (int r = 0; r < 2000; ++r) {
    const auto st = draw(spec(SchemeKind::standard, 7, 5), rng);
    ASSERT_EQ(st.pairs.size(), 5u);
    for (Index k = 0; k < 5; ++k) {
      EXPECT_EQ(st.pairs[k].component, k);
      EXPECT_EQ(st.pairs[k].observation, st.pairs[0].observation);
    }
    const auto hy = draw(spec(SchemeKind::hypergeometric, 7, 5), rng);
    ASSERT_EQ(hy.pairs.size(), 5u);
    std::set<Index> cells;
    for (auto c : hy.pairs) {
      EXPECT_TRUE(c.observation >= 0 && c.observation < 7 && c.component >= 0 && c.component < 5);
      cells.insert(c.observation * 5 + c.component);
    }
    EXPECT_EQ(cells.size(), 5u);
    for (auto c : draw(spec(SchemeKind::bernoulli, 7, 5), rng).pairs)
      EXPECT_TRUE(c.observation >= 0 && c.observation < 7 && c.component >= 0 && c.component < 5);
  }
}

TEST(Draw, HypergeometricMarginalsN3K2) {
  Philox4x32 rng(3);
  const int N = 1000000;
  std::vector<double> cnt(6, 0);
  for (int r = 0; r < N; ++r)
    for (auto c : draw(spec(SchemeKind::hypergeometric, 3, 2), rng).pairs) cnt[c.observation * 2 + c.component]++;
  const double se = std::sqrt((1.0 / 3) * (2.0 / 3) / N);
  for (double c : cnt) EXPECT_NEAR(c / N, 1.0 / 3, 3 * se);
}

TEST(Draw, BernoulliMeanSize) {
  Philox4x32 rng(4);
  const int N = 1000000;
  double sum = 0, sq = 0;
  for (int r = 0; r < N; ++r) {
    const double s = static_cast<double>(draw(spec(SchemeKind::bernoulli, 4, 5), rng).pairs.size());
    sum += s;
    sq += s * s;
  }
  const double mean = sum / N, var = sq / N - mean * mean;
  EXPECT_NEAR(mean, 5.0, 3 * std::sqrt(var / N));
  EXPECT_NEAR(var, 20 * 0.25 * 0.75, 0.05);
}

TEST(Draw, BernoulliSingleObservationTakesEverything) {
  Philox4x32 rng(5);
  EXPECT_EQ(draw(spec(SchemeKind::bernoulli, 1, 3), rng).pairs.size(), 3u);
}

TEST(Moments, ClosedForms) {
  auto m = moments(spec(SchemeKind::standard, 100, 7));
  EXPECT_DOUBLE_EQ(m.gamma1, 0.01);
  EXPECT_DOUBLE_EQ(m.gamma3, 0.01);
  EXPECT_DOUBLE_EQ(m.gamma2, 0.0);
  m = moments(spec(SchemeKind::bernoulli, 100, 7));
  EXPECT_DOUBLE_EQ(m.gamma1, 0.01);
  EXPECT_DOUBLE_EQ(m.gamma3, 0.0001);
  m = moments(spec(SchemeKind::hypergeometric, 10, 5));
  EXPECT_NEAR(m.gamma3, 0.01 * (1 - 9.0 / 49), 1e-15);
  EXPECT_NEAR(m.gamma3, 0.0081633, 1e-7);
  EXPECT_EQ(m.gamma2, m.gamma3);
}

TEST(Moments, OrderingInvariant) {
  for (auto k : {SchemeKind::standard, SchemeKind::bernoulli, SchemeKind::hypergeometric})
    for (Index n : {2, 5, 50})
      for (Index K : {2, 3, 10}) {
        const auto m = moments(spec(k, n, K));
        EXPECT_LE(0.0, m.gamma3);
        EXPECT_LE(m.gamma3, m.gamma1);
        EXPECT_DOUBLE_EQ(m.gamma1, 1.0 / n);
      }
}

TEST(Recycled, BernoulliUnsupportedAndWindowBounds) {
  Philox4x32 rng(6);
  RecycleBuffer buf;
  EXPECT_THROW(draw_recycled(spec(SchemeKind::bernoulli, 5, 2, 2), rng, buf), UnsupportedSchemeError);
  EXPECT_THROW(draw_recycled(spec(SchemeKind::standard, 5, 2, 6), rng, buf), ConfigError);
  EXPECT_THROW(draw_recycled(spec(SchemeKind::hypergeometric, 5, 2, 0), rng, buf), ConfigError);
}

TEST(Recycled, HyperWindowBlocksAreDisjoint) {
  Philox4x32 rng(7);
  RecycleBuffer buf;
  const auto s = spec(SchemeKind::hypergeometric, 2, 2, 2);
  std::vector<double> freq(4, 0);
  const int windows = 200000;
  for (int w = 0; w < windows; ++w) {
    std::set<Index> seen;
    for (int c = 0; c < 2; ++c) {
      const auto sel = draw_recycled(s, rng, buf);
      ASSERT_EQ(sel.pairs.size(), 2u);
      for (auto p : sel.pairs) {
        seen.insert(p.observation * 2 + p.component);
        if (c == 0) freq[p.observation * 2 + p.component]++;
      }
    }
    EXPECT_EQ(seen.size(), 4u);
  }
  const double se = std::sqrt(0.25 / windows);
  for (double f : freq) EXPECT_NEAR(f / windows, 0.5, 4 * se);
}

TEST(Recycled, StandardWindowUsesDistinctObservations) {
  Philox4x32 rng(8);
  RecycleBuffer buf;
  const auto s = spec(SchemeKind::standard, 10, 3, 4);
  for (int w = 0; w < 1000; ++w) {
    std::set<Index> obs;
    for (int c = 0; c < 4; ++c) {
      const auto sel = draw_recycled(s, rng, buf);
      ASSERT_EQ(sel.pairs.size(), 3u);
      obs.insert(sel.pairs[0].observation);
    }
    EXPECT_EQ(obs.size(), 4u);
  }
}

TEST(Recycled, WindowOfOneMatchesDrawMarginals) {
  Philox4x32 rng(9);
  RecycleBuffer buf;
  const auto s = spec(SchemeKind::hypergeometric, 3, 2, 1);
  const int N = 300000;
  std::vector<double> cnt(6, 0);
  for (int r = 0; r < N; ++r)
    for (auto c : draw_recycled(s, rng, buf).pairs) cnt[c.observation * 2 + c.component]++;
  const double se = std::sqrt((1.0 / 3) * (2.0 / 3) / N);
  for (double c : cnt) EXPECT_NEAR(c / N, 1.0 / 3, 4 * se);
}

TEST(Recycled, IndependentAcrossWindowBoundary) {
  // indicator "observation 0 drawn" in the last call of a window vs the first call of the next
  Philox4x32 rng(10);
  RecycleBuffer buf;
  const auto s = spec(SchemeKind::standard, 4, 2, 3);
  const int W = 200000;
  double a = 0, b = 0, ab = 0;
  for (int w = 0; w < W; ++w) {
    draw_recycled(s, rng, buf);
    draw_recycled(s, rng, buf);
    const double x = draw_recycled(s, rng, buf).pairs[0].observation == 0;
    const double y = draw_recycled(s, rng, buf).pairs[0].observation == 0;
    draw_recycled(s, rng, buf);
    draw_recycled(s, rng, buf);
    a += x;
    b += y;
    ab += x * y;
  }
  const double cov = ab / W - (a / W) * (b / W);
  EXPECT_NEAR(cov, 0.0, 4 * 0.1875 / std::sqrt(W));
}
