#include <gtest/gtest.h>

#include <csgd/csgd.hpp>

#include "toy_models.hpp"

using namespace csgd;
using csgd::testing::make_dataset;
using csgd::testing::QuadraticToy;
using csgd::testing::ZeroModel;

TEST(Stepsize, Schedule) {
  OptimizerConfig c;
  EXPECT_EQ(c.c_exponent, 0.501);
  EXPECT_DOUBLE_EQ(stepsize(c, 1), 1.0);
  EXPECT_NEAR(stepsize(c, 1024), 0.0310341, 1e-7);
  c.eta0 = 2;
  EXPECT_DOUBLE_EQ(stepsize(c, 1), 2.0);
}

TEST(Config, Validation) {
  OptimizerConfig c;
  c.max_iters = 10;
  c.burn_in = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c.burn_in = 2;
  c.c_exponent = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.c_exponent = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.c_exponent = 0.6;
  c.snapshots = {1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.snapshots = {5, 11};
  EXPECT_THROW(c.validate(), ConfigError);
  c.snapshots = {5, 10};
  EXPECT_NO_THROW(c.validate());
  const auto f = OptimizerConfig::from_passes(100, 3.0);
  EXPECT_EQ(f.max_iters, 300);
  EXPECT_EQ(f.burn_in, 25);
}

TEST(StochasticGradient, EmptySelectionIsZero) {
  IsingModel m(3);
  const auto d = make_dataset({{1, 0, 1}}, DataKind::binary);
  EXPECT_EQ(stochastic_gradient(m, ParamVector::Ones(6), d, ComponentSelection{}, 0.5),
            ParamVector::Zero(6));
}

TEST(StochasticGradient, SingleObservationIsExactNegativeGradient) {
  IsingModel m(4);
  const auto d = make_dataset({{1, 0, 1, 1}}, DataKind::binary);
  const ParamVector t = ParamVector::LinSpaced(m.dimension(), -1, 1);
  Philox4x32 rng(1);
  const auto sel = draw(SchemeSpec{SchemeKind::standard, 1, 4, {}}, rng);
  EXPECT_EQ(stochastic_gradient(m, t, d, sel, 1.0), -full_grad(m, t, d));
}

TEST(StochasticGradient, UnbiasedForEveryScheme) {
  QuadraticToy toy(3, 5, 5);
  Philox4x32 drng(2);
  std::vector<int> v;
  for (int i = 0; i < 100; ++i) v.push_back(static_cast<int>(uniform_index(drng, 10)));
  const Dataset d(v, 20, 5, DataKind::count);
  const ParamVector t = ParamVector::LinSpaced(3, 0.5, 3);
  const ParamVector target = -full_grad(toy, t, d);
  for (auto k : {SchemeKind::standard, SchemeKind::bernoulli, SchemeKind::hypergeometric}) {
    const SchemeSpec s{k, 20, 5, {}};
    Philox4x32 rng(3);
    const int N = 100000;
    ParamVector sum = ParamVector::Zero(3), sq = ParamVector::Zero(3);
    for (int r = 0; r < N; ++r) {
      const ParamVector g = stochastic_gradient(toy, t, d, draw(s, rng), 1.0 / 20);
      sum += g;
      sq += g.cwiseProduct(g);
    }
    const ParamVector mean = sum / N;
    for (Index a = 0; a < 3; ++a) {
      const double se = std::sqrt((sq[a] / N - mean[a] * mean[a]) / N);
      EXPECT_NEAR(mean[a], target[a], 4 * se) << to_string(k) << " coordinate " << a;
    }
  }
}

TEST(Fit, ZeroGradientModelStaysAtStart) {
  ZeroModel m(3);
  const auto d = make_dataset({{1, 2}, {3, 4}, {5, 6}});
  ParamVector t0(3);
  t0 << 0.5, -1, 2;
  auto cfg = OptimizerConfig::from_passes(3, 5);
  for (auto k : {SchemeKind::standard, SchemeKind::bernoulli, SchemeKind::hypergeometric}) {
    const auto r = fit(m, d, SchemeSpec{k, 3, 3, {}}, cfg, t0, 9);
    EXPECT_EQ(r.theta_bar, t0);
    EXPECT_EQ(r.iterations_run, 15);
  }
}

TEST(Fit, QuadraticToyRecoversSampleMean) {
  QuadraticToy toy(1, 1, 2);
  Philox4x32 drng(4);
  std::vector<int> v;
  double mean = 0;
  for (int i = 0; i < 100; ++i) {
    const int y = static_cast<int>(uniform_index(drng, 21));
    v.push_back(y);
    v.push_back(0);
    mean += y / 100.0;
  }
  const Dataset d(v, 100, 2, DataKind::count);
  double var = 0;
  for (int i = 0; i < 100; ++i) var += (v[2 * i] - mean) * (v[2 * i] - mean) / 100;
  const auto cfg = OptimizerConfig::from_passes(100, 3);
  const auto r = fit(toy, d, SchemeSpec{SchemeKind::standard, 100, 1, {}}, cfg, ParamVector::Zero(1), 5);
  // optimization-noise SE of the average: H = 1, J = var, T = 300
  EXPECT_NEAR(r.theta_bar[0], mean, 3 * std::sqrt(var / 300));
}

TEST(Fit, AveragingIdentityAndReproducibility) {
  IsingModel m(4);
  Philox4x32 rng(5);
  const Dataset d = exact_sample(grid_truth(4), 300, rng);
  auto cfg = OptimizerConfig::from_passes(300, 2);
  cfg.record_every = 1;
  const SchemeSpec s{SchemeKind::hypergeometric, 300, 4, {}};
  const auto r = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 6);
  ParamVector sum = ParamVector::Zero(m.dimension());
  Index cnt = 0;
  for (const auto& [t, th] : r.trajectory)
    if (t > cfg.burn_in) {
      sum += th;
      ++cnt;
    }
  EXPECT_EQ(cnt, cfg.max_iters - cfg.burn_in);
  EXPECT_LE((sum / cnt - r.theta_bar).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(r.trajectory.back().second, r.theta_last);
  const auto r2 = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 6);
  EXPECT_EQ(r.theta_bar, r2.theta_bar);
  EXPECT_EQ(r.theta_last, r2.theta_last);
  const auto r3 = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 7);
  EXPECT_NE(r.theta_bar, r3.theta_bar);
}

TEST(Fit, SnapshotsExtendASingleRun) {
  IsingModel m(4);
  Philox4x32 rng(6);
  const Dataset d = exact_sample(grid_truth(4), 200, rng);
  const SchemeSpec s{SchemeKind::standard, 200, 4, {}};
  auto cfg = OptimizerConfig::from_passes(200, 3);
  cfg.snapshots = {200, 400, 600};
  const auto full = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 8);
  ASSERT_EQ(full.snapshots.size(), 3u);
  auto short_cfg = OptimizerConfig::from_passes(200, 2);
  const auto part = fit(m, d, s, short_cfg, ParamVector::Zero(m.dimension()), 8);
  EXPECT_EQ(full.snapshots[1].second, part.theta_bar);
  EXPECT_EQ(full.snapshots[2].second, full.theta_bar);
}

TEST(Fit, RecycledRunsAndIsReproducible) {
  IsingModel m(4);
  Philox4x32 rng(7);
  const Dataset d = exact_sample(grid_truth(4), 400, rng);
  const SchemeSpec s{SchemeKind::hypergeometric, 400, 4, 50};
  const auto cfg = OptimizerConfig::from_passes(400, 2);
  const auto a = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 1);
  const auto b = fit(m, d, s, cfg, ParamVector::Zero(m.dimension()), 1);
  EXPECT_EQ(a.theta_bar, b.theta_bar);
  EXPECT_LT((a.theta_bar - grid_truth(4).flat()).norm(), 1.5);
}

TEST(Fit, DivergenceIsReported) {
  QuadraticToy toy(1, 1, 2);
  const auto d = make_dataset({{1000, 0}, {0, 0}, {1000, 0}});
  auto cfg = OptimizerConfig::from_passes(3, 200, 1e7);
  try {
    fit(toy, d, SchemeSpec{SchemeKind::standard, 3, 1, {}}, cfg, ParamVector::Zero(1), 1);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.iteration(), 1);
    EXPECT_TRUE(e.last_finite().allFinite());
  }
}

TEST(Fit, HoldoutRuleNeedsHoldoutRows) {
  IsingModel m(2);
  const auto d = make_dataset({{1, 0}, {0, 1}}, DataKind::binary);
  auto cfg = OptimizerConfig::from_passes(2, 2);
  cfg.holdout_check = HoldoutRule{1, 1e-3};
  EXPECT_THROW(fit(m, d, SchemeSpec{SchemeKind::standard, 2, 2, {}}, cfg, ParamVector::Zero(3), 1), ConfigError);
}

TEST(Fit, SchemeMustMatchData) {
  IsingModel m(2);
  const auto d = make_dataset({{1, 0}, {0, 1}}, DataKind::binary);
  EXPECT_THROW(fit(m, d, SchemeSpec{SchemeKind::standard, 3, 2, {}}, OptimizerConfig::from_passes(2, 2),
                   ParamVector::Zero(3), 1),
               ConfigError);
}

TEST(Fit, HoldoutEarlyStopping) {
  IsingModel m(6);
  Philox4x32 rng(8);
  const Index n = 4000;
  const Dataset d = exact_sample(grid_truth(6), n, rng).with_holdout(random_holdout_mask(n, 0.1, 3));
  const Index nt = d.n_train();
  auto cfg = OptimizerConfig::from_passes(nt, 20);
  cfg.holdout_check = HoldoutRule{nt / 4, 1e-3};
  const auto r = fit(m, d, SchemeSpec{SchemeKind::hypergeometric, nt, 6, {}}, cfg, ParamVector::Zero(m.dimension()), 2);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.iterations_run, cfg.max_iters);
  ASSERT_GE(r.holdout_curve.size(), 2u);
  EXPECT_EQ(r.holdout_curve.back().first, r.iterations_run);
  EXPECT_TRUE(holdout_stop_check(r.holdout_curve, 1e-3));
}

TEST(HoldoutStopCheck, Examples) {
  EXPECT_TRUE(holdout_stop_check({{100, 100.0}, {125, 100.0}}, 0.001));
  EXPECT_FALSE(holdout_stop_check({{100, 100.0}, {125, 99.85}}, 0.001));
  EXPECT_TRUE(holdout_stop_check({{100, 100.0}, {125, 99.95}}, 0.001));
  EXPECT_FALSE(holdout_stop_check({{100, 100.0}}, 0.001));
}
