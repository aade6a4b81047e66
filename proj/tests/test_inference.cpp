#include <gtest/gtest.h>

#include <csgd/csgd.hpp>

#include <Eigen/Eigenvalues>

#include "toy_models.hpp"

using namespace csgd;
using csgd::testing::make_dataset;
using csgd::testing::QuadraticToy;

TEST(EstimateJ, IdenticalRowsGiveOuterProduct) {
  IsingModel m(3);
  const auto d = make_dataset({{1, 0, 1}, {1, 0, 1}, {1, 0, 1}}, DataKind::binary);
  const auto one = make_dataset({{1, 0, 1}}, DataKind::binary);
  const ParamVector t = ParamVector::LinSpaced(6, -0.2, 0.3);
  const ParamVector g = full_grad(m, t, one);
  EXPECT_LE((estimate_J(m, t, d) - g * g.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EstimateJ, HandArithmetic) {
  // per-observation gradients -(theta - y) = +1 and -1
  QuadraticToy toy(1, 1, 2);
  const auto d = make_dataset({{1, 0}, {3, 0}});
  ParamVector t(1);
  t << 2;
  EXPECT_DOUBLE_EQ(estimate_J(toy, t, d)(0, 0), 1.0);
}

TEST(EstimateH, SingleComponentEqualsJExactly) {
  QuadraticToy toy(2, 1, 2);
  const auto d = make_dataset({{1, 0}, {3, 2}, {7, 1}});
  ParamVector t(2);
  t << 0.3, -2;
  EXPECT_EQ(estimate_H(toy, t, d), estimate_J(toy, t, d));
}

TEST(EstimateHJ, SymmetricAndPsd) {
  FrailtyModel m(4);
  Philox4x32 rng(1);
  const Dataset d = simulate_frailty(frailty_truth(4), 300, rng);
  const ParamVector t = frailty_truth(4).to_unconstrained();
  for (const Matrix& A : {estimate_H(m, t, d), estimate_J(m, t, d)}) {
    EXPECT_EQ(A, A.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(VP, CorollaryForms) {
  Matrix H(2, 2), J(2, 2);
  H << 2, 0.3, 0.3, 1;
  J << 3, 0.5, 0.5, 2;
  const Index n = 50, K = 7;
  const double tol = 1e-13;
  Matrix v = v_p(moments({SchemeKind::standard, n, K, {}}), H, J, n);
  EXPECT_LE((v - (1 - 1.0 / n) * J).cwiseAbs().maxCoeff(), tol);
  v = v_p(moments({SchemeKind::bernoulli, n, K, {}}), H, J, n);
  EXPECT_LE((v - (1 - 1.0 / n) * H).cwiseAbs().maxCoeff(), tol);
  v = v_p(moments({SchemeKind::hypergeometric, n, K, {}}), H, J, n);
  const Matrix expect = (1 - 1.0 / n) * H - (double(n - 1) / (double(n) * n * K - n)) * (J - H);
  EXPECT_LE((v - expect).cwiseAbs().maxCoeff(), tol);
  EXPECT_THROW(v_p(moments({SchemeKind::standard, n, K, {}}), H, J, n + 1), ConfigError);
}

TEST(CovThetaBar, ScalarExamples) {
  Matrix H(1, 1), J(1, 1), V(1, 1);
  H << 2;
  J << 8;
  V << 8;
  EXPECT_NEAR(cov_theta_bar(H, J, V, Regime::R3, 100, 100)(0, 0), 0.04, 1e-15);
  EXPECT_NEAR(cov_theta_bar(H, J, V, Regime::R1, 100, 100)(0, 0), 0.02, 1e-15);
  EXPECT_NEAR(cov_theta_bar(H, J, V, Regime::R2, 100, 100)(0, 0), 0.02, 1e-15);
  V << 2;
  EXPECT_NEAR(cov_theta_bar(H, J, V, Regime::R3, 100, 100)(0, 0), 0.025, 1e-15);
}

TEST(CovThetaBar, LargeTApproachesRegimeOne) {
  Matrix H(2, 2), J(2, 2);
  H << 2, 0.3, 0.3, 1;
  J << 3, 0.5, 0.5, 2;
  const Matrix r1 = cov_theta_bar(H, J, J, Regime::R1, 1, 100);
  const Matrix r3 = cov_theta_bar(H, J, J, Regime::R3, 100000000, 100);
  EXPECT_LE((r1 - r3).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_EQ(r3, r3.transpose());
}

TEST(CovThetaBar, JitterRescuesSingularPsdH) {
  Matrix H = Matrix::Zero(2, 2);
  H(0, 0) = 1;
  const Matrix J = Matrix::Identity(2, 2);
  const Matrix c = cov_theta_bar(H, J, J, Regime::R1, 10, 10);
  EXPECT_NEAR(c(0, 0), 0.1, 1e-9);
  EXPECT_GT(c(1, 1), 1e15);  // the untouched direction is flagged by an enormous variance
}

TEST(CovThetaBar, ZeroOrIndefiniteHRaisesConditioningError) {
  const Matrix J = Matrix::Identity(2, 2);
  EXPECT_THROW(cov_theta_bar(Matrix::Zero(2, 2), J, J, Regime::R1, 10, 10), ConditioningError);
  Matrix H = Matrix::Identity(2, 2);
  H(1, 1) = -1;
  EXPECT_THROW(cov_theta_bar(H, J, J, Regime::R1, 10, 10), ConditioningError);
}

TEST(CovThetaBar, LoewnerOrderingWhenJDominatesH) {
  Matrix H(2, 2), J(2, 2);
  H << 2, 0.3, 0.3, 1;
  J << 3, 0.5, 0.5, 2;
  Eigen::SelfAdjointEigenSolver<Matrix> jh(J - H);
  ASSERT_GE(jh.eigenvalues().minCoeff(), -1e-8);
  const Index n = 100, K = 5, T = 300;
  const Matrix c1 = cov_theta_bar(H, J, v_p(moments({SchemeKind::standard, n, K, {}}), H, J, n), Regime::R3, T, n);
  for (auto k : {SchemeKind::bernoulli, SchemeKind::hypergeometric}) {
    const Matrix c = cov_theta_bar(H, J, v_p(moments({k, n, K, {}}), H, J, n), Regime::R3, T, n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(c1 - c);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(ConfidenceIntervals, Quantiles) {
  ParamVector t = ParamVector::Zero(1);
  Matrix c = Matrix::Identity(1, 1);
  auto ci = confidence_intervals(t, c, 0.95);
  EXPECT_NEAR(ci[0].first, -1.95996, 1e-5);
  EXPECT_NEAR(ci[0].second, 1.95996, 1e-5);
  ci = confidence_intervals(t, c, 0.5);
  EXPECT_NEAR(ci[0].second, 0.67449, 1e-5);
  t << 3;
  ci = confidence_intervals(t, Matrix::Zero(1, 1), 0.95);
  EXPECT_EQ(ci[0].first, 3);
  EXPECT_EQ(ci[0].second, 3);
  EXPECT_THROW(confidence_intervals(t, -c, 0.95), NumericDomainError);
  EXPECT_THROW(confidence_intervals(t, c, 1.0), ConfigError);
}

TEST(Holm, Examples) {
  EXPECT_EQ(holm_adjust({0.2}), std::vector<double>{0.2});
  const auto a = holm_adjust({0.01, 0.02, 0.04});
  EXPECT_NEAR(a[0], 0.03, 1e-15);
  EXPECT_NEAR(a[1], 0.04, 1e-15);
  EXPECT_NEAR(a[2], 0.04, 1e-15);
  EXPECT_EQ(holm_adjust({0.5, 0.6}), (std::vector<double>{1.0, 1.0}));
  const auto b = holm_adjust({0.04, 0.01, 0.02});
  EXPECT_NEAR(b[0], 0.04, 1e-15);
  EXPECT_NEAR(b[1], 0.03, 1e-15);
  EXPECT_THROW(holm_adjust({1.5}), ConfigError);
}

TEST(WaldTests, Invariants) {
  ParamVector t(4);
  t << 0.1, 3.0, -2.5, 0.0;
  const Matrix c = Matrix::Identity(4, 4);
  const auto r = wald_tests(t, c, 0.05);
  for (const auto& x : r) {
    EXPECT_GE(x.p_adjusted, x.p_value);
    EXPECT_EQ(x.reject, x.p_adjusted < 0.05);
  }
  EXPECT_NEAR(r[1].p_value, std::erfc(3.0 / std::sqrt(2.0)), 1e-15);
  EXPECT_TRUE(r[1].reject);
  EXPECT_FALSE(r[0].reject);
  EXPECT_EQ(r[3].p_value, 1.0);
}
