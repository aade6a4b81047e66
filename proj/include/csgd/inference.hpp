#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <boost/math/distributions/normal.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "sampling.hpp"
#include "types.hpp"

namespace csgd {

enum class Regime { R1, R2, R3 };

inline std::string to_string(Regime r) {
  return r == Regime::R1 ? "R1" : (r == Regime::R2 ? "R2" : "R3");
}

inline Regime parse_regime(const std::string& s) {
  if (s == "R1" || s == "1") return Regime::R1;
  if (s == "R2" || s == "2") return Regime::R2;
  if (s == "R3" || s == "3") return Regime::R3;
  throw ConfigError("unknown regime '" + s + "'");
}

namespace detail {

// acc(lower) += v v^T over the given nonzero entries (indices need not be sorted).
inline void add_outer_lower(Matrix& acc, const std::vector<std::pair<Index, double>>& nz) {
  for (const auto& [a, va] : nz)
    for (const auto& [b, vb] : nz) {
      if (b > a) continue;
      acc(a, b) += va * vb;
    }
}

inline void finish_symmetric(Matrix& acc, double inv_n) {
  const Index d = acc.rows();
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b <= a; ++b) {
      acc(a, b) *= inv_n;
      acc(b, a) = acc(a, b);
    }
}

}  // namespace detail

// (1/n) sum_i g_i g_i^T, g_i the per-observation sum of component gradients.
template <CompositeModel M>
Matrix estimate_J(const M& model, const ParamVector& theta, const Dataset& data) {
  detail::check_inputs(model, theta, data);
  const Index d = model.dimension();
  Matrix acc = Matrix::Zero(d, d);
  ParamVector g(d);
  std::vector<double> scratch;
  std::vector<std::pair<Index, double>> nz;
  for (Index i = 0; i < data.n_train(); ++i) {
    g.setZero();
    const auto y = data.train_row(i);
    for (Index k = 0; k < model.num_components(); ++k) add_sub_grad(model, theta, y, k, 1.0, g, scratch);
    nz.clear();
    for (Index a = 0; a < d; ++a)
      if (g[a] != 0.0) nz.emplace_back(a, g[a]);
    detail::add_outer_lower(acc, nz);
  }
  detail::finish_symmetric(acc, 1.0 / static_cast<double>(data.n_train()));
  if (!acc.allFinite()) throw NumericDomainError("J estimate is not finite");
  return acc;
}

// (1/n) sum_i sum_k g_ik g_ik^T over per-component gradients.
template <CompositeModel M>
Matrix estimate_H(const M& model, const ParamVector& theta, const Dataset& data) {
  detail::check_inputs(model, theta, data);
  const Index d = model.dimension();
  Matrix acc = Matrix::Zero(d, d);
  std::vector<double> vals;
  std::vector<std::pair<Index, double>> nz;
  for (Index i = 0; i < data.n_train(); ++i) {
    const auto y = data.train_row(i);
    for (Index k = 0; k < model.num_components(); ++k) {
      const auto sup = model.support(k);
      vals.resize(sup.size());
      model.sub_grad_values(theta, y, k, std::span<double>(vals));
      nz.clear();
      for (std::size_t m = 0; m < sup.size(); ++m)
        if (vals[m] != 0.0) nz.emplace_back(sup[m], vals[m]);
      detail::add_outer_lower(acc, nz);
    }
  }
  detail::finish_symmetric(acc, 1.0 / static_cast<double>(data.n_train()));
  if (!acc.allFinite()) throw NumericDomainError("H estimate is not finite");
  return acc;
}

// Finite-n plug-in: gamma1^-2 n^-1 (gamma1 - gamma3) H + n^-1 (gamma1^-2 gamma3 - 1) J.
inline Matrix v_p(const SchemeMoments& m, const Matrix& H, const Matrix& J, Index n) {
  const double nn = static_cast<double>(n);
  if (std::abs(m.gamma1 * nn - 1.0) > 1e-12) throw ConfigError("v_p requires gamma1 = 1/n");
  const double g1sq_inv = 1.0 / (m.gamma1 * m.gamma1);
  const double ch = g1sq_inv * (m.gamma1 - m.gamma3) / nn;
  const double cj = (g1sq_inv * m.gamma3 - 1.0) / nn;
  return ch * H + cj * J;
}

// H^{-1} via LDLT; one diagonal jitter retry before giving up.
inline Matrix inverse_spd(const Matrix& H) {
  const Index d = H.rows();
  auto try_invert = [d](const Matrix& A, Matrix& out) {
    Eigen::LDLT<Matrix> f(A);
    if (f.info() != Eigen::Success || !f.isPositive() || !(f.rcond() > 1e-14)) return false;
    // LDLT pseudo-inverts zero pivots silently, so check them directly.
    const auto D = f.vectorD();
    if (!(D.minCoeff() > 1e-14 * D.cwiseAbs().maxCoeff())) return false;
    out = f.solve(Matrix::Identity(d, d));
    return out.allFinite();
  };
  Matrix inv;
  if (try_invert(H, inv)) return inv;
  const double jitter = 1e-8 * H.diagonal().mean();
  Matrix Hj = H;
  Hj.diagonal().array() += jitter;
  if (jitter > 0.0 && try_invert(Hj, inv)) return inv;
  throw ConditioningError("H estimate is numerically singular even after diagonal jitter; "
                          "check for parameters no component touches");
}

inline Matrix cov_theta_bar(const Matrix& H, const Matrix& J, const Matrix& V, Regime regime,
                            Index T_n, Index n) {
  if (T_n < 1 || n < 1) throw ConfigError("T_n and n must be positive");
  const Matrix Hi = inverse_spd(H);
  Matrix cov = Matrix::Zero(H.rows(), H.cols());
  if (regime != Regime::R2) cov += Hi * J * Hi / static_cast<double>(n);
  if (regime != Regime::R1) cov += Hi * V * Hi / static_cast<double>(T_n);
  return 0.5 * (cov + cov.transpose());
}

struct SandwichEstimate {
  Matrix H_hat, J_hat, V_P, cov_theta_bar;
  Regime regime = Regime::R3;
  Index T_n = 0, n = 0;
};

template <CompositeModel M>
SandwichEstimate sandwich(const M& model, const ParamVector& theta, const Dataset& data,
                          const SchemeSpec& scheme, Regime regime, Index T_n) {
  SandwichEstimate e;
  e.H_hat = estimate_H(model, theta, data);
  e.J_hat = estimate_J(model, theta, data);
  e.n = data.n_train();
  e.T_n = T_n;
  e.regime = regime;
  e.V_P = v_p(moments(scheme), e.H_hat, e.J_hat, e.n);
  e.cov_theta_bar = cov_theta_bar(e.H_hat, e.J_hat, e.V_P, regime, T_n, e.n);
  return e;
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline std::vector<std::pair<double, double>> confidence_intervals(const ParamVector& theta,
                                                                   const Matrix& cov,
                                                                   double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  std::vector<std::pair<double, double>> out;
  out.reserve(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const double v = cov(j, j);
    if (!(v >= 0.0)) throw NumericDomainError("negative variance for parameter " + std::to_string(j));
    const double h = z * std::sqrt(v);
    out.emplace_back(theta[j] - h, theta[j] + h);
  }
  return out;
}

// Step-down adjustment, returned in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p) {
  const std::size_t m = p.size();
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("p-values must lie in [0,1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double adj = std::min(1.0, static_cast<double>(m - i) * p[order[i]]);
    running = std::max(running, adj);
    out[order[i]] = running;
  }
  return out;
}

struct TestResult {
  double estimate = 0, std_error = 0, z = 0, p_value = 1, p_adjusted = 1;
  bool reject = false;
};

// Two-sided Wald tests of theta_j = 0 with Holm-adjusted p-values.
inline std::vector<TestResult> wald_tests(const ParamVector& theta, const Matrix& cov,
                                          double level) {
  std::vector<TestResult> out(theta.size());
  std::vector<double> pv(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    auto& r = out[j];
    if (!(cov(j, j) >= 0.0)) throw NumericDomainError("negative variance for parameter " + std::to_string(j));
    r.estimate = theta[j];
    r.std_error = std::sqrt(cov(j, j));
    r.z = r.std_error > 0.0 ? r.estimate / r.std_error
                            : (r.estimate == 0.0 ? 0.0 : std::copysign(INFINITY, r.estimate));
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    pv[j] = r.p_value;
  }
  const auto adj = holm_adjust(pv);
  for (Index j = 0; j < theta.size(); ++j) {
    out[j].p_adjusted = adj[j];
    out[j].reject = adj[j] < level;
  }
  return out;
}

}  // namespace csgd
