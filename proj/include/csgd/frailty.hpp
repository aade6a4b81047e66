#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "numeric.hpp"
#include "types.hpp"

namespace csgd {

inline constexpr int kMaxFrailtyCount = 170;

// Correlated gamma frailty model for counts: Y_j | V_j ~ Poisson(V_j e^{lambda_j}),
// V_j ~ Gamma with mean 1, variance xi, exchangeable correlation rho.
struct FrailtyParams {
  Eigen::VectorXd lambdas;
  double xi = 1.0;
  double rho = 0.0;

  Index p() const { return lambdas.size(); }

  void validate() const {
    if (p() < 2) throw ConfigError("frailty model needs p >= 2");
    if (!lambdas.allFinite()) throw ConfigError("lambdas must be finite");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ConfigError("xi must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0,1)");
  }

  // (lambda_1..lambda_p, log xi, logit rho)
  ParamVector to_unconstrained() const {
    validate();
    if (rho == 0.0) throw NumericDomainError("rho = 0 has no finite unconstrained value");
    ParamVector t(p() + 2);
    t.head(p()) = lambdas;
    t[p()] = std::log(xi);
    t[p() + 1] = std::log(rho) - std::log1p(-rho);
    return t;
  }

  static FrailtyParams from_unconstrained(const ParamVector& t) {
    if (t.size() < 4) throw ConfigError("unconstrained frailty vector too short");
    const Index p = t.size() - 2;
    FrailtyParams out;
    out.lambdas = t.head(p);
    out.xi = std::exp(t[p]);
    out.rho = logistic(t[p + 1]);
    return out;
  }
};

inline std::vector<std::string> frailty_parameter_names(Index p) {
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("lambda_" + std::to_string(j + 1));
  names.emplace_back("log_xi");
  names.emplace_back("logit_rho");
  return names;
}

// Quantities of the bivariate margin for one pair; 1 and 2 refer to the two
// members of the pair, m1 <= m2 are the smaller and larger counts.
struct PairDerived {
  double u1 = 1, u2 = 1;
  int m1 = 0, m2 = 0;
  double Delta = 1, D1 = 1, D2 = 1, f = 0;
};

inline PairDerived pair_derived(double l1, double l2, double xi, double rho, int y1, int y2) {
  PairDerived d;
  d.u1 = std::exp(l1);
  d.u2 = std::exp(l2);
  d.m1 = std::min(y1, y2);
  d.m2 = std::max(y1, y2);
  const double a = 1.0 - rho;
  d.Delta = 1.0 + xi * d.u1 + xi * d.u2 + xi * xi * d.u1 * d.u2 * a;
  d.D1 = 1.0 + xi * d.u2 * a;
  d.D2 = 1.0 + xi * d.u1 * a;
  d.f = d.Delta * a / (d.D1 * d.D2);
  return d;
}

// Log-margin value and its gradient in the constrained scalars.
struct PairEval {
  double loglik = 0;
  double d_l1 = 0, d_l2 = 0, d_xi = 0, d_rho = 0;
  bool used_mixture = false;
};

namespace detail {

inline void check_counts(int y1, int y2) {
  if (y1 < 0 || y2 < 0) throw DataError("negative count in frailty margin");
  if (y1 > kMaxFrailtyCount || y2 > kMaxFrailtyCount)
    throw NumericDomainError("frailty margin supports counts up to 170, got (" +
                             std::to_string(y1) + ", " + std::to_string(y2) + ")");
}

// Closed-form margin with the alternating finite sum. Returns false when the
// sum loses more than 6 digits to cancellation.
inline bool pair_eval_closed(double l1, double l2, double xi, double rho, int y1, int y2,
                             bool want_grad, PairEval& out) {
  const PairDerived pd = pair_derived(l1, l2, xi, rho, y1, y2);
  const int m1 = pd.m1, m2 = pd.m2;
  const double a = 1.0 - rho;

  // log|t_s| for s = 0..m1, built backwards so no cumulative subtraction occurs.
  std::array<long double, kMaxFrailtyCount + 1> lt, q;  // only 0..m1 are used
  long double lp = 0.0L, qs = 0.0L;
  for (int s = m1; s >= 0; --s) {
    if (s < m1) {
      const int sp = m1 + m2 - s - 1;
      lp += std::log1p(static_cast<long double>(sp) * xi);
      qs += static_cast<long double>(sp) / (1.0L + static_cast<long double>(sp) * xi);
    }
    lt[s] = lp;
    q[s] = qs;
  }
  const bool f_zero = pd.f == 0.0;
  int top = f_zero ? 0 : m1;
  if (!f_zero) {
    const long double lxf = std::log(static_cast<long double>(xi)) + std::log(static_cast<long double>(pd.f));
    long double lc = 0.0L;  // log C(m1,s) C(m2,s) s!
    for (int s = 1; s <= m1; ++s) {
      lc += std::log(static_cast<long double>(m1 - s + 1) * (m2 - s + 1) / s);
      lt[s] += lc + s * lxf;
    }
  }
  long double mx = lt[0];
  for (int s = 1; s <= top; ++s) mx = std::max(mx, lt[s]);
  long double S = 0.0L, Sf = 0.0L, Sx = 0.0L;
  for (int s = 0; s <= top; ++s) {
    const long double e = ((s & 1) ? -1.0L : 1.0L) * std::exp(lt[s] - mx);
    S += e;
    Sf += e * s;
    Sx += e * (q[s] + s / static_cast<long double>(xi));
  }
  if (!(S > 1e-6L)) return false;

  const double lD = std::log(pd.Delta), lD1 = std::log(pd.D1), lD2 = std::log(pd.D2);
  const double A = y1 + y2 + 1.0 / xi;
  double base = y1 * l1 + y2 * l2 - std::lgamma(y1 + 1.0) - std::lgamma(y2 + 1.0) +
                y1 * lD1 + y2 * lD2 - A * lD;
  double sum_xi = 0.0;
  for (int s = 0; s < m2; ++s) {
    base += std::log1p(s * xi);
    sum_xi += s / (1.0 + s * xi);
  }
  out.loglik = base + static_cast<double>(mx + std::log(S));
  out.used_mixture = false;
  if (!want_grad) return true;

  const double u1 = pd.u1, u2 = pd.u2, D = pd.Delta, D1 = pd.D1, D2 = pd.D2;
  const double Gf = static_cast<double>(Sf / S);
  const double Gx = static_cast<double>(Sx / S);
  const double dD_l1 = xi * u1 + xi * xi * u1 * u2 * a;
  const double dD_l2 = xi * u2 + xi * xi * u1 * u2 * a;
  const double dD_xi = u1 + u2 + 2.0 * xi * u1 * u2 * a;
  const double dD_rho = -xi * xi * u1 * u2;
  const double dD1_l2 = xi * u2 * a, dD1_xi = u2 * a, dD1_rho = -xi * u2;
  const double dD2_l1 = xi * u1 * a, dD2_xi = u1 * a, dD2_rho = -xi * u1;

  out.d_l1 = y1 + y2 * dD2_l1 / D2 - A * dD_l1 / D + Gf * (dD_l1 / D - dD2_l1 / D2);
  out.d_l2 = y2 + y1 * dD1_l2 / D1 - A * dD_l2 / D + Gf * (dD_l2 / D - dD1_l2 / D1);
  out.d_xi = sum_xi + y1 * dD1_xi / D1 + y2 * dD2_xi / D2 + lD / (xi * xi) - A * dD_xi / D + Gx +
             Gf * (dD_xi / D - dD1_xi / D1 - dD2_xi / D2);
  out.d_rho = y1 * dD1_rho / D1 + y2 * dD2_rho / D2 - A * dD_rho / D +
              (f_zero ? 0.0 : Gf * (dD_rho / D - 1.0 / a - dD1_rho / D1 - dD2_rho / D2));
  return true;
}

// Same margin as a positive series over a latent Poisson-gamma index N:
// P(y1,y2) = sum_N NB(N; 1/xi, rho) NB(y1; 1/xi+N, b u1) NB(y2; 1/xi+N, b u2), b = xi(1-rho).
inline void pair_eval_mixture(double l1, double l2, double xi, double rho, int y1, int y2,
                              bool want_grad, PairEval& out) {
  if (!(rho >= 0.0 && rho < 1.0)) throw NumericDomainError("mixture form needs rho in [0,1)");
  const double al = 1.0 / xi, a = 1.0 - rho, b = xi * a;
  const double u[2] = {std::exp(l1), std::exp(l2)};
  const int y[2] = {y1, y2};
  const double c[2] = {1.0 + b * u[0], 1.0 + b * u[1]};
  const double lc[2] = {std::log1p(b * u[0]), std::log1p(b * u[1])};
  const double lgy = std::lgamma(y1 + 1.0) + std::lgamma(y2 + 1.0);
  const double lrho = rho > 0.0 ? std::log(rho) : -std::numeric_limits<double>::infinity();
  const double la = std::log1p(-rho), lgal = std::lgamma(al);

  // log of the N-th term without the N-mixing weight
  auto log_T = [&](int N) {
    const double s = al + N;
    double v = -lgy;
    for (int j = 0; j < 2; ++j)
      v += std::lgamma(y[j] + s) - std::lgamma(s) - (s + y[j]) * lc[j] +
           (y[j] ? y[j] * std::log(b * u[j]) : 0.0);
    return v;
  };
  struct Term {
    double la, g_l1, g_l2, g_al, g_b, g_rho;
  };
  std::vector<Term> terms;
  double psi_diff = 0.0;  // digamma(al+N) - digamma(al)
  double best = -std::numeric_limits<double>::infinity();
  const int n_max = rho > 0.0 ? 200000 : 0;
  for (int N = 0;; ++N) {
    if (N > n_max) {
      if (rho > 0.0) throw NumericDomainError("frailty mixture series did not converge");
      break;
    }
    const double s = al + N;
    const double lw = std::lgamma(s) - lgal - std::lgamma(N + 1.0) + (N ? N * lrho : 0.0) + al * la;
    Term t{lw + log_T(N), 0, 0, 0, 0, 0};
    if (want_grad) {
      double g[2], gal = psi_diff + la, gb = 0.0;
      for (int j = 0; j < 2; ++j) {
        g[j] = y[j] - (s + y[j]) * b * u[j] / c[j];
        double h = 0.0;
        for (int i = 0; i < y[j]; ++i) h += 1.0 / (s + i);
        gal += h - lc[j];
        gb += (y[j] ? y[j] / b : 0.0) - (s + y[j]) * u[j] / c[j];
      }
      t.g_l1 = g[0];
      t.g_l2 = g[1];
      t.g_al = gal;
      t.g_b = gb;
      t.g_rho = (N ? N / rho : 0.0) - al / a;
    }
    terms.push_back(t);
    psi_diff += 1.0 / s;
    if (t.la > best) best = t.la;
    if (N > 0 && t.la < terms[N - 1].la && t.la < best - 40.0) break;
  }
  long double tot = 0.0L, G[5] = {0, 0, 0, 0, 0};
  for (const auto& t : terms) {
    const long double w = std::exp(static_cast<long double>(t.la - best));
    tot += w;
    G[0] += w * t.g_l1;
    G[1] += w * t.g_l2;
    G[2] += w * t.g_al;
    G[3] += w * t.g_b;
    G[4] += w * t.g_rho;
  }
  out.loglik = best + static_cast<double>(std::log(tot));
  out.used_mixture = true;
  if (!want_grad) return;
  const double gl1 = static_cast<double>(G[0] / tot), gl2 = static_cast<double>(G[1] / tot);
  const double gal = static_cast<double>(G[2] / tot), gb = static_cast<double>(G[3] / tot);
  out.d_l1 = gl1;
  out.d_l2 = gl2;
  out.d_xi = -gal / (xi * xi) + gb * a;
  if (rho > 0.0) {
    out.d_rho = static_cast<double>(G[4] / tot) - xi * gb;
  } else {
    // one-sided derivative at rho = 0 from the N = 0 and N = 1 terms
    out.d_rho = -al + al * std::exp(log_T(1) - log_T(0)) - xi * gb;
  }
}

}  // namespace detail

// Bivariate log-margin in constrained scalars; rho may equal 1 (perfectly shared frailty).
inline PairEval pair_eval(double l1, double l2, double xi, double rho, int y1, int y2,
                          bool want_grad = true) {
  detail::check_counts(y1, y2);
  if (!(xi > 0.0) || !(rho >= 0.0 && rho <= 1.0) || !std::isfinite(l1) || !std::isfinite(l2))
    throw NumericDomainError("frailty margin outside its domain");
  PairEval out;
  if (!detail::pair_eval_closed(l1, l2, xi, rho, y1, y2, want_grad, out))
    detail::pair_eval_mixture(l1, l2, xi, rho, y1, y2, want_grad, out);
  if (!std::isfinite(out.loglik))
    throw NumericDomainError("frailty margin not finite at counts (" + std::to_string(y1) + ", " +
                             std::to_string(y2) + ")");
  return out;
}

inline double pair_loglik(const FrailtyParams& prm, int y1, int y2, Index j, Index k) {
  return pair_eval(prm.lambdas[j], prm.lambdas[k], prm.xi, prm.rho, y1, y2, false).loglik;
}

// Negative-binomial log-pmf with mean e^lambda and dispersion xi.
inline double nb_loglik(int y, double lambda, double xi) {
  const double al = 1.0 / xi, u = std::exp(lambda);
  return std::lgamma(y + al) - std::lgamma(al) - std::lgamma(y + 1.0) +
         y * (std::log(xi * u) - std::log1p(xi * u)) - al * std::log1p(xi * u);
}

// Pairwise likelihood over all p(p-1)/2 pairs in lexicographic order, on the
// unconstrained layout (lambda_1..lambda_p, log xi, logit rho).
class FrailtyModel {
 public:
  explicit FrailtyModel(Index p) : p_(p) {
    if (p < 2) throw ConfigError("frailty model needs p >= 2");
    for (Index j = 0; j < p; ++j)
      for (Index k = j + 1; k < p; ++k) {
        pairs_.emplace_back(j, k);
        support_.insert(support_.end(), {j, k, p, p + 1});
      }
  }

  Index dimension() const noexcept { return p_ + 2; }
  Index num_components() const noexcept { return static_cast<Index>(pairs_.size()); }
  Index num_variables() const noexcept { return p_; }
  std::vector<std::string> parameter_names() const { return frailty_parameter_names(p_); }
  std::pair<Index, Index> pair(Index k) const { return pairs_[k]; }

  std::span<const Index> support(Index k) const noexcept { return {support_.data() + 4 * k, 4}; }

  double sub_loglik(const ParamVector& theta, std::span<const int> y, Index k) const {
    const auto [j, m] = pairs_[k];
    return pair_eval(theta[j], theta[m], std::exp(theta[p_]), logistic(theta[p_ + 1]), y[j], y[m],
                     false)
        .loglik;
  }

  void sub_grad_values(const ParamVector& theta, std::span<const int> y, Index k,
                       std::span<double> out) const {
    const auto [j, m] = pairs_[k];
    const double xi = std::exp(theta[p_]);
    const double rho = logistic(theta[p_ + 1]);
    const double rho_c = logistic(-theta[p_ + 1]);
    if (rho_c == 0.0) throw NumericDomainError("frailty correlation reached 1");
    const PairEval e = pair_eval(theta[j], theta[m], xi, rho, y[j], y[m], true);
    out[0] = e.d_l1;
    out[1] = e.d_l2;
    out[2] = e.d_xi * xi;
    out[3] = e.d_rho * rho * rho_c;
  }

 private:
  Index p_;
  std::vector<std::pair<Index, Index>> pairs_;
  std::vector<Index> support_;
};

// Gradient of one pair on the unconstrained layout, dense.
inline ParamVector pair_grad(const FrailtyParams& prm, int y1, int y2, Index j, Index k) {
  if (j == k) throw IndexError("pair needs two distinct variables");
  const Index p = prm.p();
  ParamVector g = ParamVector::Zero(p + 2);
  const PairEval e = pair_eval(prm.lambdas[j], prm.lambdas[k], prm.xi, prm.rho, y1, y2, true);
  g[j] = e.d_l1;
  g[k] = e.d_l2;
  g[p] = e.d_xi * prm.xi;
  g[p + 1] = e.d_rho * prm.rho * (1.0 - prm.rho);
  return g;
}

// Exact sampler: G ~ Gamma(1/xi), N_j | G ~ Poisson(G r / (1 - r)),
// V_j ~ Gamma(1/xi + N_j, scale xi (1 - r)), r = sqrt(rho), Y_j ~ Poisson(V_j e^lambda_j).
// Every bivariate margin of Y is the closed-form margin above.
template <class Rng>
Dataset simulate_frailty(const FrailtyParams& prm, Index n, Rng& rng) {
  prm.validate();
  if (n < 1) throw ConfigError("sample size must be >= 1");
  const Index p = prm.p();
  const double al = 1.0 / prm.xi, r = std::sqrt(prm.rho);
  const double scale = prm.xi * (1.0 - r);
  std::vector<double> u(p);
  for (Index j = 0; j < p; ++j) u[j] = std::exp(prm.lambdas[j]);
  std::vector<int> values(static_cast<std::size_t>(n * p));
  for (Index i = 0; i < n; ++i) {
    const double G = r > 0.0 ? std::gamma_distribution<double>(al, 1.0)(rng) : 0.0;
    const double nu = G * r / (1.0 - r);
    for (Index j = 0; j < p; ++j) {
      const int N = nu > 0.0 ? std::poisson_distribution<int>(nu)(rng) : 0;
      const double V = std::gamma_distribution<double>(al + N, scale)(rng);
      const double mean = V * u[j];
      values[i * p + j] = mean > 0.0 ? std::poisson_distribution<int>(mean)(rng) : 0;
    }
  }
  return Dataset(std::move(values), n, p, DataKind::count);
}

inline FrailtyParams frailty_truth(Index p) {
  if (p < 2) throw ConfigError("frailty truth needs p >= 2");
  FrailtyParams prm;
  prm.lambdas.resize(p);
  for (Index j = 0; j < p; ++j) prm.lambdas[j] = ((j + 1) % 2 == 0) ? 0.25 : -0.25;
  prm.xi = 0.25;
  prm.rho = 0.5;
  return prm;
}

inline double scaled_pair_weight(Index p) {
  if (p < 2) throw ConfigError("pair weight needs p >= 2");
  return 2.0 / (static_cast<double>(p) * static_cast<double>(p - 1));
}

}  // namespace csgd
