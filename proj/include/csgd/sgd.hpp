#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "types.hpp"

namespace csgd {

struct HoldoutRule {
  Index period = 1;
  double rel_tol = 1e-3;
};

struct OptimizerConfig {
  double eta0 = 1.0;
  double c_exponent = 0.501;
  Index burn_in = 0;
  Index max_iters = 1;
  std::optional<Index> record_every;
  std::optional<HoldoutRule> holdout_check;
  // Uniform component weight w_k in the objective (e.g. pairwise scaling).
  double objective_scale = 1.0;
  // Iterations at which the running average is stored, ascending, each > burn_in.
  std::vector<Index> snapshots;
  bool profile = false;

  void validate() const {
    if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("eta0 must be positive");
    if (!(c_exponent > 0.5 && c_exponent < 1.0)) throw ConfigError("c must lie in (1/2, 1)");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (burn_in < 0 || burn_in >= max_iters) throw ConfigError("need 0 <= burn_in < max_iters");
    if (record_every && *record_every < 1) throw ConfigError("record_every must be >= 1");
    if (holdout_check && (holdout_check->period < 1 || !(holdout_check->rel_tol >= 0.0)))
      throw ConfigError("invalid holdout rule");
    if (!(objective_scale > 0.0)) throw ConfigError("objective_scale must be positive");
    Index prev = burn_in;
    for (Index s : snapshots) {
      if (s <= prev || s > max_iters)
        throw ConfigError("snapshots must be ascending, after burn-in and within max_iters");
      prev = s;
    }
  }

  // T_n = round(passes * n), B = floor(burn_in_frac * n).
  static OptimizerConfig from_passes(Index n, double passes, double eta0 = 1.0,
                                     double burn_in_frac = 0.25, double c = 0.501) {
    OptimizerConfig cfg;
    cfg.eta0 = eta0;
    cfg.c_exponent = c;
    cfg.max_iters = static_cast<Index>(std::llround(passes * static_cast<double>(n)));
    cfg.burn_in = static_cast<Index>(std::floor(burn_in_frac * static_cast<double>(n)));
    return cfg;
  }
};

struct StepTimings {
  double sampling = 0, approximation = 0, update = 0;  // seconds
};

struct FitResult {
  ParamVector theta_bar;
  ParamVector theta_last;
  Index iterations_run = 0;
  SchemeSpec scheme;
  std::vector<std::pair<Index, ParamVector>> trajectory;
  std::vector<std::pair<Index, double>> holdout_curve;
  std::vector<std::pair<Index, ParamVector>> snapshots;
  bool stopped_early = false;
  StepTimings timings;
};

inline double stepsize(const OptimizerConfig& cfg, Index t) {
  return cfg.eta0 * std::pow(static_cast<double>(t), -cfg.c_exponent);
}

// S = -(1/gamma1) * scale * sum over selected cells of grad l_k(theta; y_i).
template <CompositeModel M>
ParamVector stochastic_gradient(const M& model, const ParamVector& theta, const Dataset& data,
                                const ComponentSelection& sel, double gamma1,
                                double scale = 1.0) {
  ParamVector s = ParamVector::Zero(model.dimension());
  std::vector<double> scratch;
  const double c = -scale / gamma1;
  for (const auto& idx : sel.pairs)
    add_sub_grad(model, theta, data.train_row(idx.observation), idx.component, c, s, scratch);
  return s;
}

inline bool holdout_stop_check(const std::vector<std::pair<Index, double>>& curve,
                               double rel_tol) {
  if (curve.size() < 2) return false;
  const double prev = curve[curve.size() - 2].second;
  const double last = curve.back().second;
  if (!std::isfinite(prev) || !std::isfinite(last)) return false;
  return (prev - last) / std::abs(prev) < rel_tol;
}

// Averaged stochastic gradient descent. Iteration t draws from the stream
// (seed, sgd, replication, t); recycled windows draw only when refreshing.
template <CompositeModel M>
FitResult fit(const M& model, const Dataset& data, const SchemeSpec& scheme,
              const OptimizerConfig& cfg, const ParamVector& theta0, std::uint64_t seed,
              std::uint32_t replication = 0) {
  cfg.validate();
  scheme.validate();
  detail::check_inputs(model, theta0, data);
  if (scheme.n != data.n_train() || scheme.K != model.num_components())
    throw ConfigError("scheme (n, K) does not match data and model");
  if (cfg.holdout_check && !data.has_holdout())
    throw ConfigError("holdout stopping requested but the dataset has no holdout rows");

  using clock = std::chrono::steady_clock;
  const Index d = model.dimension();
  const double n = static_cast<double>(scheme.n);
  const double gamma1 = moments(scheme).gamma1;
  const double grad_coef = -cfg.objective_scale / gamma1;

  FitResult res;
  res.scheme = scheme;
  ParamVector theta = theta0;
  ParamVector s(d);
  ParamVector sum = ParamVector::Zero(d);
  Index averaged = 0;
  ComponentSelection sel;
  sel.pairs.reserve(scheme.K * 2);
  RecycleBuffer buf;
  std::vector<double> scratch;
  std::size_t next_snapshot = 0;
  if (cfg.record_every) res.trajectory.emplace_back(0, theta);

  Index t = 1;
  for (; t <= cfg.max_iters; ++t) {
    auto t0 = cfg.profile ? clock::now() : clock::time_point{};
    Philox4x32 rng(seed, stream_domain::sgd, replication, static_cast<std::uint32_t>(t));
    if (scheme.recycle_window)
      draw_recycled_into(scheme, rng, buf, sel);
    else
      draw_into(scheme, rng, sel);
    auto t1 = cfg.profile ? clock::now() : clock::time_point{};

    s.setZero();
    for (const auto& idx : sel.pairs)
      add_sub_grad(model, theta, data.train_row(idx.observation), idx.component, grad_coef, s,
                   scratch);
    auto t2 = cfg.profile ? clock::now() : clock::time_point{};

    theta.noalias() -= (stepsize(cfg, t) / n) * s;
    if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > 1e8) {
      ParamVector last = theta + (stepsize(cfg, t) / n) * s;
      throw DivergenceError(t, last);
    }
    if (t > cfg.burn_in) {
      sum += theta;
      ++averaged;
    }
    if (cfg.profile) {
      auto t3 = clock::now();
      res.timings.sampling += std::chrono::duration<double>(t1 - t0).count();
      res.timings.approximation += std::chrono::duration<double>(t2 - t1).count();
      res.timings.update += std::chrono::duration<double>(t3 - t2).count();
    }
    if (cfg.record_every && t % *cfg.record_every == 0) res.trajectory.emplace_back(t, theta);
    if (next_snapshot < cfg.snapshots.size() && cfg.snapshots[next_snapshot] == t) {
      res.snapshots.emplace_back(t, sum / static_cast<double>(averaged));
      ++next_snapshot;
    }
    if (cfg.holdout_check && t % cfg.holdout_check->period == 0) {
      const ParamVector& at = averaged > 0 ? ParamVector(sum / static_cast<double>(averaged)) : theta;
      res.holdout_curve.emplace_back(t, holdout_neg_loglik(model, at, data));
      if (t > cfg.burn_in && holdout_stop_check(res.holdout_curve, cfg.holdout_check->rel_tol)) {
        res.stopped_early = t < cfg.max_iters;
        break;
      }
    }
  }
  res.iterations_run = std::min(t, cfg.max_iters);
  res.theta_last = theta;
  res.theta_bar = averaged > 0 ? ParamVector(sum / static_cast<double>(averaged)) : theta;
  return res;
}

}  // namespace csgd
