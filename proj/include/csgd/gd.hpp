#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "types.hpp"

namespace csgd {

struct GDConfig {
  double step = 1.0;  // applied to the per-observation mean gradient
  bool backtracking = true;
  double grow = 2.0;  // step multiplier tried after each accepted step (backtracking only)
  // Trial step from the Barzilai-Borwein ratio of the last move when the objective
  // is locally concave along it; otherwise the grow rule applies.
  bool bb_steps = true;
  double grad_tol = 1e-8;
  Index max_iters = 100000;
  double objective_scale = 1.0;

  void validate() const {
    if (!(step > 0.0)) throw ConfigError("GD step must be positive");
    if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
    if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
    if (!(grow >= 1.0)) throw ConfigError("grow must be >= 1");
    if (!(objective_scale > 0.0)) throw ConfigError("objective_scale must be positive");
  }
};

struct GDResult {
  ParamVector theta;
  Index iterations = 0;
  double final_grad_norm = 0;  // max-norm of the full gradient divided by n
  bool converged = false;
  std::vector<double> objective_trace;
};

// Full-gradient ascent on the composite log-likelihood. With backtracking the step
// is halved until the objective does not decrease beyond rounding.
template <CompositeModel M>
GDResult gd_fit(const M& model, const Dataset& data, const GDConfig& cfg, const ParamVector& theta0) {
  cfg.validate();
  detail::check_inputs(model, theta0, data);
  const double n = static_cast<double>(data.n_train());
  const std::vector<double> w(model.num_components(), cfg.objective_scale);
  const std::span<const double> ws(w);

  GDResult res;
  ParamVector theta = theta0;
  double obj = full_loglik(model, theta, data, ws);
  ParamVector g = full_grad(model, theta, data, ws) / n;
  res.objective_trace.push_back(obj);
  double eta = cfg.step;
  Index t = 0;
  while (true) {
    res.final_grad_norm = g.cwiseAbs().maxCoeff();
    if (res.final_grad_norm < cfg.grad_tol) {
      res.converged = true;
      break;
    }
    if (t >= cfg.max_iters) break;
    ++t;
    ParamVector cand = theta + eta * g;
    double cand_obj = -INFINITY;
    ParamVector cand_g;
    if (cfg.backtracking) {
      while (true) {
        try {
          cand_obj = full_loglik(model, cand, data, ws);
        } catch (const NumericDomainError&) {
          cand_obj = -INFINITY;
        }
        const double resolution = 1e-13 * std::max(1.0, std::abs(obj));
        if (cand_obj > obj + resolution) break;
        // Within rounding of the current value the objective cannot rank the step,
        // so it is accepted only while the slope along g is still non-negative.
        if (cand_obj >= obj - resolution) {
          cand_g = full_grad(model, cand, data, ws) / n;
          if (cand_g.dot(g) >= 0.0) break;
          cand_g.resize(0);
        }
        eta *= 0.5;
        if (eta < 1e-300) throw NumericDomainError("GD line search could not find an ascent step");
        cand = theta + eta * g;
      }
    } else {
      cand_obj = full_loglik(model, cand, data, ws);
    }
    ParamVector g_new = cand_g.size() ? std::move(cand_g) : ParamVector(full_grad(model, cand, data, ws) / n);
    if (cfg.backtracking) {
      const ParamVector step = cand - theta;
      const double sy = step.dot(g_new - g);
      if (cfg.bb_steps && sy < 0.0)
        eta = std::clamp(step.squaredNorm() / -sy, 1e-12, 1e12);
      else
        eta *= cfg.grow;
    }
    theta = std::move(cand);
    g = std::move(g_new);
    obj = cand_obj;
    res.objective_trace.push_back(obj);
  }
  res.theta = theta;
  res.iterations = t;
  return res;
}

}  // namespace csgd
