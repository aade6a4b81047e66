#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace csgd {

// A composite-likelihood model: K indexed components per observation, each a
// log-likelihood term l_k(theta; y) touching the parameters listed in support(k).
// sub_grad_values writes d l_k / d theta[support(k)[m]] into out[m].
template <class M>
concept CompositeModel = requires(const M& m, const ParamVector& theta, std::span<const int> y,
                                  Index k, std::span<double> out) {
  { m.dimension() } -> std::convertible_to<Index>;
  { m.num_components() } -> std::convertible_to<Index>;
  { m.num_variables() } -> std::convertible_to<Index>;
  { m.support(k) } -> std::convertible_to<std::span<const Index>>;
  { m.sub_loglik(theta, y, k) } -> std::convertible_to<double>;
  m.sub_grad_values(theta, y, k, out);
  { m.parameter_names() } -> std::convertible_to<std::vector<std::string>>;
};

namespace detail {

template <CompositeModel M>
void check_inputs(const M& model, const ParamVector& theta, const Dataset& data) {
  if (theta.size() != model.dimension())
    throw ConfigError("parameter vector has length " + std::to_string(theta.size()) +
                      ", model expects " + std::to_string(model.dimension()));
  if (!theta.allFinite()) throw NumericDomainError("parameter vector has non-finite entries");
  if (data.cols() != model.num_variables())
    throw ConfigError("dataset has " + std::to_string(data.cols()) + " columns, model expects " +
                      std::to_string(model.num_variables()));
}

template <CompositeModel M>
void check_index(const M& model, const Dataset& data, ComponentIndex idx) {
  if (idx.observation < 0 || idx.observation >= data.n_train())
    throw IndexError("observation index " + std::to_string(idx.observation) + " out of range");
  if (idx.component < 0 || idx.component >= model.num_components())
    throw IndexError("component index " + std::to_string(idx.component) + " out of range");
}

inline void check_weights(std::span<const double> w, Index K) {
  if (!w.empty() && static_cast<Index>(w.size()) != K)
    throw ConfigError("weight vector length differs from K");
}

}  // namespace detail

// Adds scale * grad l_k(theta; y) into out. scratch must hold support(k).size() doubles.
template <CompositeModel M>
void add_sub_grad(const M& model, const ParamVector& theta, std::span<const int> y, Index k,
                  double scale, ParamVector& out, std::vector<double>& scratch) {
  const auto sup = model.support(k);
  scratch.resize(sup.size());
  model.sub_grad_values(theta, y, k, std::span<double>(scratch));
  for (std::size_t m = 0; m < sup.size(); ++m) out[sup[m]] += scale * scratch[m];
}

template <CompositeModel M>
double sub_loglik(const M& model, const ParamVector& theta, const Dataset& data,
                  ComponentIndex idx) {
  detail::check_inputs(model, theta, data);
  detail::check_index(model, data, idx);
  const double v = model.sub_loglik(theta, data.train_row(idx.observation), idx.component);
  if (!std::isfinite(v))
    throw NumericDomainError("component " + std::to_string(idx.component) + " of observation " +
                             std::to_string(idx.observation) + " is not finite");
  return v;
}

template <CompositeModel M>
ParamVector sub_grad(const M& model, const ParamVector& theta, const Dataset& data,
                     ComponentIndex idx) {
  detail::check_inputs(model, theta, data);
  detail::check_index(model, data, idx);
  ParamVector g = ParamVector::Zero(model.dimension());
  std::vector<double> scratch;
  add_sub_grad(model, theta, data.train_row(idx.observation), idx.component, 1.0, g, scratch);
  if (!g.allFinite())
    throw NumericDomainError("gradient of component " + std::to_string(idx.component) +
                             " of observation " + std::to_string(idx.observation) +
                             " is not finite");
  return g;
}

// Sum over training rows and components of w_k l_k. Accumulated in long double.
template <CompositeModel M>
double full_loglik(const M& model, const ParamVector& theta, const Dataset& data,
                   std::span<const double> weights = {}) {
  detail::check_inputs(model, theta, data);
  detail::check_weights(weights, model.num_components());
  long double total = 0.0L;
  for (Index i = 0; i < data.n_train(); ++i) {
    const auto y = data.train_row(i);
    for (Index k = 0; k < model.num_components(); ++k) {
      const double v = model.sub_loglik(theta, y, k);
      if (!std::isfinite(v))
        throw NumericDomainError("component " + std::to_string(k) + " of observation " +
                                 std::to_string(i) + " is not finite");
      total += static_cast<long double>(weights.empty() ? v : weights[k] * v);
    }
  }
  return static_cast<double>(total);
}

template <CompositeModel M>
ParamVector full_grad(const M& model, const ParamVector& theta, const Dataset& data,
                      std::span<const double> weights = {}) {
  detail::check_inputs(model, theta, data);
  detail::check_weights(weights, model.num_components());
  ParamVector g = ParamVector::Zero(model.dimension());
  std::vector<double> scratch;
  for (Index i = 0; i < data.n_train(); ++i) {
    const auto y = data.train_row(i);
    for (Index k = 0; k < model.num_components(); ++k)
      add_sub_grad(model, theta, y, k, weights.empty() ? 1.0 : weights[k], g, scratch);
  }
  if (!g.allFinite()) throw NumericDomainError("full gradient is not finite");
  return g;
}

// Mean over holdout rows of the negative unit-weight composite log-likelihood.
template <CompositeModel M>
double holdout_neg_loglik(const M& model, const ParamVector& theta, const Dataset& data) {
  if (!data.has_holdout()) throw ConfigError("dataset has no holdout rows");
  long double total = 0.0L;
  for (Index r : data.holdout_rows()) {
    const auto y = data.row(r);
    for (Index k = 0; k < model.num_components(); ++k) total += model.sub_loglik(theta, y, k);
  }
  return static_cast<double>(-total / static_cast<long double>(data.n_holdout()));
}

}  // namespace csgd
