#pragma once

#include <algorithm>
#include <bit>
#include <numeric>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "numeric.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace csgd {

inline constexpr Index kMaxEnumerationNodes = 25;

inline Index ising_dimension(Index p) { return p + p * (p - 1) / 2; }

// Flat position of edge (j, k), j != k, 0-based nodes.
inline Index ising_edge_index(Index p, Index j, Index k) {
  if (j > k) std::swap(j, k);
  return p + j * p - j * (j + 1) / 2 + (k - j - 1);
}

struct IsingParams {
  Eigen::VectorXd intercepts;
  Eigen::MatrixXd edges;  // symmetric, zero diagonal

  Index p() const { return intercepts.size(); }

  static IsingParams zeros(Index p) {
    return {Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
  }

  static IsingParams from_flat(Index p, const ParamVector& flat) {
    if (flat.size() != ising_dimension(p)) throw ConfigError("flat Ising vector has wrong length");
    IsingParams out = zeros(p);
    out.intercepts = flat.head(p);
    for (Index j = 0; j < p; ++j)
      for (Index k = j + 1; k < p; ++k)
        out.edges(j, k) = out.edges(k, j) = flat[ising_edge_index(p, j, k)];
    return out;
  }

  ParamVector flat() const {
    const Index q = p();
    ParamVector out(ising_dimension(q));
    out.head(q) = intercepts;
    for (Index j = 0; j < q; ++j)
      for (Index k = j + 1; k < q; ++k) out[ising_edge_index(q, j, k)] = edges(j, k);
    return out;
  }

  void validate() const {
    const Index q = p();
    if (edges.rows() != q || edges.cols() != q) throw ConfigError("edge matrix must be p x p");
    for (Index j = 0; j < q; ++j) {
      if (edges(j, j) != 0.0) throw ConfigError("edge matrix must have zero diagonal");
      for (Index k = j + 1; k < q; ++k)
        if (edges(j, k) != edges(k, j)) throw ConfigError("edge matrix must be symmetric");
    }
  }
};

inline std::vector<std::string> ising_parameter_names(Index p) {
  std::vector<std::string> names;
  names.reserve(ising_dimension(p));
  for (Index j = 0; j < p; ++j) names.push_back("b" + std::to_string(j + 1) + "_0");
  for (Index j = 0; j < p; ++j)
    for (Index k = j + 1; k < p; ++k)
      names.push_back("b" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
  return names;
}

// Node-wise conditional (pseudo) likelihood: component j is the logistic model of
// y_j given the other nodes. Support of j: intercept j, then edges (j, k) for k != j ascending.
class IsingModel {
 public:
  explicit IsingModel(Index p) : p_(p) {
    if (p < 2) throw ConfigError("Ising model needs p >= 2");
    support_.resize(p * p);
    for (Index j = 0; j < p; ++j) {
      Index* s = support_.data() + j * p;
      s[0] = j;
      Index m = 1;
      for (Index k = 0; k < p; ++k)
        if (k != j) s[m++] = ising_edge_index(p, j, k);
    }
  }

  Index dimension() const noexcept { return ising_dimension(p_); }
  Index num_components() const noexcept { return p_; }
  Index num_variables() const noexcept { return p_; }
  std::vector<std::string> parameter_names() const { return ising_parameter_names(p_); }

  std::span<const Index> support(Index j) const noexcept {
    return {support_.data() + j * p_, static_cast<std::size_t>(p_)};
  }

  double linear_predictor(const ParamVector& theta, std::span<const int> y, Index j) const noexcept {
    const Index* s = support_.data() + j * p_;
    double eta = theta[s[0]];
    Index m = 1;
    for (Index k = 0; k < p_; ++k) {
      if (k == j) continue;
      if (y[k]) eta += theta[s[m]];
      ++m;
    }
    return eta;
  }

  double sub_loglik(const ParamVector& theta, std::span<const int> y, Index j) const noexcept {
    const double eta = linear_predictor(theta, y, j);
    return (y[j] ? eta : 0.0) - softplus(eta);
  }

  void sub_grad_values(const ParamVector& theta, std::span<const int> y, Index j,
                       std::span<double> out) const noexcept {
    const double r = static_cast<double>(y[j]) - logistic(linear_predictor(theta, y, j));
    out[0] = r;
    Index m = 1;
    for (Index k = 0; k < p_; ++k) {
      if (k == j) continue;
      out[m++] = y[k] ? r : 0.0;
    }
  }

 private:
  Index p_;
  std::vector<Index> support_;
};

inline double conditional_loglik(const IsingParams& prm, std::span<const int> y, Index j) {
  return IsingModel(prm.p()).sub_loglik(prm.flat(), y, j);
}

// Dense gradient with respect to the flat parameter layout.
inline ParamVector conditional_grad(const IsingParams& prm, std::span<const int> y, Index j) {
  IsingModel m(prm.p());
  ParamVector g = ParamVector::Zero(m.dimension());
  std::vector<double> v(prm.p());
  m.sub_grad_values(prm.flat(), y, j, v);
  const auto sup = m.support(j);
  for (std::size_t a = 0; a < sup.size(); ++a) g[sup[a]] = v[a];
  return g;
}

inline double ising_energy(const IsingParams& prm, std::uint64_t state) {
  double e = 0.0;
  const Index p = prm.p();
  for (Index j = 0; j < p; ++j) {
    if (!((state >> j) & 1u)) continue;
    e += prm.intercepts[j];
    for (Index k = j + 1; k < p; ++k)
      if ((state >> k) & 1u) e += prm.edges(j, k);
  }
  return e;
}

// Unnormalized log-weights of all 2^p states (bit j of the index is node j),
// filled by Gray-code enumeration with O(p) work per state.
inline std::vector<double> ising_log_weights(const IsingParams& prm) {
  const Index p = prm.p();
  if (p > kMaxEnumerationNodes)
    throw CapabilityError("exact enumeration supports at most 25 nodes, got " + std::to_string(p));
  const std::uint64_t total = std::uint64_t{1} << p;
  std::vector<double> lw(total);
  std::vector<double> field(prm.intercepts.data(), prm.intercepts.data() + p);
  std::uint64_t state = 0;
  double e = 0.0;
  lw[0] = 0.0;
  for (std::uint64_t g = 1; g < total; ++g) {
    const int j = std::countr_zero(g);
    const bool on = !((state >> j) & 1u);
    state ^= std::uint64_t{1} << j;
    const double sign = on ? 1.0 : -1.0;
    e += sign * field[j];
    for (Index k = 0; k < p; ++k)
      if (k != j) field[k] += sign * prm.edges(j, k);
    lw[state] = e;
  }
  return lw;
}

inline double log_partition(const IsingParams& prm) {
  prm.validate();
  if (prm.p() > kMaxEnumerationNodes)
    throw CapabilityError("exact enumeration supports at most 25 nodes, got " + std::to_string(prm.p()));
  if (prm.p() == 0) return 0.0;
  StreamingLogSumExp acc;
  for (double v : ising_log_weights(prm)) acc.add(v);
  return acc.value();
}

// Normalized probabilities of all states, index = bitmask.
inline std::vector<double> ising_pmf(const IsingParams& prm) {
  prm.validate();
  auto lw = ising_log_weights(prm);
  StreamingLogSumExp acc;
  for (double v : lw) acc.add(v);
  const double lz = acc.value();
  for (double& v : lw) v = std::exp(v - lz);
  return lw;
}

namespace detail {

// Connected components of the nonzero-edge graph, each sorted ascending.
inline std::vector<std::vector<Index>> edge_components(const IsingParams& prm) {
  const Index p = prm.p();
  std::vector<Index> label(p, -1);
  std::vector<std::vector<Index>> comps;
  for (Index s = 0; s < p; ++s) {
    if (label[s] >= 0) continue;
    std::vector<Index> stack{s}, members;
    label[s] = static_cast<Index>(comps.size());
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      members.push_back(u);
      for (Index v = 0; v < p; ++v)
        if (v != u && label[v] < 0 && prm.edges(u, v) != 0.0) {
          label[v] = label[s];
          stack.push_back(v);
        }
    }
    std::sort(members.begin(), members.end());
    comps.push_back(std::move(members));
  }
  return comps;
}

}  // namespace detail

// n exact draws by inverse-CDF over the enumerated table. When p exceeds the
// enumeration cap but the edge graph splits into blocks of at most 25 nodes,
// blocks are independent and sampled separately.
template <class Rng>
Dataset exact_sample(const IsingParams& prm, Index n, Rng& rng) {
  prm.validate();
  const Index p = prm.p();
  if (n < 1) throw ConfigError("sample size must be >= 1");
  std::vector<std::vector<Index>> blocks;
  if (p <= kMaxEnumerationNodes) {
    blocks.emplace_back(p);
    std::iota(blocks[0].begin(), blocks[0].end(), Index{0});
  } else {
    blocks = detail::edge_components(prm);
    for (const auto& b : blocks)
      if (static_cast<Index>(b.size()) > kMaxEnumerationNodes)
        throw CapabilityError("exact sampling needs connected blocks of at most 25 nodes");
  }
  std::vector<std::vector<double>> cdfs;
  for (const auto& b : blocks) {
    const Index q = static_cast<Index>(b.size());
    IsingParams sub = IsingParams::zeros(q);
    for (Index a = 0; a < q; ++a) {
      sub.intercepts[a] = prm.intercepts[b[a]];
      for (Index c = 0; c < q; ++c) sub.edges(a, c) = prm.edges(b[a], b[c]);
    }
    auto pmf = ising_pmf(sub);
    std::partial_sum(pmf.begin(), pmf.end(), pmf.begin());
    cdfs.push_back(std::move(pmf));
  }
  std::vector<int> values(static_cast<std::size_t>(n * p), 0);
  for (Index i = 0; i < n; ++i) {
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& cdf = cdfs[bi];
      const double u = uniform01(rng) * cdf.back();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      const auto state = static_cast<std::uint64_t>(it - cdf.begin());
      for (std::size_t a = 0; a < blocks[bi].size(); ++a)
        values[i * p + blocks[bi][a]] = static_cast<int>((state >> a) & 1u);
    }
  }
  return Dataset(std::move(values), n, p, DataKind::binary);
}

// Two-row grid, column-major numbering: column c holds nodes 2c (top) and 2c+1
// (bottom), 0-based. Vertical edges -0.5, horizontal edges 0.5, intercepts -0.5
// on odd 1-based nodes and 0.5 on even ones.
inline IsingParams grid_truth(Index p) {
  if (p < 2 || p % 2 != 0) throw ConfigError("grid truth needs an even p >= 2");
  IsingParams prm = IsingParams::zeros(p);
  for (Index j = 0; j < p; ++j) prm.intercepts[j] = (j % 2 == 0) ? -0.5 : 0.5;
  for (Index c = 0; c < p / 2; ++c) {
    const Index top = 2 * c, bottom = 2 * c + 1;
    prm.edges(top, bottom) = prm.edges(bottom, top) = -0.5;
    if (c + 1 < p / 2) {
      prm.edges(top, top + 2) = prm.edges(top + 2, top) = 0.5;
      prm.edges(bottom, bottom + 2) = prm.edges(bottom + 2, bottom) = 0.5;
    }
  }
  return prm;
}

}  // namespace csgd
