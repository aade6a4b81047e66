#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <algorithm>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace csgd {

enum class SchemeKind { standard, bernoulli, hypergeometric };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::standard: return "standard";
    case SchemeKind::bernoulli: return "bernoulli";
    case SchemeKind::hypergeometric: return "hyper";
  }
  return "?";
}

inline SchemeKind parse_scheme(const std::string& s) {
  if (s == "standard") return SchemeKind::standard;
  if (s == "bernoulli") return SchemeKind::bernoulli;
  if (s == "hyper" || s == "hypergeometric") return SchemeKind::hypergeometric;
  throw ConfigError("unknown scheme '" + s + "' (expected standard|bernoulli|hyper)");
}

struct SchemeSpec {
  SchemeKind kind = SchemeKind::standard;
  Index n = 1;  // observations
  Index K = 1;  // components per observation
  std::optional<Index> recycle_window;

  void validate() const {
    if (n < 1 || K < 1) throw ConfigError("scheme needs n >= 1 and K >= 1");
    if (recycle_window) {
      if (kind == SchemeKind::bernoulli)
        throw UnsupportedSchemeError("recycling is not defined for the bernoulli scheme");
      if (*recycle_window < 1 || *recycle_window > n)
        throw ConfigError("recycle window must satisfy 1 <= l <= n");
    }
  }

  std::string label() const {
    return recycle_window ? "recycle_" + to_string(kind) : to_string(kind);
  }
};

// gamma1 = P(w_ik = 1); gamma2 = E[w_ik w_jk], i != j; gamma3 = E[w_ik w_ih], k != h.
struct SchemeMoments {
  double gamma1 = 0, gamma2 = 0, gamma3 = 0;
};

inline SchemeMoments moments(const SchemeSpec& s) {
  s.validate();
  const double n = static_cast<double>(s.n), K = static_cast<double>(s.K);
  switch (s.kind) {
    case SchemeKind::standard:
      return {1.0 / n, 0.0, 1.0 / n};
    case SchemeKind::bernoulli:
      return {1.0 / n, 1.0 / (n * n), 1.0 / (n * n)};
    case SchemeKind::hypergeometric: {
      // two fixed distinct cells are both among the K drawn out of nK
      const double g = (n * K > 1.0) ? (K - 1.0) / (n * (n * K - 1.0)) : 0.0;
      return {1.0 / n, g, g};
    }
  }
  return {};
}

struct ComponentSelection {
  std::vector<ComponentIndex> pairs;
  Index iteration = 0;
};

namespace detail {

inline ComponentIndex cell_to_index(Index cell, Index K) { return {cell / K, cell % K}; }

template <class Rng>
void draw_standard(const SchemeSpec& s, Rng& rng, ComponentSelection& out) {
  const Index i = s.n == 1 ? 0 : uniform_index(rng, s.n);
  for (Index k = 0; k < s.K; ++k) out.pairs.push_back({i, k});
}

// Geometric skips between included cells, each cell independently with probability 1/n.
template <class Rng>
void draw_bernoulli(const SchemeSpec& s, Rng& rng, ComponentSelection& out) {
  const Index cells = s.n * s.K;
  if (s.n == 1) {
    for (Index c = 0; c < cells; ++c) out.pairs.push_back(cell_to_index(c, s.K));
    return;
  }
  const double log_q = std::log1p(-1.0 / static_cast<double>(s.n));
  Index c = -1;
  while (true) {
    const double gap = std::floor(std::log(uniform01_open_low(rng)) / log_q);
    if (gap >= static_cast<double>(cells)) break;
    c += 1 + static_cast<Index>(gap);
    if (c >= cells) break;
    out.pairs.push_back(cell_to_index(c, s.K));
  }
}

// Floyd's algorithm: K distinct cells out of nK, emitted in ascending cell order.
template <class Rng>
void draw_hyper(const SchemeSpec& s, Rng& rng, ComponentSelection& out) {
  const Index cells = s.n * s.K;
  std::vector<Index> chosen;
  chosen.reserve(s.K);
  for (Index j = cells - s.K; j < cells; ++j) {
    const Index t = uniform_index(rng, j + 1);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
      chosen.push_back(t);
    else
      chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  for (Index c : chosen) out.pairs.push_back(cell_to_index(c, s.K));
}

}  // namespace detail

template <class Rng>
void draw_into(const SchemeSpec& s, Rng& rng, ComponentSelection& out) {
  out.pairs.clear();
  switch (s.kind) {
    case SchemeKind::standard: detail::draw_standard(s, rng, out); break;
    case SchemeKind::bernoulli: detail::draw_bernoulli(s, rng, out); break;
    case SchemeKind::hypergeometric: detail::draw_hyper(s, rng, out); break;
  }
}

template <class Rng>
ComponentSelection draw(const SchemeSpec& s, Rng& rng) {
  s.validate();
  ComponentSelection out;
  out.pairs.reserve(s.K);
  draw_into(s, rng, out);
  return out;
}

// Persistent scramble for recycled windows. perm holds 0..n-1 (standard) or
// 0..nK-1 (hyper); the first l (resp. lK) entries are reshuffled at each refresh.
struct RecycleBuffer {
  std::vector<Index> perm;
  Index cursor = 0;
  bool primed = false;
};

template <class Rng>
void draw_recycled_into(const SchemeSpec& s, Rng& rng, RecycleBuffer& buf,
                        ComponentSelection& out) {
  if (s.kind == SchemeKind::bernoulli)
    throw UnsupportedSchemeError("recycling is not defined for the bernoulli scheme");
  if (!s.recycle_window) throw ConfigError("scheme has no recycle window");
  const Index l = *s.recycle_window;
  const bool per_obs = s.kind == SchemeKind::standard;
  const Index total = per_obs ? s.n : s.n * s.K;
  const Index block = per_obs ? 1 : s.K;
  if (!buf.primed || static_cast<Index>(buf.perm.size()) != total) {
    buf.perm.resize(total);
    std::iota(buf.perm.begin(), buf.perm.end(), Index{0});
    buf.primed = true;
    buf.cursor = l;
  }
  if (buf.cursor == l) {
    const Index m = std::min(l * block, total - 1);
    for (Index i = 0; i < m; ++i) std::swap(buf.perm[i], buf.perm[i + uniform_index(rng, total - i)]);
    buf.cursor = 0;
  }
  out.pairs.clear();
  const Index off = buf.cursor * block;
  if (per_obs) {
    for (Index k = 0; k < s.K; ++k) out.pairs.push_back({buf.perm[off], k});
  } else {
    for (Index b = 0; b < block; ++b) out.pairs.push_back(detail::cell_to_index(buf.perm[off + b], s.K));
  }
  ++buf.cursor;
}

template <class Rng>
ComponentSelection draw_recycled(const SchemeSpec& s, Rng& rng, RecycleBuffer& buf) {
  s.validate();
  ComponentSelection out;
  draw_recycled_into(s, rng, buf, out);
  return out;
}

}  // namespace csgd
