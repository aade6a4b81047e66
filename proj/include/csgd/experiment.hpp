#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "frailty.hpp"
#include "gd.hpp"
#include "inference.hpp"
#include "ising.hpp"
#include "sampling.hpp"
#include "sgd.hpp"

namespace csgd {

enum class ModelKind { ising, frailty };

inline std::string to_string(ModelKind m) { return m == ModelKind::ising ? "ising" : "frailty"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "ising") return ModelKind::ising;
  if (s == "frailty") return ModelKind::frailty;
  throw ConfigError("unknown model '" + s + "'");
}

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(a ^ mix_seed(b)); }

// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware).
// Results must be stored by index; the first exception is rethrown.
inline void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, std::max<Index>(count, 1)));
  if (threads <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// A scheme as named in plans: standard | bernoulli | hyper | recycle_standard | recycle_hyper.
struct SchemeVariant {
  SchemeKind kind = SchemeKind::standard;
  bool recycle = false;

  std::string label() const { return (recycle ? "recycle_" : "") + to_string(kind); }

  static SchemeVariant parse(const std::string& s) {
    if (s.rfind("recycle_", 0) == 0) {
      SchemeVariant v{parse_scheme(s.substr(8)), true};
      if (v.kind == SchemeKind::bernoulli)
        throw UnsupportedSchemeError("recycling is not defined for the bernoulli scheme");
      return v;
    }
    return {parse_scheme(s), false};
  }
};

struct ExperimentPlan {
  ModelKind model = ModelKind::ising;
  std::vector<Index> n_list{2500};
  std::vector<Index> p_list{10};
  std::vector<SchemeVariant> schemes{{SchemeKind::standard, false},
                                     {SchemeKind::bernoulli, false},
                                     {SchemeKind::hypergeometric, false}};
  std::vector<double> eta0_grid{1.0};
  std::vector<double> checkpoints{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};  // in passes, T_n = round(x n)
  Index replications = 50;
  double level = 0.95;
  std::uint64_t base_seed = 1;
  double c_exponent = 0.501;
  double burn_in_frac = 0.25;
  Index recycle = 0;  // window length for recycle_* schemes
  bool include_gd = true;
  std::vector<Regime> regimes{Regime::R1, Regime::R2, Regime::R3};
  unsigned threads = 0;

  void validate() const {
    if (n_list.empty() || p_list.empty() || schemes.empty() || eta0_grid.empty() || checkpoints.empty())
      throw ConfigError("plan lists must be non-empty");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
        std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end())
      throw ConfigError("checkpoints must be strictly ascending");
    if (!(checkpoints.front() > burn_in_frac)) throw ConfigError("checkpoints must come after burn-in");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
    for (double e : eta0_grid)
      if (!(e > 0.0)) throw ConfigError("eta0 values must be positive");
    for (Index n : n_list)
      if (n < 2) throw ConfigError("n must be >= 2");
    for (const auto& s : schemes)
      if (s.recycle) {
        if (recycle < 1) throw ConfigError("recycle_* schemes need a recycle window");
        for (Index n : n_list)
          if (recycle > n) throw ConfigError("recycle window exceeds n");
      }
    if (model == ModelKind::ising)
      for (Index p : p_list)
        if (p % 2 != 0 || p < 2 || p > kMaxEnumerationNodes)
          throw ConfigError("Ising plans need an even p in [2, 25]");
  }

  SchemeSpec scheme_spec(const SchemeVariant& v, Index n, Index K) const {
    SchemeSpec s{v.kind, n, K, {}};
    if (v.recycle) s.recycle_window = recycle;
    return s;
  }
};

// Model-specific pieces used by the harness.
template <class M>
struct ModelTraits;

template <>
struct ModelTraits<IsingModel> {
  static IsingModel make(Index p) { return IsingModel(p); }
  static ParamVector truth(Index p) { return grid_truth(p).flat(); }
  template <class Rng>
  static Dataset simulate(Index p, Index n, Rng& rng) {
    return exact_sample(grid_truth(p), n, rng);
  }
  static double objective_scale(Index) { return 1.0; }
};

template <>
struct ModelTraits<FrailtyModel> {
  static FrailtyModel make(Index p) { return FrailtyModel(p); }
  static ParamVector truth(Index p) { return frailty_truth(p).to_unconstrained(); }
  template <class Rng>
  static Dataset simulate(Index p, Index n, Rng& rng) {
    return simulate_frailty(frailty_truth(p), n, rng);
  }
  static double objective_scale(Index p) { return scaled_pair_weight(p); }
};

// One (setting, scheme, eta0, replication, checkpoint) outcome.
struct ExperimentRecord {
  Index n = 0, p = 0;
  std::string scheme;  // "numerical" for the GD baseline
  double eta0 = 0;
  Index replication = 0;
  double checkpoint = 0;
  Index T_n = 0;
  bool diverged = false;
  ParamVector estimate;
  // covered[r][j]: CI of parameter j under plan.regimes[r] covers the truth
  std::vector<std::vector<std::uint8_t>> covered;
  double holdout = NAN;
};

struct ExperimentResult {
  ExperimentPlan plan;
  std::vector<ExperimentRecord> records;
  std::vector<StepTimings> timings;  // per SGD run, not part of the CSV contract
};

inline Index checkpoint_iterations(double x, Index n) {
  return static_cast<Index>(std::llround(x * static_cast<double>(n)));
}

namespace detail {

inline std::uint32_t setting_tag(Index n, Index p) {
  return static_cast<std::uint32_t>(mix_seed(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(p)));
}

template <class M>
void run_replication(const ExperimentPlan& plan, Index n, Index p, Index rep, bool coverage,
                     std::vector<ExperimentRecord>& out, std::vector<StepTimings>& timings) {
  using T = ModelTraits<M>;
  const M model = T::make(p);
  const ParamVector truth = T::truth(p);
  const Index d = model.dimension();
  Philox4x32 data_rng(plan.base_seed, stream_domain::data, static_cast<std::uint32_t>(rep), setting_tag(n, p));
  const Dataset data = T::simulate(p, n, data_rng);
  const double scale = T::objective_scale(p);
  const ParamVector theta0 = ParamVector::Zero(d);

  auto covered_flags = [&](const ParamVector& est, const Matrix& H, const Matrix& J,
                           const SchemeSpec* scheme, Index T_n) {
    std::vector<std::vector<std::uint8_t>> cov_flags;
    if (!coverage) return cov_flags;
    const double z = normal_quantile(1.0 - (1.0 - plan.level) / 2.0);
    for (Regime r : plan.regimes) {
      std::vector<std::uint8_t> f(d, 0);
      Matrix V = scheme ? v_p(moments(*scheme), H, J, n) : Matrix::Zero(d, d);
      const Regime eff = scheme ? r : Regime::R1;
      Matrix C;
      try {
        C = cov_theta_bar(H, J, V, eff, std::max<Index>(T_n, 1), n);
      } catch (const ConditioningError&) {
        cov_flags.push_back(f);
        continue;
      }
      for (Index j = 0; j < d; ++j)
        f[j] = std::abs(est[j] - truth[j]) <= z * std::sqrt(std::max(C(j, j), 0.0)) ? 1 : 0;
      cov_flags.push_back(std::move(f));
    }
    return cov_flags;
  };

  if (plan.include_gd) {
    GDConfig g;
    g.objective_scale = scale;
    const GDResult gr = gd_fit(model, data, g, theta0);
    Matrix H, J;
    if (coverage) {
      H = estimate_H(model, gr.theta, data);
      J = estimate_J(model, gr.theta, data);
    }
    auto flags = covered_flags(gr.theta, H, J, nullptr, 1);
    for (double x : plan.checkpoints) {
      ExperimentRecord rec{n, p, "numerical", 0.0, rep, x, checkpoint_iterations(x, n), !gr.converged,
                           gr.theta, flags, NAN};
      out.push_back(std::move(rec));
    }
  }

  for (std::size_t si = 0; si < plan.schemes.size(); ++si) {
    const SchemeSpec scheme = plan.scheme_spec(plan.schemes[si], n, model.num_components());
    for (std::size_t ei = 0; ei < plan.eta0_grid.size(); ++ei) {
      OptimizerConfig cfg;
      cfg.eta0 = plan.eta0_grid[ei];
      cfg.c_exponent = plan.c_exponent;
      cfg.burn_in = static_cast<Index>(std::floor(plan.burn_in_frac * static_cast<double>(n)));
      cfg.objective_scale = scale;
      for (double x : plan.checkpoints) cfg.snapshots.push_back(checkpoint_iterations(x, n));
      cfg.max_iters = cfg.snapshots.back();
      cfg.profile = true;
      const std::uint64_t seed = mix_seed(mix_seed(plan.base_seed, setting_tag(n, p)), si * 1000 + ei);
      std::optional<FitResult> fr;
      try {
        fr = fit(model, data, scheme, cfg, theta0, seed, static_cast<std::uint32_t>(rep));
      } catch (const DivergenceError&) {
      } catch (const NumericDomainError&) {
      }
      if (fr) timings.push_back(fr->timings);
      for (std::size_t ci = 0; ci < plan.checkpoints.size(); ++ci) {
        ExperimentRecord rec;
        rec.n = n;
        rec.p = p;
        rec.scheme = plan.schemes[si].label();
        rec.eta0 = cfg.eta0;
        rec.replication = rep;
        rec.checkpoint = plan.checkpoints[ci];
        rec.T_n = cfg.snapshots[ci];
        rec.diverged = !fr;
        if (fr) {
          rec.estimate = fr->snapshots[ci].second;
          if (coverage) {
            const Matrix H = estimate_H(model, rec.estimate, data);
            const Matrix J = estimate_J(model, rec.estimate, data);
            rec.covered = covered_flags(rec.estimate, H, J, &scheme, rec.T_n);
          }
        }
        out.push_back(std::move(rec));
      }
    }
  }
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentPlan& plan, bool coverage) {
  plan.validate();
  struct Job {
    Index n, p, rep;
  };
  std::vector<Job> jobs;
  for (Index n : plan.n_list)
    for (Index p : plan.p_list)
      for (Index r = 0; r < plan.replications; ++r) jobs.push_back({n, p, r});
  std::vector<std::vector<ExperimentRecord>> per_job(jobs.size());
  std::vector<std::vector<StepTimings>> per_job_t(jobs.size());
  parallel_for(static_cast<Index>(jobs.size()), plan.threads, [&](Index i) {
    const Job& j = jobs[i];
    if (plan.model == ModelKind::ising)
      detail::run_replication<IsingModel>(plan, j.n, j.p, j.rep, coverage, per_job[i], per_job_t[i]);
    else
      detail::run_replication<FrailtyModel>(plan, j.n, j.p, j.rep, coverage, per_job[i], per_job_t[i]);
  });
  ExperimentResult res;
  res.plan = plan;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (auto& r : per_job[i]) res.records.push_back(std::move(r));
    for (auto& t : per_job_t[i]) res.timings.push_back(t);
  }
  return res;
}

// (1/(dR)) sum_r ||est_r - truth||^2
inline double mean_squared_error(const std::vector<ParamVector>& est, const ParamVector& truth) {
  if (est.empty()) return NAN;
  long double s = 0.0L;
  for (const auto& e : est) s += (e - truth).squaredNorm();
  return static_cast<double>(s / (static_cast<long double>(est.size()) * truth.size()));
}

// Trace of the across-replication sample covariance.
inline double variance_trace(const std::vector<ParamVector>& est) {
  if (est.size() < 2) return NAN;
  ParamVector mean = ParamVector::Zero(est.front().size());
  for (const auto& e : est) mean += e;
  mean /= static_cast<double>(est.size());
  double s = 0.0;
  for (const auto& e : est) s += (e - mean).squaredNorm();
  return s / static_cast<double>(est.size() - 1);
}

struct MseRow {
  Index n, p, d;
  std::string scheme;
  double eta0, checkpoint;
  Index T_n;
  double mse, var_trace;
  Index n_ok, n_diverged;
};

struct CoverageRow {
  Index n, p;
  std::string scheme;
  double eta0, checkpoint;
  Index T_n;
  Regime regime;
  Index param_index;
  std::string name;
  double coverage;
  Index n_ok, n_diverged;
};

namespace detail {

// Groups records by (n, p, scheme, eta0, checkpoint), preserving first-seen order.
template <class F>
void for_each_group(const ExperimentResult& res, F&& f) {
  std::vector<bool> done(res.records.size(), false);
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    if (done[i]) continue;
    const auto& a = res.records[i];
    std::vector<const ExperimentRecord*> grp;
    for (std::size_t k = i; k < res.records.size(); ++k) {
      const auto& b = res.records[k];
      if (!done[k] && b.n == a.n && b.p == a.p && b.scheme == a.scheme && b.eta0 == a.eta0 &&
          b.checkpoint == a.checkpoint) {
        grp.push_back(&b);
        done[k] = true;
      }
    }
    f(grp);
  }
}

inline ParamVector plan_truth(ModelKind m, Index p) {
  return m == ModelKind::ising ? ModelTraits<IsingModel>::truth(p) : ModelTraits<FrailtyModel>::truth(p);
}

inline std::vector<std::string> plan_names(ModelKind m, Index p) {
  return m == ModelKind::ising ? ising_parameter_names(p) : frailty_parameter_names(p);
}

}  // namespace detail

inline std::vector<MseRow> summarize_mse(const ExperimentResult& res) {
  std::vector<MseRow> rows;
  detail::for_each_group(res, [&](const std::vector<const ExperimentRecord*>& g) {
    const auto& a = *g.front();
    const ParamVector truth = detail::plan_truth(res.plan.model, a.p);
    std::vector<ParamVector> est;
    Index div = 0;
    for (auto* r : g) {
      if (r->diverged)
        ++div;
      else
        est.push_back(r->estimate);
    }
    rows.push_back({a.n, a.p, truth.size(), a.scheme, a.eta0, a.checkpoint, a.T_n,
                    mean_squared_error(est, truth), variance_trace(est),
                    static_cast<Index>(est.size()), div});
  });
  return rows;
}

inline std::vector<CoverageRow> summarize_coverage(const ExperimentResult& res) {
  std::vector<CoverageRow> rows;
  detail::for_each_group(res, [&](const std::vector<const ExperimentRecord*>& g) {
    const auto& a = *g.front();
    const auto names = detail::plan_names(res.plan.model, a.p);
    const Index d = static_cast<Index>(names.size());
    const bool gd = a.scheme == "numerical";
    for (std::size_t ri = 0; ri < res.plan.regimes.size(); ++ri) {
      const Regime regime = gd ? Regime::R1 : res.plan.regimes[ri];
      if (gd && ri > 0) break;
      for (Index j = 0; j < d; ++j) {
        Index ok = 0, hit = 0, div = 0;
        for (auto* r : g) {
          if (r->diverged || r->covered.empty()) {
            ++div;
            continue;
          }
          ++ok;
          hit += r->covered[ri][j];
        }
        rows.push_back({a.n, a.p, a.scheme, a.eta0, a.checkpoint, a.T_n, regime, j, names[j],
                        ok ? static_cast<double>(hit) / static_cast<double>(ok) : NAN, ok, div});
      }
    }
  });
  return rows;
}

inline void write_mse_csv(std::ostream& out, const ExperimentResult& res) {
  out << "model,n,p,d,scheme,eta0,checkpoint,T_n,mse,var_trace,n_ok,n_diverged\n";
  for (const auto& r : summarize_mse(res))
    out << to_string(res.plan.model) << ',' << r.n << ',' << r.p << ',' << r.d << ',' << r.scheme << ','
        << format_double(r.eta0) << ',' << format_double(r.checkpoint) << ',' << r.T_n << ','
        << format_double(r.mse) << ',' << format_double(r.var_trace) << ',' << r.n_ok << ','
        << r.n_diverged << '\n';
}

inline void write_coverage_csv(std::ostream& out, const ExperimentResult& res) {
  out << "model,n,p,scheme,eta0,checkpoint,T_n,regime,param_index,name,coverage,n_ok,n_diverged\n";
  for (const auto& r : summarize_coverage(res))
    out << to_string(res.plan.model) << ',' << r.n << ',' << r.p << ',' << r.scheme << ','
        << format_double(r.eta0) << ',' << format_double(r.checkpoint) << ',' << r.T_n << ','
        << to_string(r.regime) << ',' << r.param_index << ',' << r.name << ','
        << format_double(r.coverage) << ',' << r.n_ok << ',' << r.n_diverged << '\n';
}

// One line per (setting, scheme, eta0, replication, checkpoint).
inline void write_records_csv(std::ostream& out, const ExperimentResult& res) {
  out << "model,n,p,scheme,eta0,replication,checkpoint,T_n,status,sq_error\n";
  for (const auto& r : res.records) {
    const ParamVector truth = detail::plan_truth(res.plan.model, r.p);
    out << to_string(res.plan.model) << ',' << r.n << ',' << r.p << ',' << r.scheme << ','
        << format_double(r.eta0) << ',' << r.replication << ',' << format_double(r.checkpoint) << ','
        << r.T_n << ',' << (r.diverged ? "diverged" : "ok") << ','
        << format_double(r.diverged ? NAN : (r.estimate - truth).squaredNorm()) << '\n';
  }
}

inline void write_timings_csv(std::ostream& out, const ExperimentResult& res) {
  out << "run,sampling_s,approximation_s,update_s\n";
  for (std::size_t i = 0; i < res.timings.size(); ++i)
    out << i << ',' << format_double(res.timings[i].sampling) << ','
        << format_double(res.timings[i].approximation) << ',' << format_double(res.timings[i].update)
        << '\n';
}

struct TuneStep {
  double eta0;
  std::optional<double> value;  // empty when the run diverged
};

// Walks eta0 = initial, initial/2, ... and returns the first candidate whose
// successor does not improve the criterion (lower is better) by at least rel_tol.
inline double tune_eta0(double initial, const std::function<std::optional<double>(double)>& criterion,
                        double rel_tol = 1e-3, int max_halvings = 12,
                        std::vector<TuneStep>* trace = nullptr) {
  if (!(initial > 0.0)) throw ConfigError("initial stepsize must be positive");
  std::vector<TuneStep> steps;
  auto eval = [&](int k) -> const TuneStep& {
    while (static_cast<int>(steps.size()) <= k) {
      const double e = initial * std::ldexp(1.0, -static_cast<int>(steps.size()));
      steps.push_back({e, criterion(e)});
    }
    return steps[k];
  };
  double result = NAN;
  for (int k = 0; k <= max_halvings; ++k) {
    const TuneStep cur = eval(k);
    if (!cur.value || !std::isfinite(*cur.value)) continue;
    if (k == max_halvings) {
      result = cur.eta0;
      break;
    }
    const TuneStep nxt = eval(k + 1);
    if (!nxt.value || !std::isfinite(*nxt.value) ||
        (*cur.value - *nxt.value) / std::abs(*cur.value) < rel_tol) {
      result = cur.eta0;
      break;
    }
  }
  if (trace) *trace = steps;
  if (std::isnan(result)) throw TuningError("every stepsize candidate diverged");
  return result;
}

// Holdout criterion for tuning: holdout mean negative composite log-likelihood of
// theta_bar after `passes` passes; empty on divergence.
template <CompositeModel M>
std::optional<double> holdout_criterion(const M& model, const Dataset& data, const SchemeSpec& scheme,
                                        double eta0, double passes, double scale, std::uint64_t seed) {
  OptimizerConfig cfg = OptimizerConfig::from_passes(data.n_train(), passes, eta0);
  cfg.objective_scale = scale;
  try {
    const FitResult fr = fit(model, data, scheme, cfg, ParamVector::Zero(model.dimension()), seed);
    const double v = holdout_neg_loglik(model, fr.theta_bar, data);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const DivergenceError&) {
    return std::nullopt;
  } catch (const NumericDomainError&) {
    return std::nullopt;
  }
}

// Synthetic symptom-network truth: blocks of `block` nodes, each within-block edge
// nonzero with probability 0.75, no edges across blocks.
inline IsingParams nesarc_truth(Index p, std::uint64_t seed, Index block = 8) {
  if (p < 2 || block < 2 || block > kMaxEnumerationNodes) throw ConfigError("invalid surrogate size");
  Philox4x32 rng(seed, stream_domain::truth, 0, 0);
  IsingParams prm = IsingParams::zeros(p);
  for (Index j = 0; j < p; ++j) prm.intercepts[j] = -2.0 + uniform01(rng);
  for (Index j = 0; j < p; ++j)
    for (Index k = j + 1; k < p; ++k) {
      if (j / block != k / block) continue;
      if (uniform01(rng) >= 0.75) continue;
      const double mag = 0.5 + uniform01(rng);
      const double v = uniform01(rng) < 0.85 ? mag : -mag;
      prm.edges(j, k) = prm.edges(k, j) = v;
    }
  return prm;
}

struct NesarcConfig {
  Index p = 32;
  Index n = 31826;
  double holdout_frac = 0.1;
  Index recycle = 1000;
  double level = 0.01;
  double eta0_initial = 8.0;
  double tune_passes = 1.0;
  double max_passes = 10.0;
  double holdout_period_frac = 0.25;
  double holdout_rel_tol = 1e-3;
  std::uint64_t seed = 1;
};

struct EdgeRow {
  Index j, k;  // 0-based nodes
  TestResult test;
  bool truth_nonzero;
};

struct NesarcReport {
  double eta0 = 0;
  std::vector<TuneStep> tuning;
  Index iterations = 0;
  bool stopped_early = false;
  std::vector<EdgeRow> edges;
  double fraction_significant = 0;
  Index false_rejections = 0;
};

inline NesarcReport run_nesarc_style(const NesarcConfig& c) {
  const IsingParams truth = nesarc_truth(c.p, c.seed);
  Philox4x32 rng(c.seed, stream_domain::data, 0, 0);
  const Dataset data = exact_sample(truth, c.n, rng).with_holdout(random_holdout_mask(c.n, c.holdout_frac, c.seed));
  const IsingModel model(c.p);
  const SchemeSpec scheme{SchemeKind::hypergeometric, data.n_train(), model.num_components(), c.recycle};
  scheme.validate();

  NesarcReport rep;
  rep.eta0 = tune_eta0(
      c.eta0_initial,
      [&](double e) { return holdout_criterion(model, data, scheme, e, c.tune_passes, 1.0, mix_seed(c.seed, 1)); },
      1e-3, 12, &rep.tuning);

  const Index n = data.n_train();
  OptimizerConfig cfg = OptimizerConfig::from_passes(n, c.max_passes, rep.eta0);
  const Index period = std::max<Index>(1, static_cast<Index>(std::llround(c.holdout_period_frac * n)));
  cfg.holdout_check = HoldoutRule{period, c.holdout_rel_tol};
  const FitResult fr = fit(model, data, scheme, cfg, ParamVector::Zero(model.dimension()), mix_seed(c.seed, 2));
  rep.iterations = fr.iterations_run;
  rep.stopped_early = fr.stopped_early;

  const SandwichEstimate se = sandwich(model, fr.theta_bar, data, scheme, Regime::R3, fr.iterations_run);
  // Holm over the edge parameters only.
  std::vector<double> pv;
  for (Index j = 0; j < c.p; ++j)
    for (Index k = j + 1; k < c.p; ++k) {
      const Index idx = ising_edge_index(c.p, j, k);
      TestResult t;
      t.estimate = fr.theta_bar[idx];
      t.std_error = std::sqrt(std::max(se.cov_theta_bar(idx, idx), 0.0));
      t.z = t.std_error > 0 ? t.estimate / t.std_error : 0.0;
      t.p_value = std::erfc(std::abs(t.z) / std::sqrt(2.0));
      pv.push_back(t.p_value);
      rep.edges.push_back({j, k, t, truth.edges(j, k) != 0.0});
    }
  const auto adj = holm_adjust(pv);
  Index sig = 0;
  for (std::size_t e = 0; e < rep.edges.size(); ++e) {
    auto& row = rep.edges[e];
    row.test.p_adjusted = adj[e];
    row.test.reject = adj[e] < c.level;
    if (row.test.reject) {
      ++sig;
      if (!row.truth_nonzero) ++rep.false_rejections;
    }
  }
  rep.fraction_significant = static_cast<double>(sig) / static_cast<double>(rep.edges.size());
  return rep;
}

inline void write_edges_csv(std::ostream& out, const NesarcReport& r) {
  out << "node_a,node_b,estimate,std_error,z,p_value,p_holm,significant,truth_nonzero\n";
  for (const auto& e : r.edges)
    out << e.j + 1 << ',' << e.k + 1 << ',' << format_double(e.test.estimate) << ','
        << format_double(e.test.std_error) << ',' << format_double(e.test.z) << ','
        << format_double(e.test.p_value) << ',' << format_double(e.test.p_adjusted) << ','
        << (e.test.reject ? 1 : 0) << ',' << (e.truth_nonzero ? 1 : 0) << '\n';
}

}  // namespace csgd
