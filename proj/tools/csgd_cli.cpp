// Command-line front end: simulation, fitting, inference and experiment plans.

#include <csgd/csgd.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace csgd;

namespace {

constexpr const char* kVersion = "0.1.0";

// Keys accepted by --config. A flag given on the command line wins over the file.
struct RunSettings {
  double eta0 = 1.0;
  double c = 0.501;
  double burn_in_frac = 0.25;
  double passes = 3.0;
  std::string scheme = "hyper";
  Index recycle = 0;
  std::uint64_t seed = 1;
  Index record_every = 0;
  double holdout_period_frac = 0.0;
  double holdout_rel_tol = 1e-3;

  json to_json() const {
    return {{"eta0", eta0},
            {"c", c},
            {"burn_in_frac", burn_in_frac},
            {"passes", passes},
            {"scheme", scheme},
            {"recycle", recycle},
            {"seed", seed},
            {"record_every", record_every},
            {"holdout_period_frac", holdout_period_frac},
            {"holdout_rel_tol", holdout_rel_tol}};
  }
};

struct SettingOptions {
  std::map<std::string, CLI::Option*> opts;
  std::string config_path;
};

void add_setting_options(CLI::App* app, RunSettings& s, SettingOptions& so) {
  so.opts["eta0"] = app->add_option("--eta0", s.eta0, "Initial stepsize");
  so.opts["c"] = app->add_option("--c", s.c, "Stepsize decay exponent in (1/2, 1)");
  so.opts["burn_in_frac"] = app->add_option("--burn-in-frac", s.burn_in_frac, "Burn-in as a fraction of n");
  so.opts["passes"] = app->add_option("--passes", s.passes, "Iterations T_n as a multiple of n");
  so.opts["scheme"] = app->add_option("--scheme", s.scheme, "standard | bernoulli | hyper");
  so.opts["recycle"] = app->add_option("--recycle", s.recycle, "Recycle window l (0 = off)");
  so.opts["seed"] = app->add_option("--seed", s.seed, "Base seed");
  so.opts["record_every"] = app->add_option("--record-every", s.record_every, "Trajectory period (0 = off)");
  so.opts["holdout_period_frac"] =
      app->add_option("--holdout-period-frac", s.holdout_period_frac, "Holdout check period / n (0 = off)");
  so.opts["holdout_rel_tol"] = app->add_option("--holdout-rel-tol", s.holdout_rel_tol, "Holdout stopping tolerance");
  app->add_option("--config", so.config_path, "key = value file with the keys above")->check(CLI::ExistingFile);
}

// Applies config-file values for keys not given on the command line.
void apply_config(RunSettings& s, const SettingOptions& so) {
  if (so.config_path.empty()) return;
  std::ifstream in(so.config_path);
  const auto items = CLI::ConfigTOML().from_config(in);
  for (const auto& it : items) {
    const std::string key = it.fullname();
    const auto found = so.opts.find(key);
    if (found == so.opts.end()) throw ConfigError("unknown config key '" + key + "'");
    if (found->second->count() > 0 || it.inputs.empty()) continue;
    const std::string v = it.inputs.front();
    try {
      if (key == "eta0") s.eta0 = std::stod(v);
      else if (key == "c") s.c = std::stod(v);
      else if (key == "burn_in_frac") s.burn_in_frac = std::stod(v);
      else if (key == "passes") s.passes = std::stod(v);
      else if (key == "scheme") s.scheme = v;
      else if (key == "recycle") s.recycle = std::stoll(v);
      else if (key == "seed") s.seed = std::stoull(v);
      else if (key == "record_every") s.record_every = std::stoll(v);
      else if (key == "holdout_period_frac") s.holdout_period_frac = std::stod(v);
      else if (key == "holdout_rel_tol") s.holdout_rel_tol = std::stod(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad value '" + v + "' for config key '" + key + "'");
    }
  }
}

SchemeSpec make_scheme(const RunSettings& s, Index n, Index K) {
  SchemeSpec spec{parse_scheme(s.scheme), n, K, {}};
  if (s.recycle > 0) spec.recycle_window = s.recycle;
  spec.validate();
  return spec;
}

json versions() {
  return {{"csgd", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

void write_manifest(const fs::path& out, const std::string& command, json config, json extra = json::object()) {
  json m{{"command", command}, {"config", std::move(config)}, {"versions", versions()}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream f(out.string() + ".manifest.json");
  f << m.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

void write_theta_csv(const fs::path& p, const ParamVector& theta, const std::vector<std::string>& names) {
  auto f = open_out(p);
  f << "param_index,name,estimate\n";
  for (Index j = 0; j < theta.size(); ++j) f << j << ',' << names[j] << ',' << format_double(theta[j]) << '\n';
}

ParamVector read_theta_csv(const fs::path& p, Index d) {
  std::ifstream f(p);
  if (!f) throw DataError("cannot open " + p.string());
  std::string line;
  std::getline(f, line);
  std::vector<double> v;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto last = line.rfind(',');
    v.push_back(std::stod(line.substr(last + 1)));
  }
  if (static_cast<Index>(v.size()) != d)
    throw DataError("parameter file has " + std::to_string(v.size()) + " entries, model needs " + std::to_string(d));
  return Eigen::Map<ParamVector>(v.data(), d);
}

template <class F>
auto with_model(ModelKind kind, Index p, F&& f) {
  if (kind == ModelKind::ising) return f(IsingModel(p), 1.0);
  return f(FrailtyModel(p), scaled_pair_weight(p));
}

template <class T>
std::vector<T> parse_list(const std::string& s, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

double to_d(const std::string& s) { return std::stod(s); }
Index to_i(const std::string& s) { return std::stoll(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite-likelihood SGD: simulation, fitting, inference and experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // simulate-ising
  Index sim_p = 10, sim_n = 2500;
  std::uint64_t sim_seed = 1;
  std::string sim_out, sim_truth = "grid";
  auto* si = app.add_subcommand("simulate-ising", "Exact draws from the grid (or block surrogate) Ising model");
  si->add_option("--p", sim_p, "Nodes");
  si->add_option("--n", sim_n, "Observations");
  si->add_option("--seed", sim_seed, "Seed");
  si->add_option("--truth", sim_truth, "grid | surrogate")->check(CLI::IsMember({"grid", "surrogate"}));
  si->add_option("--out", sim_out, "Output CSV")->required();

  // simulate-frailty
  auto* sf = app.add_subcommand("simulate-frailty", "Draws from the gamma-frailty count model at its default truth");
  sf->add_option("--p", sim_p, "Variables");
  sf->add_option("--n", sim_n, "Observations");
  sf->add_option("--seed", sim_seed, "Seed");
  sf->add_option("--out", sim_out, "Output CSV")->required();

  // fit
  RunSettings fs_;
  SettingOptions fso;
  std::string fit_model = "ising", fit_data, fit_out, fit_opt = "sgd", fit_traj;
  double fit_holdout = 0.0;
  auto* fi = app.add_subcommand("fit", "Fit a model to a data CSV by averaged SGD or full-gradient ascent");
  fi->add_option("--model", fit_model, "ising | frailty")->check(CLI::IsMember({"ising", "frailty"}));
  fi->add_option("--data", fit_data, "Data CSV")->required()->check(CLI::ExistingFile);
  fi->add_option("--optimizer", fit_opt, "sgd | gd")->check(CLI::IsMember({"sgd", "gd"}));
  fi->add_option("--holdout-frac", fit_holdout, "Fraction of rows held out");
  fi->add_option("--trajectory", fit_traj, "Write recorded iterates to this CSV");
  fi->add_option("--out", fit_out, "Output parameter CSV")->required();
  add_setting_options(fi, fs_, fso);

  // infer
  RunSettings is_;
  SettingOptions iso;
  std::string inf_model = "ising", inf_data, inf_theta, inf_out, inf_regime = "R3";
  Index inf_T = 0;
  double inf_level = 0.95;
  auto* in = app.add_subcommand("infer", "Sandwich covariance, Wald tests and confidence intervals");
  in->add_option("--model", inf_model, "ising | frailty")->check(CLI::IsMember({"ising", "frailty"}));
  in->add_option("--data", inf_data, "Data CSV")->required()->check(CLI::ExistingFile);
  in->add_option("--theta", inf_theta, "Parameter CSV written by fit")->required()->check(CLI::ExistingFile);
  in->add_option("--regime", inf_regime, "R1 | R2 | R3");
  in->add_option("--iterations", inf_T, "T_n (default: round(passes * n))");
  in->add_option("--level", inf_level, "Confidence level");
  in->add_option("--out", inf_out, "Output CSV")->required();
  add_setting_options(in, is_, iso);

  // experiment
  auto* ex = app.add_subcommand("experiment", "Simulation-study plans");
  ex->require_subcommand(1);
  ExperimentPlan plan;
  std::string ex_model = "ising", ex_n = "2500", ex_p = "10", ex_schemes = "standard,bernoulli,hyper", ex_eta = "1",
              ex_ck = "0.5,1,1.5,2,2.5,3", ex_regimes = "R1,R2,R3", ex_out, ex_timings, ex_records;
  bool ex_no_gd = false;
  auto add_plan_options = [&](CLI::App* c) {
    c->add_option("--model", ex_model, "ising | frailty")->check(CLI::IsMember({"ising", "frailty"}));
    c->add_option("--n", ex_n, "Comma-separated sample sizes");
    c->add_option("--p", ex_p, "Comma-separated dimensions");
    c->add_option("--schemes", ex_schemes, "Comma-separated schemes (recycle_<scheme> for recycled)");
    c->add_option("--eta0", ex_eta, "Comma-separated initial stepsizes");
    c->add_option("--checkpoints", ex_ck, "Comma-separated checkpoints in passes");
    c->add_option("--reps", plan.replications, "Replications");
    c->add_option("--seed", plan.base_seed, "Base seed");
    c->add_option("--recycle", plan.recycle, "Recycle window for recycle_* schemes");
    c->add_option("--c", plan.c_exponent, "Stepsize decay exponent");
    c->add_option("--burn-in-frac", plan.burn_in_frac, "Burn-in fraction");
    c->add_option("--threads", plan.threads, "Worker threads (0 = hardware)");
    c->add_flag("--no-gd", ex_no_gd, "Skip the full-gradient baseline");
    c->add_option("--out", ex_out, "Summary CSV")->required();
    c->add_option("--records", ex_records, "Per-replication CSV");
    c->add_option("--timings", ex_timings, "Per-run step timings CSV");
  };
  auto* ex_mse = ex->add_subcommand("mse", "MSE trajectories per scheme and checkpoint");
  add_plan_options(ex_mse);
  auto* ex_cov = ex->add_subcommand("coverage", "Per-parameter CI coverage per scheme, checkpoint and regime");
  add_plan_options(ex_cov);
  ex_cov->add_option("--level", plan.level, "Confidence level");
  ex_cov->add_option("--regimes", ex_regimes, "Comma-separated regimes");

  auto* ex_tune = ex->add_subcommand("tune", "Stepsize halving on holdout negative composite log-likelihood");
  std::string tune_model = "ising", tune_scheme = "hyper", tune_out;
  Index tune_n = 2500, tune_p = 10, tune_recycle = 0;
  double tune_init = 8.0, tune_passes = 1.0, tune_holdout = 0.2, tune_tol = 1e-3;
  std::uint64_t tune_seed = 1;
  ex_tune->add_option("--model", tune_model, "ising | frailty")->check(CLI::IsMember({"ising", "frailty"}));
  ex_tune->add_option("--n", tune_n, "Simulated sample size");
  ex_tune->add_option("--p", tune_p, "Dimension");
  ex_tune->add_option("--scheme", tune_scheme, "Scheme");
  ex_tune->add_option("--recycle", tune_recycle, "Recycle window (0 = off)");
  ex_tune->add_option("--initial", tune_init, "Initial stepsize proposal");
  ex_tune->add_option("--passes", tune_passes, "Passes per candidate");
  ex_tune->add_option("--holdout-frac", tune_holdout, "Holdout fraction");
  ex_tune->add_option("--tol", tune_tol, "Relative improvement tolerance");
  ex_tune->add_option("--seed", tune_seed, "Seed");
  ex_tune->add_option("--out", tune_out, "Tuning trace CSV")->required();

  auto* ex_nes = ex->add_subcommand("nesarc", "Tune, fit with recycled hyper sampling, stop on holdout, Holm-test edges");
  NesarcConfig nc;
  std::string nes_out;
  ex_nes->add_option("--p", nc.p, "Nodes");
  ex_nes->add_option("--n", nc.n, "Observations (before holdout)");
  ex_nes->add_option("--seed", nc.seed, "Seed");
  ex_nes->add_option("--recycle", nc.recycle, "Recycle window");
  ex_nes->add_option("--level", nc.level, "Holm level");
  ex_nes->add_option("--max-passes", nc.max_passes, "Iteration cap in passes");
  ex_nes->add_option("--out", nes_out, "Edge report CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (si->parsed()) {
      Philox4x32 rng(sim_seed, stream_domain::data, 0, 0);
      const IsingParams truth = sim_truth == "grid" ? grid_truth(sim_p) : nesarc_truth(sim_p, sim_seed);
      save_csv(sim_out, exact_sample(truth, sim_n, rng));
      write_manifest(sim_out, "simulate-ising",
                     {{"p", sim_p}, {"n", sim_n}, {"seed", sim_seed}, {"truth", sim_truth}});
    } else if (sf->parsed()) {
      Philox4x32 rng(sim_seed, stream_domain::data, 0, 0);
      save_csv(sim_out, simulate_frailty(frailty_truth(sim_p), sim_n, rng));
      write_manifest(sim_out, "simulate-frailty", {{"p", sim_p}, {"n", sim_n}, {"seed", sim_seed}});
    } else if (fi->parsed()) {
      apply_config(fs_, fso);
      const ModelKind mk = parse_model_kind(fit_model);
      Dataset data = load_csv(fit_data, mk == ModelKind::ising ? DataKind::binary : DataKind::count);
      if (fit_holdout > 0.0) data = data.with_holdout(random_holdout_mask(data.rows(), fit_holdout, fs_.seed));
      json extra;
      with_model(mk, data.cols(), [&](const auto& model, double scale) {
        const ParamVector theta0 = ParamVector::Zero(model.dimension());
        if (fit_opt == "gd") {
          GDConfig g;
          g.objective_scale = scale;
          const GDResult r = gd_fit(model, data, g, theta0);
          write_theta_csv(fit_out, r.theta, model.parameter_names());
          extra = {{"optimizer", "gd"}, {"iterations", r.iterations}, {"converged", r.converged},
                   {"final_grad_norm", r.final_grad_norm}};
          return 0;
        }
        const Index n = data.n_train();
        OptimizerConfig cfg = OptimizerConfig::from_passes(n, fs_.passes, fs_.eta0, fs_.burn_in_frac, fs_.c);
        cfg.objective_scale = scale;
        if (fs_.record_every > 0) cfg.record_every = fs_.record_every;
        if (fs_.holdout_period_frac > 0.0) {
          if (!data.has_holdout()) throw ConfigError("holdout stopping needs --holdout-frac > 0");
          cfg.holdout_check = HoldoutRule{
              std::max<Index>(1, static_cast<Index>(std::llround(fs_.holdout_period_frac * n))), fs_.holdout_rel_tol};
        }
        const SchemeSpec scheme = make_scheme(fs_, n, model.num_components());
        cfg.profile = true;
        const FitResult r = fit(model, data, scheme, cfg, theta0, fs_.seed);
        write_theta_csv(fit_out, r.theta_bar, model.parameter_names());
        if (!fit_traj.empty()) {
          auto f = open_out(fit_traj);
          f << "iteration";
          for (const auto& nm : model.parameter_names()) f << ',' << nm;
          f << '\n';
          for (const auto& [t, th] : r.trajectory) {
            f << t;
            for (Index j = 0; j < th.size(); ++j) f << ',' << format_double(th[j]);
            f << '\n';
          }
        }
        extra = {{"optimizer", "sgd"},
                 {"scheme", scheme.label()},
                 {"iterations", r.iterations_run},
                 {"stopped_early", r.stopped_early},
                 {"timings_s", {{"sampling", r.timings.sampling},
                                {"approximation", r.timings.approximation},
                                {"update", r.timings.update}}}};
        return 0;
      });
      json cfg = fs_.to_json();
      cfg["model"] = fit_model;
      cfg["data"] = fit_data;
      cfg["holdout_frac"] = fit_holdout;
      write_manifest(fit_out, "fit", cfg, extra);
      std::cout << "wrote " << fit_out << '\n';
    } else if (in->parsed()) {
      apply_config(is_, iso);
      const ModelKind mk = parse_model_kind(inf_model);
      const Dataset data = load_csv(inf_data, mk == ModelKind::ising ? DataKind::binary : DataKind::count);
      const Regime regime = parse_regime(inf_regime);
      with_model(mk, data.cols(), [&](const auto& model, double) {
        const ParamVector theta = read_theta_csv(inf_theta, model.dimension());
        const Index n = data.n_train();
        const Index T = inf_T > 0 ? inf_T : static_cast<Index>(std::llround(is_.passes * static_cast<double>(n)));
        const SchemeSpec scheme = make_scheme(is_, n, model.num_components());
        const SandwichEstimate se = sandwich(model, theta, data, scheme, regime, T);
        const auto tests = wald_tests(theta, se.cov_theta_bar, 1.0 - inf_level);
        const auto ci = confidence_intervals(theta, se.cov_theta_bar, inf_level);
        const auto names = model.parameter_names();
        auto f = open_out(inf_out);
        f << "param_index,name,estimate,std_error,z,p_value,p_holm,ci_low,ci_high,regime\n";
        for (Index j = 0; j < theta.size(); ++j)
          f << j << ',' << names[j] << ',' << format_double(tests[j].estimate) << ','
            << format_double(tests[j].std_error) << ',' << format_double(tests[j].z) << ','
            << format_double(tests[j].p_value) << ',' << format_double(tests[j].p_adjusted) << ','
            << format_double(ci[j].first) << ',' << format_double(ci[j].second) << ',' << to_string(regime) << '\n';
        return 0;
      });
      json cfg = is_.to_json();
      cfg["model"] = inf_model;
      cfg["data"] = inf_data;
      cfg["theta"] = inf_theta;
      cfg["regime"] = inf_regime;
      cfg["level"] = inf_level;
      write_manifest(inf_out, "infer", cfg);
      std::cout << "wrote " << inf_out << '\n';
    } else if (ex_mse->parsed() || ex_cov->parsed()) {
      const bool coverage = ex_cov->parsed();
      plan.model = parse_model_kind(ex_model);
      plan.n_list = parse_list<Index>(ex_n, to_i);
      plan.p_list = parse_list<Index>(ex_p, to_i);
      plan.eta0_grid = parse_list<double>(ex_eta, to_d);
      plan.checkpoints = parse_list<double>(ex_ck, to_d);
      plan.schemes = parse_list<SchemeVariant>(ex_schemes, SchemeVariant::parse);
      plan.regimes = parse_list<Regime>(ex_regimes, parse_regime);
      plan.include_gd = !ex_no_gd;
      const ExperimentResult res = run_experiment(plan, coverage);
      {
        auto f = open_out(ex_out);
        coverage ? write_coverage_csv(f, res) : write_mse_csv(f, res);
      }
      if (!ex_records.empty()) {
        auto f = open_out(ex_records);
        write_records_csv(f, res);
      }
      if (!ex_timings.empty()) {
        auto f = open_out(ex_timings);
        write_timings_csv(f, res);
      }
      json cfg{{"model", ex_model},       {"n", plan.n_list},          {"p", plan.p_list},
               {"schemes", ex_schemes},   {"eta0", plan.eta0_grid},    {"checkpoints", plan.checkpoints},
               {"replications", plan.replications}, {"seed", plan.base_seed}, {"recycle", plan.recycle},
               {"c", plan.c_exponent},    {"burn_in_frac", plan.burn_in_frac}, {"include_gd", plan.include_gd}};
      if (coverage) {
        cfg["level"] = plan.level;
        cfg["regimes"] = ex_regimes;
      }
      write_manifest(ex_out, coverage ? "experiment coverage" : "experiment mse", cfg);
      std::cout << "wrote " << ex_out << '\n';
    } else if (ex_tune->parsed()) {
      const ModelKind mk = parse_model_kind(tune_model);
      Philox4x32 rng(tune_seed, stream_domain::data, 0, 0);
      Dataset data = mk == ModelKind::ising ? exact_sample(grid_truth(tune_p), tune_n, rng)
                                            : simulate_frailty(frailty_truth(tune_p), tune_n, rng);
      data = data.with_holdout(random_holdout_mask(tune_n, tune_holdout, tune_seed));
      std::vector<TuneStep> trace;
      const double chosen = with_model(mk, tune_p, [&](const auto& model, double scale) {
        SchemeSpec scheme{parse_scheme(tune_scheme), data.n_train(), model.num_components(), {}};
        if (tune_recycle > 0) scheme.recycle_window = tune_recycle;
        scheme.validate();
        return tune_eta0(
            tune_init,
            [&](double e) {
              return holdout_criterion(model, data, scheme, e, tune_passes, scale, mix_seed(tune_seed, 1));
            },
            tune_tol, 12, &trace);
      });
      {
        auto f = open_out(tune_out);
        f << "eta0,holdout_neg_cl,status,chosen\n";
        for (const auto& s : trace)
          f << format_double(s.eta0) << ',' << format_double(s.value ? *s.value : NAN) << ','
            << (s.value ? "ok" : "diverged") << ',' << (s.eta0 == chosen ? 1 : 0) << '\n';
      }
      write_manifest(tune_out, "experiment tune",
                     {{"model", tune_model}, {"n", tune_n}, {"p", tune_p}, {"scheme", tune_scheme},
                      {"recycle", tune_recycle}, {"initial", tune_init}, {"passes", tune_passes},
                      {"holdout_frac", tune_holdout}, {"tol", tune_tol}, {"seed", tune_seed}},
                     {{"chosen_eta0", chosen}});
      std::cout << "chosen eta0 " << format_double(chosen) << '\n';
    } else if (ex_nes->parsed()) {
      const NesarcReport r = run_nesarc_style(nc);
      {
        auto f = open_out(nes_out);
        write_edges_csv(f, r);
      }
      write_manifest(nes_out, "experiment nesarc",
                     {{"p", nc.p}, {"n", nc.n}, {"seed", nc.seed}, {"recycle", nc.recycle}, {"level", nc.level},
                      {"holdout_frac", nc.holdout_frac}, {"eta0_initial", nc.eta0_initial},
                      {"max_passes", nc.max_passes}},
                     {{"chosen_eta0", r.eta0},
                      {"iterations", r.iterations},
                      {"stopped_early", r.stopped_early},
                      {"fraction_significant", r.fraction_significant},
                      {"false_rejections", r.false_rejections}});
      std::cout << "significant edges " << format_double(100.0 * r.fraction_significant) << "%, eta0 "
                << format_double(r.eta0) << ", iterations " << r.iterations << '\n';
    }
  } catch (const csgd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
