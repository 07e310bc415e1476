// Command-line front end. One scenario file drives every subcommand;
// outputs are CSV files stamped with the scenario hash, the seed, and the
// library version, so identical inputs give byte-identical files.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "passage/coefficients.hpp"
#include "passage/csv.hpp"
#include "passage/hypotheses.hpp"
#include "passage/montecarlo.hpp"
#include "passage/profile.hpp"
#include "passage/scenario.hpp"
#include "passage/theory.hpp"
#include "passage/validate.hpp"
#include "passage/variances.hpp"
#include "passage/version.hpp"
#include "passage/volterra.hpp"

namespace fs = std::filesystem;
using namespace passage;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Report-text precision: enough to cross-check, short enough to read.
std::string rnum(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct Options {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
};

// Flag beats PASSAGE_THREADS beats the scenario file.
int resolve_threads(const Options& g, int scenario_threads) {
  if (g.threads_set && g.threads >= 1) return g.threads;
  if (const char* env = std::getenv("PASSAGE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return scenario_threads >= 1 ? scenario_threads : 1;
}

Scenario resolve_scenario(const Options& g) {
  Scenario sc = g.config.empty() ? reference_scenario() : load_scenario(g.config);
  if (g.seed_set) sc.sim.seed = g.seed;
  sc.sim.threads = resolve_threads(g, sc.sim.threads);
  return sc;
}

std::ofstream open_output(const Options& g, const std::string& name) {
  fs::create_directories(g.out);
  const fs::path path = fs::path(g.out) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  return out;
}

void describe_check(std::string& text, const char* name, const CheckResult& c) {
  text += "  ";
  text += name;
  text += c.pass ? " PASS" : " FAIL";
  if (std::isfinite(c.witness)) text += "  witness t = " + rnum(c.witness);
  if (!c.note.empty()) text += "  (" + c.note + ")";
  text += '\n';
}

int cmd_analyze(const Options& g, int periods, int points_per_period) {
  const Scenario sc = resolve_scenario(g);
  const ModelSpec& m = sc.model;
  const RateReport rep = find_rate_minimum(m);
  const HypothesisReport hyp = check_hypotheses(m);

  std::string text;
  char line[160];
  std::snprintf(line, sizeof(line), "scenario %s (hash %016llx)\n",
                sc.name.c_str(),
                static_cast<unsigned long long>(scenario_hash(sc)));
  text += line;
  text += "model: T = " + rnum(m.period()) + ", sigma = " + rnum(m.sigma) +
          ", levels " + rnum(m.delta1) + " / " + rnum(m.delta2) + "\n";
  text += "rate minimum:\n";
  text += "  lambda       " + rnum(rep.lambda) + '\n';
  text += "  s_star       " + rnum(rep.s_star) + '\n';
  text += "  R            " + rnum(rep.R) + '\n';
  text += "  rho_dd       " + rnum(rep.rho_dd) + '\n';
  text += "  C0           " + rnum(rep.C0) + '\n';
  text += "  C            " + rnum(rep.C) + '\n';
  text += "  gamma0       " + rnum(rep.gamma0) + '\n';
  text += "  theta0       " + rnum(rep.theta0) + '\n';
  text += std::string("  weak_minimum ") + (rep.weak_minimum ? "yes" : "no") +
          '\n';
  text += std::string("  degenerate   ") + (rep.degenerate ? "yes" : "no") +
          '\n';
  text += "hypotheses:\n";
  describe_check(text, "h1", hyp.h1);
  describe_check(text, "h2", hyp.h2);
  describe_check(text, "h3", hyp.h3);
  describe_check(text, "h4", hyp.h4);
  describe_check(text, "h5", hyp.h5);
  text += std::string("  h5_weak ") + (hyp.h5_weak ? "yes" : "no") + '\n';
  text += "  Delta  " + rnum(hyp.Delta) + "  Delta0 " + rnum(hyp.Delta0) + '\n';
  text += "  vbar   " + rnum(hyp.vbar) + "  vunder " + rnum(hyp.vunder) + '\n';
  text +=
      std::string("overall: ") + (hyp.all_pass() ? "PASS" : "FAIL") + '\n';

  std::fputs(text.c_str(), stdout);
  {
    std::ofstream rf = open_output(g, "analyze_report.txt");
    rf << text;
  }

  std::ofstream cf = open_output(g, "analyze_curves.csv");
  CsvWriter w(cf,
              {"t", "v_star", "v_per_minus", "v_hat_per_plus", "rho_per_sq",
               "theta", "theta_prime"},
              scenario_hash(sc), sc.sim.seed);
  const double T = m.period();
  for (int i = 0; i < periods * points_per_period; ++i) {
    const double t = T * i / points_per_period;
    w.row(std::vector<double>{t, v_star(m, t), v_per_minus(m, t),
                              v_hat_per_plus(m, t), rho_per_sq(m, t),
                              theta(m, rep, t), theta_prime(m, t)});
  }
  return 0;
}

int cmd_profile(const Options& g, double lambda_t, int points) {
  const Scenario sc = resolve_scenario(g);
  const double lamT =
      lambda_t > 0.0 ? lambda_t : sc.model.lambda() * sc.model.period();
  const CyclingParams p{lamT};

  std::ofstream f = open_output(g, "profile.csv");
  CsvWriter w(f, {"x", "P_sum", "P_fourier"}, scenario_hash(sc),
              sc.sim.seed);
  for (int i = 0; i < 3 * points; ++i) {
    const double x = double(i) / points;
    w.row(std::vector<double>{x, profile_sum(p, x), profile_fourier(p, x)});
  }
  return 0;
}

// One theory table row; regime functions outside their validity window
// show up as nan cells rather than aborting the sweep.
std::vector<std::string> theory_cells(const TheoryContext& ctx, double t) {
  const ModelSpec& m = ctx.spec;
  auto guarded = [&](const std::function<double()>& f) {
    try {
      return num(f());
    } catch (const std::exception&) {
      return std::string("nan");
    }
  };
  std::vector<std::string> cells;
  cells.push_back(guarded(
      [&] { return double(int(classify_regime(ctx, t).regime)); }));
  try {
    cells.back() = regime_name(classify_regime(ctx, t).regime);
  } catch (const std::exception&) {
    cells.back() = "nan";
  }
  cells.push_back(guarded([&] { return p_plus_metastable(ctx, t).value; }));
  cells.push_back(guarded([&] { return p_plus_laplace(ctx, t).value; }));
  cells.push_back(guarded([&] { return p_plus_transient_bound(ctx, t).value; }));
  const double th = theta(m, ctx.rate, t);
  cells.push_back(num(th));
  const double lamT = ctx.rate.lambda * m.period();
  cells.push_back(num((log_sigma_abs(m.sigma) - th) / lamT));
  return cells;
}

int cmd_theory(const Options& g, double t_min, double t_max,
               int points_per_period, double fixed_t,
               const std::string& sigma_sweep) {
  const Scenario sc = resolve_scenario(g);
  const ModelSpec& m = sc.model;
  const double T = m.period();
  const std::vector<std::string> cols = {
      "t",     "regime", "p_plus_metastable", "p_plus_laplace",
      "transient_bound", "theta", "profile_argument"};

  if (t_max <= t_min) t_max = sc.sim.t_max_periods * T;
  const int n_rows =
      std::max(1, int((t_max - t_min) / T * points_per_period));

  auto sweep_time = [&](const TheoryContext& ctx, CsvWriter& w) {
    for (int i = 0; i < n_rows; ++i) {
      const double t = t_min + (t_max - t_min) * i / n_rows;
      std::vector<std::string> cells{num(t)};
      for (auto& c : theory_cells(ctx, t)) cells.push_back(std::move(c));
      w.row(cells);
    }
  };

  if (sigma_sweep.empty()) {
    const TheoryContext ctx = make_theory_context(m);
    std::ofstream f = open_output(g, "theory.csv");
    CsvWriter w(f, cols, scenario_hash(sc), sc.sim.seed);
    sweep_time(ctx, w);
    return 0;
  }

  // lo:step:hi in sigma; each value gets its own time sweep, and the
  // combined file traces the fixed-t cycling against |log sigma|.
  double lo = 0.0, step = 0.0, hi = 0.0;
  if (std::sscanf(sigma_sweep.c_str(), "%lf:%lf:%lf", &lo, &step, &hi) != 3 ||
      !(lo > 0.0) || !(step > 0.0) || hi < lo)
    throw std::invalid_argument("--sigma-sweep expects lo:step:hi with "
                                "0 < lo <= hi and step > 0");
  std::vector<double> sigmas;
  for (double s = lo; s <= hi + 1e-12; s += step) sigmas.push_back(s);

  const double tf = std::isnan(fixed_t)
                        ? sc.sim.t_max_periods * T - 0.5 * T
                        : fixed_t;
  std::ofstream cf = open_output(g, "cycling.csv");
  std::vector<std::string> ccols = {"sigma", "eta"};
  ccols.insert(ccols.end(), cols.begin(), cols.end());
  CsvWriter cw(cf, ccols, scenario_hash(sc), sc.sim.seed);

  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    const ModelSpec ms(m.a, m.g, m.delta1, m.delta2, sigmas[k]);
    const TheoryContext ctx = make_theory_context(ms);

    char name[64];
    std::snprintf(name, sizeof(name), "theory_sigma_%g.csv", sigmas[k]);
    std::ofstream f = open_output(g, name);
    CsvWriter w(f, cols, scenario_hash(sc), sc.sim.seed);
    sweep_time(ctx, w);

    std::vector<std::string> cells{num(sigmas[k]),
                                   num(log_sigma_abs(sigmas[k])), num(tf)};
    for (auto& c : theory_cells(ctx, tf)) cells.push_back(std::move(c));
    cw.row(cells);
  }
  return 0;
}

int cmd_volterra(const Options& g, const std::string& problem, double t_max,
                 int grid_n, double switch_time) {
  const Scenario sc = resolve_scenario(g);

  FptProblem p = [&]() -> FptProblem {
    if (problem == "model-psi-minus")
      return model_psi_minus_problem(sc.model, t_max);
    if (problem == "model-psi-down")
      return model_psi_down_problem(sc.model, switch_time, t_max);
    if (problem == "constant-boundary")
      return detail::flat_boundary_problem(1.0);
    // custom: polynomial boundary over a linear variance clock, read from
    // the scenario file's "volterra" block.
    if (g.config.empty())
      throw std::invalid_argument(
          "--problem custom needs --config with a \"volterra\" block");
    std::ifstream in(g.config);
    nlohmann::json j;
    in >> j;
    const nlohmann::json& jv = j.at("volterra");
    const double slope = jv.value("v_slope", 1.0);
    const double sigma = jv.value("sigma", 1.0);
    const std::vector<double> dc =
        jv.at("d").get<std::vector<double>>();
    if (dc.empty())
      throw std::invalid_argument("volterra.d needs at least one coefficient");
    auto poly = [dc](double t) {
      double acc = 0.0;
      for (std::size_t i = dc.size(); i-- > 0;) acc = acc * t + dc[i];
      return acc;
    };
    auto dpoly = [dc](double t) {
      double acc = 0.0;
      for (std::size_t i = dc.size(); i-- > 1;)
        acc = acc * t + double(i) * dc[i];
      return acc;
    };
    return {[slope](double t) { return slope * t; },
            [slope](double) { return slope; }, poly, dpoly, sigma};
  }();

  const VolterraSolution sol = solve_second_kind(p, t_max, grid_n);
  const FirstKindReport fk = check_first_kind(p, sol);
  const ContractionParams cp = estimate_contraction_params(p, t_max);
  const double eps = sol.epsilon;
  const double bracket = eps < 1.0
                             ? eps / (1.0 - eps) * cp.M2 * cp.M3 / cp.Delta
                             : std::numeric_limits<double>::infinity();

  std::ofstream f = open_output(g, "volterra.csv");
  CsvWriter w(f,
              {"t", "psi", "c", "c0", "bracket_lo", "bracket_hi",
               "first_kind_residual"},
              scenario_hash(sc), sc.sim.seed);
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    const double c0 = prefactor_c0(p, sol.grid[i]);
    w.row(std::vector<double>{sol.grid[i], sol.psi[i], sol.c[i], c0,
                              c0 * (1.0 - bracket), c0 * (1.0 + bracket),
                              fk.residual[i]});
  }
  std::fprintf(stderr,
               "volterra: %s, mass %.6g, epsilon %.3g, first-kind sup %.3g\n",
               problem.c_str(), sol.mass, eps, fk.sup_rel);
  return 0;
}

int cmd_simulate(const Options& g, int bins_per_period) {
  const Scenario sc = resolve_scenario(g);
  std::fprintf(stderr,
               "simulate: %lld paths, %d periods x %d substeps, seed %llu, "
               "%d thread(s)\n",
               static_cast<long long>(sc.sim.n_paths), sc.sim.t_max_periods,
               sc.sim.substeps_per_period,
               static_cast<unsigned long long>(sc.sim.seed), sc.sim.threads);
  const SimulationResult sim = simulate(sc.model, sc.sim);
  for (const std::string& warning : sim.warnings)
    std::fprintf(stderr, "simulate: warning: %s\n", warning.c_str());

  const double T = sc.model.period();
  std::vector<double> edges;
  for (int k = 0; k <= sc.sim.t_max_periods * bins_per_period; ++k)
    edges.push_back(sc.sim.start_time + T * k / bins_per_period);
  const DensityEstimate est = estimate_density(sim, edges);

  std::ofstream f = open_output(g, "simulate.csv");
  CsvWriter w(f,
              {"t_lo", "t_hi", "count", "density", "ci_lo", "ci_hi",
               "censored_total"},
              scenario_hash(sc), sc.sim.seed);
  for (std::size_t i = 0; i < est.t_lo.size(); ++i)
    w.row(std::vector<double>{est.t_lo[i], est.t_hi[i],
                              double(est.counts[i]), est.density[i],
                              est.ci_lo[i], est.ci_hi[i],
                              double(est.censored)});
  std::fprintf(stderr, "simulate: %lld crossings, %lld censored\n",
               static_cast<long long>(est.total - est.censored),
               static_cast<long long>(est.censored));
  return 0;
}

int cmd_validate(const Options& g, const std::vector<std::string>& skips,
                 const std::vector<std::string>& tol_overrides) {
  Tolerances tol;
  const std::vector<std::pair<std::string, double*>> names = {
      {"profile-dual", &tol.profile_dual},
      {"zeroth-moment", &tol.zeroth_moment},
      {"period-mass", &tol.period_mass},
      {"ode-residual", &tol.ode_residual},
      {"accumulation", &tol.accumulation},
      {"volterra-sup", &tol.volterra_sup},
      {"first-kind", &tol.first_kind},
      {"ks-multiplier", &tol.ks_multiplier},
      {"cycling-dev", &tol.cycling_dev},
      {"pearson-r", &tol.pearson_r},
      {"mass-factor", &tol.mass_factor},
      {"sum-recurrence", &tol.sum_recurrence}};
  for (const std::string& ov : tol_overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--tol expects NAME=VALUE, got " + ov);
    const std::string key = ov.substr(0, eq);
    bool found = false;
    for (const auto& [name, slot] : names) {
      if (name != key) continue;
      *slot = std::stod(ov.substr(eq + 1));
      found = true;
      break;
    }
    if (!found) {
      std::string known;
      for (const auto& [name, slot] : names) known += " " + name;
      throw std::invalid_argument("unknown tolerance " + key + "; known:" +
                                  known);
    }
  }

  bool skip_mc = false;
  for (const std::string& s : skips) {
    if (s == "mc")
      skip_mc = true;
    else
      throw std::invalid_argument("unknown --skip value " + s +
                                  " (only \"mc\" is recognized)");
  }

  const int threads = resolve_threads(g, 1);
  const auto results = run_all_criteria(threads, skip_mc, tol);

  std::ofstream f = open_output(g, "validate.csv");
  CsvWriter w(f, {"criterion", "pass", "measured", "tolerance", "seconds"},
              scenario_hash(reference_scenario()), 1);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%s\n", format_criterion(r).c_str());
    w.row({r.name, r.pass ? "1" : "0", num(r.measured), num(r.tolerance),
           num(r.seconds)});
    all_pass = all_pass && r.pass;
  }
  std::printf("%s: %zu criteria\n", all_pass ? "ALL PASS" : "FAILURES",
              results.size());
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Passage laboratory: analytic first-passage densities for a "
      "periodically driven two-level system, cross-validated against a "
      "path sampler."};
  app.require_subcommand(1);

  Options g;
  auto* opt_config = app.add_option(
      "--config", g.config,
      "Scenario JSON file (default: the built-in reference scenario)");
  app.add_option("--out", g.out, "Output directory (default: .)");
  auto* opt_seed =
      app.add_option("--seed", g.seed, "Override the scenario RNG seed");
  auto* opt_threads = app.add_option(
      "--threads", g.threads,
      "Sampler thread count; overrides PASSAGE_THREADS and the scenario");

  auto* analyze = app.add_subcommand(
      "analyze", "Rate minimum, hypothesis report, and variance curves");
  int an_periods = 2, an_ppp = 256;
  analyze->add_option("--periods", an_periods, "Curve length in periods")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--points-per-period", an_ppp, "Curve resolution")
      ->check(CLI::PositiveNumber);

  auto* profile = app.add_subcommand(
      "profile", "Universal cycling profile, both representations");
  double pr_lamT = 0.0;
  int pr_points = 512;
  profile->add_option("--lambda-t", pr_lamT,
                      "Profile shape parameter (default: scenario's)");
  profile->add_option("--points", pr_points, "Points per unit of x")
      ->check(CLI::PositiveNumber);

  auto* theory = app.add_subcommand(
      "theory", "Crossing-density asymptotics over time or noise level");
  double th_tmin = 0.0, th_tmax = -1.0, th_fixed = nan("");
  int th_ppp = 64;
  std::string th_sweep;
  theory->add_option("--t-min", th_tmin, "Sweep start time");
  theory->add_option("--t-max", th_tmax,
                     "Sweep end time (default: scenario horizon)");
  theory->add_option("--points-per-period", th_ppp, "Sweep resolution")
      ->check(CLI::PositiveNumber);
  auto* opt_sweep = theory->add_option(
      "--sigma-sweep", th_sweep,
      "lo:step:hi noise sweep; one time-sweep CSV per value plus a "
      "combined fixed-time cycling CSV");
  theory
      ->add_option("--fixed-t", th_fixed,
                   "Evaluation time for the cycling CSV (default: half a "
                   "period before the horizon)")
      ->needs(opt_sweep);

  auto* volterra = app.add_subcommand(
      "volterra", "Level-crossing integral equation solver");
  std::string vo_problem = "model-psi-minus";
  double vo_tmax = 8.0, vo_switch = 0.25;
  int vo_n = 2000;
  volterra
      ->add_option("--problem", vo_problem,
                   "model-psi-minus | model-psi-down | constant-boundary | "
                   "custom (from config)")
      ->check(CLI::IsMember({"model-psi-minus", "model-psi-down",
                             "constant-boundary", "custom"}));
  volterra->add_option("--t-max", vo_tmax, "Solve horizon")
      ->check(CLI::PositiveNumber);
  volterra->add_option("--grid-n", vo_n, "Grid nodes")
      ->check(CLI::Range(8, 200000));
  volterra->add_option("--switch-time", vo_switch,
                       "Branch switch time for model-psi-down");

  auto* simulate_cmd =
      app.add_subcommand("simulate", "Path sampler crossing histogram");
  int si_bins = 8;
  simulate_cmd->add_option("--bins-per-period", si_bins, "Histogram bins")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand(
      "validate", "Cross-module acceptance criteria, pass/fail per line");
  std::vector<std::string> va_skips, va_tols;
  validate->add_option("--skip", va_skips,
                       "Skip a criterion family (only: mc)");
  validate->add_option("--tol", va_tols,
                       "Override a tolerance as NAME=VALUE (repeatable)");

  for (auto* sub : {analyze, profile, theory, volterra, simulate_cmd,
                    validate})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.seed_set = opt_seed->count() > 0;
  g.threads_set = opt_threads->count() > 0;

  try {
    if (analyze->parsed()) return cmd_analyze(g, an_periods, an_ppp);
    if (profile->parsed()) return cmd_profile(g, pr_lamT, pr_points);
    if (theory->parsed())
      return cmd_theory(g, th_tmin, th_tmax, th_ppp, th_fixed, th_sweep);
    if (volterra->parsed())
      return cmd_volterra(g, vo_problem, vo_tmax, vo_n, vo_switch);
    if (simulate_cmd->parsed()) return cmd_simulate(g, si_bins);
    if (validate->parsed()) return cmd_validate(g, va_skips, va_tols);
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "passage: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "passage: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
