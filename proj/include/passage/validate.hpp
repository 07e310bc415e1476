#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "passage/coefficients.hpp"
#include "passage/montecarlo.hpp"
#include "passage/profile.hpp"
#include "passage/quadrature.hpp"
#include "passage/scenario.hpp"
#include "passage/theory.hpp"
#include "passage/variances.hpp"
#include "passage/volterra.hpp"

// Cross-module validation suite. Each criterion pits two independent
// routes to the same quantity against each other (series vs transform,
// closed form vs solver, sampler vs law) and reports the worst deviation
// next to the limit it must meet. The standalone gate binary and the CLI
// `validate` subcommand both run these checkers.

namespace passage {

struct CriterionResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;   // worst observed value, in the detail's units
  double tolerance = 0.0;  // limit it is compared against
  double seconds = 0.0;
  std::string detail;      // human-readable measurement vs limit
};

// Pinned limits. The validate subcommand can override individual entries;
// the gate binary always runs the defaults.
struct Tolerances {
  double profile_dual = 1e-8;    // sup |P_sum - P_fourier|
  double zeroth_moment = 1e-8;   // |int_0^1 P - 1/(2 lambda T)|
  double period_mass = 1e-6;     // |int theta' P dt - 1/2| over one period
  double ode_residual = 1e-8;    // periodic variance ODE, relative to g^2
  double accumulation = 1e-10;   // recurrence vs direct quadrature, absolute
  double volterra_sup = 1e-3;    // constant boundary vs closed form
  double first_kind = 1e-3;      // residual of the first-kind identity
  double ks_multiplier = 3.0;    // times sqrt(ln(200) / 2n)
  double cycling_dev = 2e-2;     // |c(t, sigma)/c(t+T, sigma e^{-lambda T}) - 1|
  double pearson_r = 0.9;        // MC vs theory bin-mass correlation (>=)
  double mass_factor = 2.0;      // MC/theory total mass ratio window
  double sum_recurrence = 1e-6;  // finite sum index/eta shift identity
};

namespace detail {

class Stopwatch {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

inline std::string fmt(const char* format, ...) {
  char buf[384];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// Moderate one-harmonic scenario driving the analytic checks.
inline ModelSpec analytic_model(double sigma = 0.35) {
  return {PeriodicFunction(1.0, 1.0, {}, {0.1}),
          PeriodicFunction(1.0, 2.2, {0.44}, {}), 0.1, 0.55, sigma};
}

// Richardson-extrapolated central difference, O(h^4).
template <class F>
double deriv4(F&& f, double t, double h) {
  const double d1 = (f(t + h) - f(t - h)) / (2.0 * h);
  const double d2 = (f(t + h / 2) - f(t - h / 2)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

inline double pearson(const std::vector<std::pair<double, double>>& pts) {
  const double n = double(pts.size());
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Brownian clock with a flat boundary: closed-form crossing density.
inline FptProblem flat_boundary_problem(double d) {
  return {[](double t) { return t; }, [](double) { return 1.0; },
          [d](double) { return d; }, [](double) { return 0.0; }, 1.0};
}

inline double flat_boundary_psi(double d, double t) {
  return d * std::pow(t, -1.5) * std::exp(-0.5 * d * d / t) /
         std::sqrt(2.0 * M_PI);
}

// Slowly accelerating boundary at small noise: live kernel, contraction
// constant below one, so the two-sided prefactor bound applies.
inline FptProblem parabola_problem() {
  return {[](double t) { return t; }, [](double) { return 1.0; },
          [](double t) { return 1.0 + 0.1 * t * t; },
          [](double t) { return 0.2 * t; }, 0.03};
}

}  // namespace detail

// Criterion 1: the image sum and its Fourier series are the same function.
inline CriterionResult check_profile_dual(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "profile-dual";
  r.tolerance = tol.profile_dual;
  double worst = 0.0;
  for (double lamT : {0.3, 0.5, 1.0, 2.0, 5.0}) {
    const CyclingParams p{lamT};
    for (int i = 0; i < 512; ++i) {
      const double x = double(i) / 512.0;
      worst = std::max(worst,
                       std::fabs(profile_sum(p, x) - profile_fourier(p, x)));
    }
  }
  r.measured = worst;
  r.seconds = sw.elapsed();
  r.pass = worst <= r.tolerance && r.seconds < 1.0;
  r.detail = detail::fmt(
      "sup |P_sum - P_fourier| = %.3e (limit %.0e), 5 shapes x 512 points",
      worst, r.tolerance);
  return r;
}

// Criterion 2: zeroth moment of the profile, and the half-unit passage
// mass per period of the full cycling density.
inline CriterionResult check_normalization(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "normalization";
  r.tolerance = 1.0;

  double worst_m0 = 0.0;
  for (double lamT : {0.3, 0.5, 1.0, 2.0, 5.0}) {
    const CyclingParams p{lamT};
    const double m0 = integrate([&](double x) { return profile_sum(p, x); },
                                0.0, 1.0, 1e-12, 0.0);
    worst_m0 = std::max(worst_m0, std::fabs(m0 - 0.5 / lamT));
  }

  const Scenario sc = reference_scenario();
  const TheoryContext ctx = make_theory_context(sc.model);
  const double lamT = ctx.rate.lambda * sc.model.period();
  const double eta = 6.0;
  const double mass = integrate(
      [&](double t) {
        return theta_prime(sc.model, t) *
               profile_sum({lamT}, (eta - theta(sc.model, ctx.rate, t)) / lamT);
      },
      20.0, 21.0, 1e-8, 0.0);
  const double mass_err = std::fabs(mass - 0.5);

  r.measured = std::max(worst_m0 / tol.zeroth_moment,
                        mass_err / tol.period_mass);
  r.seconds = sw.elapsed();
  r.pass = worst_m0 <= tol.zeroth_moment && mass_err <= tol.period_mass &&
           r.seconds < 1.0;
  r.detail = detail::fmt(
      "zeroth moment err %.3e (limit %.0e); period mass err %.3e (limit %.0e)",
      worst_m0, tol.zeroth_moment, mass_err, tol.period_mass);
  return r;
}

// Criterion 3: the periodic variances against their defining ODEs, the
// accumulation recurrences against direct quadrature, and the adiabatic
// envelope.
inline CriterionResult check_variance_engine(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "variance-engine";
  r.tolerance = 1.0;
  const ModelSpec m = detail::analytic_model();

  double worst_ode = 0.0;
  const double h = 2e-3;
  for (int i = 0; i < 1024; ++i) {
    const double t = m.period() * i / 1024.0;
    const double g2 = m.g(t) * m.g(t);
    const double rm =
        detail::deriv4([&](double u) { return v_per_minus(m, u); }, t, h) +
        2.0 * m.a(t) * v_per_minus(m, t) - g2;
    const double rp =
        detail::deriv4([&](double u) { return v_hat_per_plus(m, u); }, t, h) -
        2.0 * m.a(t) * v_hat_per_plus(m, t) + g2;
    worst_ode = std::max({worst_ode, std::fabs(rm) / g2, std::fabs(rp) / g2});
  }

  double worst_acc = 0.0;
  for (double t : {0.9, 1.7, 3.3}) {
    const double vm_direct = integrate(
        [&](double u) {
          const double gu = m.g(u);
          return std::exp(-2.0 * alpha(m, t, u)) * gu * gu;
        },
        0.2, t);
    const double vp_direct = integrate(
        [&](double u) {
          const double gu = m.g(u);
          return std::exp(-2.0 * alpha(m, u, 0.2)) * gu * gu;
        },
        0.2, t);
    worst_acc = std::max({worst_acc, std::fabs(v_minus(m, t, 0.2) - vm_direct),
                          std::fabs(v_hat_plus(m, t, 0.2) - vp_direct)});
  }

  double vlo = 1e300, vhi = -1e300;
  for (int i = 0; i < 4096; ++i) {
    const double v = v_star(m, m.period() * i / 4096.0);
    vlo = std::min(vlo, v);
    vhi = std::max(vhi, v);
  }
  bool envelope_ok = true;
  for (int i = 0; i < 256; ++i) {
    const double t = m.period() * i / 256.0;
    for (double v : {v_per_minus(m, t), v_hat_per_plus(m, t)})
      envelope_ok = envelope_ok && v >= vlo - 1e-10 && v <= vhi + 1e-10;
  }

  r.measured =
      std::max(worst_ode / tol.ode_residual, worst_acc / tol.accumulation);
  r.seconds = sw.elapsed();
  r.pass = worst_ode <= tol.ode_residual && worst_acc <= tol.accumulation &&
           envelope_ok && r.seconds < 5.0;
  r.detail = detail::fmt(
      "ODE residual %.3e (limit %.0e); accumulation err %.3e (limit %.0e); "
      "envelope %s",
      worst_ode, tol.ode_residual, worst_acc, tol.accumulation,
      envelope_ok ? "held" : "VIOLATED");
  return r;
}

// Criterion 4: the level-crossing solver against the reflection-principle
// closed form, the first-kind identity, and the two-sided prefactor bound
// on a contracting problem.
inline CriterionResult check_volterra_oracle(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "volterra-oracle";
  r.tolerance = 1.0;

  const FptProblem flat = detail::flat_boundary_problem(1.0);
  const VolterraSolution sol = solve_second_kind(flat, 5.0, 2000);
  double sup_rel = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    if (sol.grid[i] < 0.05) continue;
    const double exact = detail::flat_boundary_psi(1.0, sol.grid[i]);
    sup_rel = std::max(sup_rel, std::fabs(sol.psi[i] / exact - 1.0));
  }

  const FirstKindReport fk = check_first_kind(flat, sol, 0.05);

  const FptProblem par = detail::parabola_problem();
  const ContractionParams cp = estimate_contraction_params(par, 2.0);
  const FixedPointResult fp = fixed_point_prefactor(par, cp, 2.0, 800);
  double worst_bracket = 0.0;
  for (std::size_t i = 0; i < fp.c.size(); ++i)
    worst_bracket = std::max(
        worst_bracket, std::fabs(fp.c[i] / fp.c0[i] - 1.0) / fp.bracket_rel);
  const bool bracket_ok =
      fp.contraction && fp.converged && worst_bracket <= 1.0;

  r.measured = std::max(sup_rel / tol.volterra_sup, fk.sup_rel / tol.first_kind);
  r.seconds = sw.elapsed();
  r.pass = sup_rel <= tol.volterra_sup && fk.sup_rel <= tol.first_kind &&
           bracket_ok && r.seconds < 10.0;
  r.detail = detail::fmt(
      "closed-form sup rel %.3e (limit %.0e); first-kind residual %.3e "
      "(limit %.0e); bracket (eps %.2f) %s",
      sup_rel, tol.volterra_sup, fk.sup_rel, tol.first_kind, fp.epsilon,
      bracket_ok ? "contains prefactor" : "VIOLATED");
  return r;
}

// Criterion 5: the sampler restricted to the unstable branch against the
// exact crossing law, as a KS distance over every substep end.
inline CriterionResult check_simulator_exactness(int threads,
                                                 const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "simulator-exactness";

  const ModelSpec m = detail::analytic_model(0.30);
  SimConfig cfg;
  cfg.substeps_per_period = 48;
  cfg.n_paths = 100000;
  cfg.t_max_periods = 8;
  cfg.seed = 11;
  cfg.single_branch = true;
  cfg.start_time = 0.25;
  cfg.threads = threads;
  const SimulationResult sim = simulate(m, cfg);

  const int K = cfg.substeps_per_period * cfg.t_max_periods;
  std::vector<double> hits(K + 1, 0.0);
  for (const PathOutcome& o : sim.outcomes) {
    if (std::isnan(o.tau_plus)) continue;
    const long long k =
        std::llround((o.tau_plus - cfg.start_time) * cfg.substeps_per_period);
    if (k >= 1 && k <= K) hits[std::size_t(k)] += 1.0;
  }

  double ks = 0.0, cum = 0.0;
  for (int k = 1; k <= K; ++k) {
    cum += hits[std::size_t(k)];
    const double t = cfg.start_time + double(k) / cfg.substeps_per_period;
    const double theory = crossing_cdf_plus(m, t, cfg.start_time);
    ks = std::max(ks, std::fabs(cum / double(cfg.n_paths) - theory));
  }

  r.measured = ks;
  r.tolerance =
      tol.ks_multiplier * std::sqrt(std::log(200.0) / (2.0 * cfg.n_paths));
  r.seconds = sw.elapsed();
  r.pass = ks <= r.tolerance && r.seconds < 60.0;
  r.detail = detail::fmt(
      "KS distance %.3e (limit %.3e) over %d grid times, %lld paths", ks,
      r.tolerance, K, static_cast<long long>(cfg.n_paths));
  return r;
}

// Criterion 6: dropping sigma by e^{-lambda T} shifts the cycling
// prefactor by exactly one period.
inline CriterionResult check_cycling_recurrence(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "cycling-recurrence";
  r.tolerance = tol.cycling_dev;

  const ModelSpec base = detail::analytic_model();
  const ModelSpec m6(base.a, base.g, base.delta1, base.delta2, std::exp(-6.0));
  const ModelSpec m7(base.a, base.g, base.delta1, base.delta2, std::exp(-7.0));
  const TheoryContext c6 = make_theory_context(m6);
  const TheoryContext c7 = make_theory_context(m7);
  const double T = base.period();
  const double step = T / 512.0;

  double dev = 0.0;
  std::size_t i6 = 0, i7 = 0;
  double f6max = -1.0, f7max = -1.0;
  for (int i = 0; i < 512; ++i) {
    const double t = 20.0 + i * step;
    const double f6 = cycling_prefactor_laplace(c6, t);
    const double f7 = cycling_prefactor_laplace(c7, t + T);
    dev = std::max(dev, std::fabs(f6 / f7 - 1.0));
    if (f6 > f6max) {
      f6max = f6;
      i6 = std::size_t(i);
    }
    if (f7 > f7max) {
      f7max = f7;
      i7 = std::size_t(i);
    }
  }
  const double shift_err = std::fabs(double(i7) - double(i6)) * step;

  r.measured = dev;
  r.seconds = sw.elapsed();
  r.pass = dev <= r.tolerance && shift_err <= step + 1e-12 && r.seconds < 5.0;
  r.detail = detail::fmt(
      "recurrence deviation %.3e (limit %.0e); argmax shift T%+.6f "
      "(cell %.2e)",
      dev, r.tolerance, shift_err, step);
  return r;
}

struct McTheoryResults {
  CriterionResult shape;
  CriterionResult transient;
};

// Criteria 7 and 8 share one large reference-scenario run: per-period bin
// masses against the cycling density, and the cumulative passage
// probability against the early-time bound.
inline McTheoryResults check_mc_against_theory(int threads,
                                               const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  McTheoryResults out;
  out.shape.name = "mc-theory-shape";
  out.shape.tolerance = tol.pearson_r;
  out.transient.name = "transient-bound";
  out.transient.tolerance = 1.0;

  const Scenario sc = reference_scenario();
  SimConfig cfg = sc.sim;
  cfg.threads = threads;
  const SimulationResult sim = simulate(sc.model, cfg);
  const TheoryContext ctx = make_theory_context(sc.model);

  const int sub = cfg.substeps_per_period;
  const int K = sub * cfg.t_max_periods;
  // Bin layout: 8 bins per period, anchored a sixteenth of a period past
  // the integer so no bin edge sits on the density's generation step.
  // Period n spans substeps (48n+3, 48n+51]; 6 substeps per bin.
  const int first_period = 4, last_period = 30;
  const int n_periods = last_period - first_period + 1;
  std::vector<std::uint64_t> counts(std::size_t(n_periods) * 8, 0);
  std::vector<std::uint64_t> by_substep(std::size_t(K) + 1, 0);
  for (const PathOutcome& o : sim.outcomes) {
    if (std::isnan(o.tau_plus)) continue;
    const long long k = std::llround(o.tau_plus * sub);
    if (k >= 1 && k <= K) by_substep[std::size_t(k)] += 1;
    const long long m = k - 3;
    if (m < 1) continue;
    const long long n = (m - 1) / sub;
    if (n < first_period || n > last_period) continue;
    const std::size_t j = std::size_t(((m - 1) % sub) / 6);
    counts[std::size_t(n - first_period) * 8 + j] += 1;
  }

  // Theory masses for the same bins; the integrand's sum index steps at
  // integer times, so the bin containing one is split there.
  auto dens = [&](double t) { return p_plus_laplace(ctx, t).value; };
  std::vector<double> th_mass(std::size_t(n_periods) * 8, 0.0);
  for (int n = first_period; n <= last_period; ++n) {
    for (int j = 0; j < 8; ++j) {
      const double lo = n + 1.0 / 16.0 + j / 8.0;
      const double hi = lo + 1.0 / 8.0;
      const double cut = std::ceil(lo);
      double mass;
      if (cut > lo && cut < hi)
        mass = integrate(dens, lo, cut, 1e-9, 0.0).value +
               integrate(dens, cut, hi, 1e-9, 0.0).value;
      else
        mass = integrate(dens, lo, hi, 1e-9, 0.0);
      th_mass[std::size_t(n - first_period) * 8 + std::size_t(j)] = mass;
    }
  }

  // Keep periods with enough events for the bin masses to have shape.
  std::vector<std::pair<double, double>> pts;
  int kept = 0;
  double mc_total = 0.0, th_total = 0.0;
  for (int p = 0; p < n_periods; ++p) {
    std::uint64_t events = 0;
    for (int j = 0; j < 8; ++j) events += counts[std::size_t(p) * 8 + j];
    mc_total += double(events) / double(cfg.n_paths);
    for (int j = 0; j < 8; ++j) th_total += th_mass[std::size_t(p) * 8 + j];
    if (events < 200) continue;
    ++kept;
    for (int j = 0; j < 8; ++j)
      pts.emplace_back(double(counts[std::size_t(p) * 8 + j]) /
                           double(cfg.n_paths),
                       th_mass[std::size_t(p) * 8 + j]);
  }
  const double r = detail::pearson(pts);
  const double ratio = mc_total / th_total;
  const bool ratio_ok = ratio >= 1.0 / tol.mass_factor && ratio <= tol.mass_factor;

  out.shape.measured = r;
  out.shape.seconds = sw.elapsed();
  out.shape.pass = r >= tol.pearson_r && ratio_ok && out.shape.seconds < 900.0;
  out.shape.detail = detail::fmt(
      "Pearson r %.4f (need >= %.2f) over %d periods x 8 bins; total mass "
      "MC/theory %.3f (window [%.2f, %.0f])",
      r, tol.pearson_r, kept, ratio, 1.0 / tol.mass_factor, tol.mass_factor);

  // Criterion 8 on the same run: before the dynamics has contracted the
  // initial spread, the cumulative passage probability must stay under
  // the early-time bound, up to sampling error.
  detail::Stopwatch sw8;
  const double eta = -std::log(sc.model.sigma);
  const double z99 = 2.5758293035489004;  // two-sided 99% normal quantile
  double worst = 0.0, t_until = 0.0;
  std::uint64_t cum = 0;
  int npts = 0;
  for (int k = 1; k <= K; ++k) {
    const double t = double(k) / sub;
    if (!(alpha(sc.model, t) < 2.0 * eta)) break;
    cum += by_substep[std::size_t(k)];
    const double F = double(cum) / double(cfg.n_paths);
    const double se = std::sqrt(std::max(F * (1.0 - F), 0.0) /
                                double(cfg.n_paths));
    const double bound = p_plus_transient_bound(ctx, t).value;
    worst = std::max(worst, (F - z99 * se) / bound);
    t_until = t;
    ++npts;
  }

  out.transient.measured = worst;
  out.transient.seconds = sw8.elapsed();
  out.transient.pass = worst <= 1.0;
  out.transient.detail = detail::fmt(
      "max (F - z99 se)/bound = %.3e (limit 1) over %d times up to t = %.3f",
      worst, npts, t_until);
  return out;
}

// Criterion 9: raising eta by one log-period while dropping two terms
// leaves the finite sum unchanged at canonical phases.
inline CriterionResult check_sum_periodicity(const Tolerances& tol = {}) {
  detail::Stopwatch sw;
  CriterionResult r;
  r.name = "sum-periodicity";
  r.tolerance = tol.sum_recurrence;

  double worst = 0.0;
  const std::pair<double, double> phases[] = {{0.0, 0.0}, {0.4, 0.2}, {0.9, 0.7}};
  for (auto [tb, th0] : phases) {
    SumParams a;
    a.n = 40;
    a.eta = 3.0 + 1.0;
    a.lambdaT = 1.0;
    a.theta_bar = tb;
    a.theta0 = th0;
    SumParams b = a;
    b.n = 38;
    b.eta = 3.0;
    const double va = S_tilde(a), vb = S_tilde(b);
    worst = std::max(worst, std::fabs(va - vb) / vb);
  }

  r.measured = worst;
  r.seconds = sw.elapsed();
  r.pass = worst <= r.tolerance && r.seconds < 1.0;
  r.detail = detail::fmt(
      "max relative recurrence defect %.3e (limit %.0e) at n = 40, eta = 3",
      worst, r.tolerance);
  return r;
}

inline std::string format_criterion(const CriterionResult& r) {
  return detail::fmt("%s %-20s %s [%.1f s]", r.pass ? "PASS" : "FAIL",
                     r.name.c_str(), r.detail.c_str(), r.seconds);
}

// The full suite in criterion order. skip_mc drops the two sampler-backed
// criteria, leaving an analytic-only run that finishes in seconds.
inline std::vector<CriterionResult> run_all_criteria(int threads,
                                                     bool skip_mc = false,
                                                     const Tolerances& tol = {}) {
  std::vector<CriterionResult> out;
  out.push_back(check_profile_dual(tol));
  out.push_back(check_normalization(tol));
  out.push_back(check_variance_engine(tol));
  out.push_back(check_volterra_oracle(tol));
  if (!skip_mc) out.push_back(check_simulator_exactness(threads, tol));
  out.push_back(check_cycling_recurrence(tol));
  if (!skip_mc) {
    McTheoryResults mt = check_mc_against_theory(threads, tol);
    out.push_back(std::move(mt.shape));
    out.push_back(std::move(mt.transient));
  }
  out.push_back(check_sum_periodicity(tol));
  return out;
}

}  // namespace passage
