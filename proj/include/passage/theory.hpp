#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "passage/hypotheses.hpp"
#include "passage/profile.hpp"
#include "passage/quadrature.hpp"
#include "passage/variances.hpp"
#include "passage/volterra.hpp"

// Closed-form first-passage densities of the two-level system and the
// machinery around them: the density of leaving the stable branch, the
// crossing laws of the unstable branch, the per-period passage density in
// its finite-sum and bilateral forms, the transient upper bound, regime
// classification, and the renewal series assembling the exact passage
// density from first-passage blocks.
//
// Undetermined constants in correction terms are fixed as documented at
// each site: multiplicative factors are taken as 1 (10 for hard upper
// bounds), exponential decay rates as 1/4. Corrections are always reported
// separately from the leading value, never folded in.

namespace passage {

namespace detail {
constexpr double kSqrtTwoPi = 2.506628274631000502415765;
}  // namespace detail

// Requested density lies outside the validity window of its formula.
class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Leading-order density value with its correction bracket. rel_bound is the
// relative half-width of the bracket; flagged marks values whose variance
// margin hypothesis failed, so the true prefactor may be smaller than the
// leading term and the bracket is unavailable.
struct DensityValue {
  double value = 0.0;
  double rel_bound = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
};

// Time grid with density values and a provenance tag
// (theory-metastable | theory-laplace | volterra | mc-histogram).
struct DensityGrid {
  std::vector<double> times;
  std::vector<double> values;
  std::string meta;
};

inline DensityGrid make_density_grid(std::vector<double> times,
                                     std::vector<double> values,
                                     std::string meta) {
  if (times.size() != values.size())
    throw std::invalid_argument("DensityGrid: size mismatch");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("DensityGrid: times must increase strictly");
  }
  for (double v : values) {
    if (!(v >= 0.0))
      throw std::invalid_argument("DensityGrid: values must be nonnegative");
  }
  return {std::move(times), std::move(values), std::move(meta)};
}

// Read-only bundle shared by the density functions: the model, its rate
// report, and the hypothesis margins. beta is the decay-rate constant in
// the upper validity limit of the metastable window.
struct TheoryContext {
  ModelSpec spec;
  RateReport rate;
  HypothesisReport hyp;
  double beta = 0.25;
};

inline TheoryContext make_theory_context(const ModelSpec& spec,
                                         double beta = 0.25) {
  if (!(beta > 0.0))
    throw std::invalid_argument("make_theory_context: beta must be positive");
  return {spec, find_rate_minimum(spec), check_hypotheses(spec), beta};
}

inline double log_sigma_abs(double sigma) { return std::fabs(std::log(sigma)); }

// Density of the first passage from the stable branch to the switching
// level 1 - delta1, started on the branch at time 0:
//   psi_minus(s) = (1/sigma) c_minus(s) e^{-rho_minus(s)^2 / 2 sigma^2},
//   rho_minus^2  = (2-delta1)^2 / v_minus(s,0),
//   c_minus      = [(2-delta1)/sqrt(2 pi)] [1/v_minus - 1/(2 v_star)]
//                  g(s)^2 / sqrt(v_minus).
// The bracket is (1/Delta)(sigma/Delta^2 + e^{-Delta^2/4 sigma^2} s/sigma),
// valid while the variance margin Delta of the hypothesis report is
// positive; otherwise the value is flagged.
inline DensityValue psi_minus(const TheoryContext& ctx, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("psi_minus: requires s >= 0");
  DensityValue out;
  if (s == 0.0) return out;
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  const double vm = v_minus(spec, s, 0.0);
  if (vm <= 0.0) return out;
  const double d1 = spec.delta1;
  const double gs = spec.g(s);
  const double rho2 = (2.0 - d1) * (2.0 - d1) / vm;
  const double c = (2.0 - d1) / detail::kSqrtTwoPi *
                   (1.0 / vm - 0.5 / v_star(spec, s)) * gs * gs /
                   std::sqrt(vm);
  out.value = c * std::exp(-rho2 / (2.0 * sigma * sigma)) / sigma;
  const double D = ctx.hyp.Delta;
  if (D > 0.0) {
    out.rel_bound = (sigma / (D * D) +
                     std::exp(-D * D / (4.0 * sigma * sigma)) * s / sigma) /
                    D;
  } else {
    out.flagged = true;
  }
  // Negative prefactor means v_minus exceeded 2 v_star: the formula is
  // outside its hypothesis and only the flag is meaningful.
  if (c < 0.0) out.flagged = true;
  return out;
}

// Distribution function of the first crossing of +1 by the unstable-branch
// process started at 1 - delta1 at time s (no switching):
//   2 Phi(-rho_plus / sigma),  rho_plus^2 = delta1^2 / v_hat_plus(t, s).
inline double crossing_cdf_plus(const ModelSpec& spec, double t, double s) {
  if (!(t >= s))
    throw std::invalid_argument("crossing_cdf_plus: requires t >= s");
  if (t == s) return 0.0;
  const double vh = v_hat_plus(spec, t, s);
  if (vh <= 0.0) return 0.0;
  return std::erfc(spec.delta1 / (spec.sigma * std::sqrt(2.0 * vh)));
}

// Density of the crossing law above:
//   (1/sigma) (delta1/sqrt(2 pi)) g(t)^2 e^{-2 alpha(t,s)}
//   v_hat_plus(t,s)^{-3/2} e^{-rho_plus^2 / 2 sigma^2}.
inline double crossing_density_plus(const ModelSpec& spec, double t,
                                    double s) {
  if (!(t >= s))
    throw std::invalid_argument("crossing_density_plus: requires t >= s");
  if (t == s) return 0.0;
  const double vh = v_hat_plus(spec, t, s);
  if (vh <= 0.0) return 0.0;
  const double gt = spec.g(t);
  const double d1 = spec.delta1;
  const double rho2 = d1 * d1 / vh;
  return d1 / detail::kSqrtTwoPi * gt * gt *
         std::exp(-2.0 * alpha(spec, t, s)) / (vh * std::sqrt(vh)) *
         std::exp(-rho2 / (2.0 * spec.sigma * spec.sigma)) / spec.sigma;
}

// Exponential rate of the first passage from 1 - delta1 down to 1 - delta2:
//   rho_down(u,s)^2 = [delta1 - delta2 e^{-alpha(u,s)}]^2 / v_hat_plus(u,s).
// Vanishes exactly where e^{-alpha(u,s)} = delta1/delta2, the time by which
// most paths have reached the lower level.
inline double psi_down_rate(const ModelSpec& spec, double u, double s) {
  if (!(u > s)) throw std::invalid_argument("psi_down_rate: requires u > s");
  const double num =
      spec.delta1 - spec.delta2 * std::exp(-alpha(spec, u, s));
  const double vh = v_hat_plus(spec, u, s);
  if (vh <= 0.0) return std::numeric_limits<double>::infinity();
  return num * num / vh;
}

// Density of reaching +1 before falling back to 1 - delta2, started at
// 1 - delta1 at time s. The leading term is the unconditioned crossing
// density; the bracket bounds the killed-path correction,
// e^{-alpha(t,s) - Delta0^2/4 sigma^2} / (sigma c_lead), and requires the
// variance margin hypothesis. When that fails the value is still returned
// but flagged: the true prefactor may be smaller.
inline DensityValue p1_density(const TheoryContext& ctx, double t, double s) {
  if (!(t > s)) throw std::invalid_argument("p1_density: requires t > s");
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  DensityValue out;
  const double vh = v_hat_plus(spec, t, s);
  if (vh <= 0.0) return out;
  const double gt = spec.g(t);
  const double d1 = spec.delta1;
  const double a_ts = alpha(spec, t, s);
  const double c_lead = d1 * gt * gt * std::exp(-2.0 * a_ts) /
                        (detail::kSqrtTwoPi * vh * std::sqrt(vh));
  const double rho2 = d1 * d1 / vh;
  out.value = c_lead * std::exp(-rho2 / (2.0 * sigma * sigma)) / sigma;
  const double D0 = ctx.hyp.Delta0;
  if (ctx.hyp.h3.pass && D0 > 0.0 && c_lead > 0.0) {
    out.rel_bound =
        std::exp(-a_ts - D0 * D0 / (4.0 * sigma * sigma)) / (sigma * c_lead);
  } else {
    out.flagged = true;
  }
  return out;
}

// Exponential rates of the two renewal-kernel legs between times v < u,
// and the resulting uniform kernel bound.
//   rho_up_sq:      climb from 1 - delta2 back to 1 - delta1 on the
//                   stable branch, [(2-d1) - (2-d2) e^{-alpha}]^2 / v_minus.
//   rho_up_plus_sq: same passage for the unstable-branch process,
//                   [d2 - d1 e^{-alpha}]^2 / v_hat_plus.
// The second never exceeds the first when the level-symmetry hypothesis
// holds. The kernel magnitude obeys
//   K <= (10/sigma) e^{-(d2-d1)^2 / 2 vbar sigma^2}
// with the constant fixed at 10.
struct KernelRates {
  double rho_up_sq = 0.0;
  double rho_up_plus_sq = 0.0;
  double kernel_bound = 0.0;
};

inline KernelRates kernel_rates(const TheoryContext& ctx, double u, double v) {
  if (!(u > v)) throw std::invalid_argument("kernel_rates: requires u > v");
  const ModelSpec& spec = ctx.spec;
  const double d1 = spec.delta1, d2 = spec.delta2;
  const double xi = std::exp(-alpha(spec, u, v));
  KernelRates kr;
  const double num_up = (2.0 - d1) - (2.0 - d2) * xi;
  const double vm = v_minus(spec, u, v);
  kr.rho_up_sq = vm > 0.0 ? num_up * num_up / vm
                          : std::numeric_limits<double>::infinity();
  const double num_upp = d2 - d1 * xi;
  const double vh = v_hat_plus(spec, u, v);
  kr.rho_up_plus_sq = vh > 0.0 ? num_upp * num_upp / vh
                               : std::numeric_limits<double>::infinity();
  const double sigma = spec.sigma;
  kr.kernel_bound =
      10.0 / sigma *
      std::exp(-(d2 - d1) * (d2 - d1) /
               (2.0 * ctx.hyp.vbar * sigma * sigma));
  return kr;
}

// Combined exponential rate of the two legs of a passage through time s:
// delta1^2 / v_hat_plus(t,s) + (2-delta1)^2 / v_minus(s,0). Approaches the
// periodic rate rho_per(s)^2 when both s and t - s are large.
inline double rho0_sq(const ModelSpec& spec, double t, double s) {
  if (!(t >= s && s > 0.0))
    throw std::invalid_argument("rho0_sq: requires t >= s > 0");
  const double d1 = spec.delta1;
  return d1 * d1 / v_hat_plus(spec, t, s) +
         (2.0 - d1) * (2.0 - d1) / v_minus(spec, s, 0.0);
}

namespace detail {

inline void require_usable_minimum(const RateReport& rate, const char* who) {
  if (rate.degenerate)
    throw std::domain_error(std::string(who) +
                            ": rate minimum is degenerate, no cycling "
                            "expansion exists");
}

}  // namespace detail

// Subexponential prefactor of the per-period passage density in finite-sum
// form, with the convention p = sigma * prefactor * e^{-R^2/2 sigma^2}:
//   C(s_star) (g(t)^2 / v_hat_per_plus(t)) S_tilde(n, |log sigma|, t).
// Valid for t in generation n = floor(t/T) with n >= 4 and
// n lambda T >= 2 |log sigma|.
inline double cycling_prefactor_laplace(const TheoryContext& ctx, double t) {
  detail::require_usable_minimum(ctx.rate, "cycling_prefactor_laplace");
  const ModelSpec& spec = ctx.spec;
  const double T = spec.period();
  const double lamT = ctx.rate.lambda * T;
  const double eta = log_sigma_abs(spec.sigma);
  if (!(t >= 0.0))
    throw std::invalid_argument("cycling_prefactor_laplace: requires t >= 0");
  const int n = static_cast<int>(std::floor(t / T));
  if (n < 4 || double(n) * lamT < 2.0 * eta) {
    throw RegimeError(
        "cycling prefactor: time is in the transient window (need n >= 4 "
        "and n lambda T >= 2 |log sigma|); use p_plus_transient_bound");
  }
  SumParams sp;
  sp.n = n;
  sp.eta = eta;
  sp.t = t;
  sp.lambdaT = lamT;
  sp.gamma0 = ctx.rate.gamma0;
  sp.gamma_t = gamma_t(spec, ctx.rate, t);
  sp.theta0 = ctx.rate.theta0;
  sp.theta_bar = theta_bar(spec, ctx.rate, t);
  return ctx.rate.C * spec.g(t) * spec.g(t) /
         v_hat_per_plus(spec, t) * S_tilde(sp);
}

// Per-period passage density, finite-sum form. The bracket is O(sigma).
inline DensityValue p_plus_laplace(const TheoryContext& ctx, double t) {
  const double sigma = ctx.spec.sigma;
  const double pref = cycling_prefactor_laplace(ctx, t);
  DensityValue out;
  const double R = ctx.rate.R;
  out.value = sigma * pref * std::exp(-R * R / (2.0 * sigma * sigma));
  out.rel_bound = sigma;
  return out;
}

// Validity gates of the metastable closed form; throws RegimeError with the
// failing condition. Requires the bilateral extension of the finite sum to
// be justified: at least one full peak inside the window,
// |log sigma| - theta_bar(t) >= lambda T.
inline void require_metastable_window(const TheoryContext& ctx, double t,
                                      const char* who) {
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  const double eta = log_sigma_abs(sigma);
  const double at = alpha(spec, t);
  if (!(at >= 2.0 * eta)) {
    throw RegimeError(std::string(who) +
                      ": alpha(t) < 2 |log sigma| (transient window); use "
                      "p_plus_transient_bound");
  }
  const double D0 = ctx.hyp.Delta0;
  if (!(D0 > 0.0)) {
    throw RegimeError(std::string(who) +
                      ": no positive margin Delta0, metastable window "
                      "undefined");
  }
  // alpha(t) < sigma^3 e^{beta Delta0^2 / 2 sigma^2}, compared in logs so
  // the right side may exceed double range.
  const double log_limit =
      3.0 * std::log(sigma) + ctx.beta * D0 * D0 / (2.0 * sigma * sigma);
  if (!(std::log(at) < log_limit)) {
    throw RegimeError(std::string(who) +
                      ": alpha(t) beyond the metastable upper limit "
                      "sigma^3 e^{beta Delta0^2/2 sigma^2}");
  }
  const double lamT = ctx.rate.lambda * spec.period();
  if (!(eta - theta_bar(spec, ctx.rate, t) >= lamT)) {
    throw RegimeError(std::string(who) +
                      ": |log sigma| - theta_bar(t) < lambda T, bilateral "
                      "extension of the finite sum not justified");
  }
}

// Subexponential prefactor of the metastable closed form, same convention
// as the finite-sum version: C0 theta'(t) P((|log sigma| - theta(t)) / lambda T).
inline double cycling_prefactor_metastable(const TheoryContext& ctx,
                                           double t) {
  detail::require_usable_minimum(ctx.rate, "cycling_prefactor_metastable");
  require_metastable_window(ctx, t, "cycling_prefactor_metastable");
  const ModelSpec& spec = ctx.spec;
  const double lamT = ctx.rate.lambda * spec.period();
  const double eta = log_sigma_abs(spec.sigma);
  const double x = (eta - theta(spec, ctx.rate, t)) / lamT;
  return ctx.rate.C0 * theta_prime(spec, t) * profile_sum({lamT}, x);
}

// Metastable passage density. The bracket is sigma + e^{-alpha(t)}/sigma^2.
inline DensityValue p_plus_metastable(const TheoryContext& ctx, double t) {
  const double sigma = ctx.spec.sigma;
  const double pref = cycling_prefactor_metastable(ctx, t);
  DensityValue out;
  const double R = ctx.rate.R;
  out.value = sigma * pref * std::exp(-R * R / (2.0 * sigma * sigma));
  out.rel_bound =
      sigma + std::exp(-alpha(ctx.spec, t)) / (sigma * sigma);
  return out;
}

// Upper bound on the passage density in the transient window
// alpha(t) < 2 |log sigma|:
//   10 (1/sigma^2) exp{-L e^{-alpha(t)} / 2 sigma^2} e^{-R^2/2 sigma^2},
//   L = 2 beta1 beta2,
//   beta1 = delta1 sqrt(v_hat_per_plus(t)) / vbar,
//   beta2 = (2-delta1) sqrt(v_per_minus(0)) / vbar.
// The leading constant 10 is fixed here; a regime-boundary comparison
// against the continued cycling density shows ample headroom.
struct TransientBound {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double L = 0.0;
  double value = 0.0;
};

inline TransientBound p_plus_transient_bound(const TheoryContext& ctx,
                                             double t) {
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  const double vbar = ctx.hyp.vbar;
  if (!(vbar > 0.0))
    throw std::domain_error("p_plus_transient_bound: vbar unavailable");
  TransientBound tb;
  tb.beta1 = spec.delta1 * std::sqrt(v_hat_per_plus(spec, t)) / vbar;
  tb.beta2 = (2.0 - spec.delta1) * std::sqrt(v_per_minus(spec, 0.0)) / vbar;
  tb.L = 2.0 * tb.beta1 * tb.beta2;
  const double R = ctx.rate.R;
  const double two_sig_sq = 2.0 * sigma * sigma;
  tb.value = 10.0 / (sigma * sigma) *
             std::exp(-tb.L * std::exp(-alpha(spec, t)) / two_sig_sq) *
             std::exp(-R * R / two_sig_sq);
  return tb;
}

enum class Regime { transient, metastable, asymptotic };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::transient: return "transient";
    case Regime::metastable: return "metastable";
    default: return "asymptotic";
  }
}

// Classification thresholds: transient while alpha(t) < 2 |log sigma|,
// asymptotic once alpha(t) >= e^{R / 2 sigma^2} (constant fixed at 1),
// metastable between. metastable_limit carries the upper validity bound of
// the closed form, sigma^3 e^{beta Delta0^2 / 2 sigma^2}; times between
// that limit and the asymptotic threshold keep the metastable label even
// though the closed form is no longer proven there.
struct RegimeClassification {
  double t = 0.0;
  Regime regime = Regime::transient;
  double transient_until = 0.0;   // time scale 2 |log sigma| / lambda
  double metastable_limit = 0.0;  // bound on alpha(t), may be inf
};

inline RegimeClassification classify_regime(const TheoryContext& ctx,
                                            double t) {
  if (!(t >= 0.0))
    throw std::invalid_argument("classify_regime: requires t >= 0");
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  const double eta = log_sigma_abs(sigma);
  RegimeClassification rc;
  rc.t = t;
  rc.transient_until = 2.0 * eta / ctx.rate.lambda;
  const double D0 = ctx.hyp.Delta0;
  rc.metastable_limit =
      D0 > 0.0 ? sigma * sigma * sigma *
                     std::exp(std::min(709.0, ctx.beta * D0 * D0 /
                                                  (2.0 * sigma * sigma)))
               : std::numeric_limits<double>::quiet_NaN();
  const double at = alpha(spec, t);
  if (at < 2.0 * eta) {
    rc.regime = Regime::transient;
  } else if (at > 0.0 &&
             std::log(at) >= ctx.rate.R / (2.0 * sigma * sigma)) {
    rc.regime = Regime::asymptotic;
  } else {
    rc.regime = Regime::metastable;
  }
  return rc;
}

// First-passage problem solved by psi_minus: the drift-free transform
// z = e^{alpha(t)}(y + 1) of the stable branch started at -1 has variance
// sigma^2 v(t) with v(t) = Int_0^t e^{2 alpha(w)} g(w)^2 dw and reaches
// 1 - delta1 exactly when z reaches d(t) = (2 - delta1) e^{alpha(t)}.
// v is tabulated once (cumulative Gauss panels, cubic Hermite in between);
// everything else is closed form.
namespace detail {

// Cubic Hermite table of a function on [0, L] with known derivative,
// built by accumulating one Gauss panel per step.
struct C1Table {
  double h = 1.0;
  std::vector<double> y;
  std::vector<double> yp;

  double operator()(double x) const {
    const double u = x / h;
    if (u <= 0.0) return y.front();
    const std::size_t n = y.size();
    if (u >= double(n - 1)) return y.back();
    const std::size_t k = static_cast<std::size_t>(u);
    const double w = u - double(k);
    const double w2 = w * w, w3 = w2 * w;
    return (2.0 * w3 - 3.0 * w2 + 1.0) * y[k] +
           (w3 - 2.0 * w2 + w) * h * yp[k] +
           (-2.0 * w3 + 3.0 * w2) * y[k + 1] + (w3 - w2) * h * yp[k + 1];
  }
};

template <class F>
C1Table build_c1_table(F&& deriv, double length, int n_steps) {
  C1Table tab;
  tab.h = length / n_steps;
  tab.y.resize(std::size_t(n_steps) + 1);
  tab.yp.resize(std::size_t(n_steps) + 1);
  tab.y[0] = 0.0;
  tab.yp[0] = deriv(0.0);
  for (int k = 0; k < n_steps; ++k) {
    tab.y[std::size_t(k) + 1] =
        tab.y[k] + gauss16(deriv, k * tab.h, (k + 1) * tab.h);
    tab.yp[std::size_t(k) + 1] = deriv((k + 1) * tab.h);
  }
  return tab;
}

}  // namespace detail

inline FptProblem model_psi_minus_problem(const ModelSpec& spec, double t_max,
                                          int n_table = 4096) {
  if (!(t_max > 0.0))
    throw std::invalid_argument("model_psi_minus_problem: t_max must be > 0");
  const PeriodicFunction a = spec.a;
  const PeriodicFunction g = spec.g;
  auto vp = [a, g](double t) {
    const double gt = g(t);
    return std::exp(2.0 * a.primitive(t)) * gt * gt;
  };
  auto tab = std::make_shared<detail::C1Table>(
      detail::build_c1_table(vp, t_max, n_table));
  const double d1 = spec.delta1;
  FptProblem p;
  p.v = [tab](double t) { return (*tab)(t); };
  p.v_prime = vp;
  p.d = [a, d1](double t) {
    return (2.0 - d1) * std::exp(a.primitive(t));
  };
  p.d_prime = [a, d1](double t) {
    return (2.0 - d1) * a(t) * std::exp(a.primitive(t));
  };
  p.sigma = spec.sigma;
  return p;
}

// First-passage problem of the down-switch from 1 - delta1 at time s to
// 1 - delta2, in the time offset tau = u - s: the transform
// z = delta1 + e^{-alpha(u,s)}(y - 1) of the unstable branch has variance
// sigma^2 v_hat_plus(s + tau, s) and reaches the lower level exactly when
// -z reaches d(tau) = delta2 e^{-alpha(s+tau,s)} - delta1. The boundary
// starts at delta2 - delta1 > 0 and crosses zero where
// alpha(s+tau, s) = log(delta2/delta1); only v needs monotonicity.
inline FptProblem model_psi_down_problem(const ModelSpec& spec, double s,
                                         double t_max, int n_table = 2048) {
  if (!(t_max > 0.0))
    throw std::invalid_argument("model_psi_down_problem: t_max must be > 0");
  const PeriodicFunction a = spec.a;
  const PeriodicFunction g = spec.g;
  const double Ps = spec.a.primitive(s);
  auto vp = [a, g, s, Ps](double tau) {
    const double gt = g(s + tau);
    return std::exp(-2.0 * (a.primitive(s + tau) - Ps)) * gt * gt;
  };
  auto tab = std::make_shared<detail::C1Table>(
      detail::build_c1_table(vp, t_max, n_table));
  const double d1 = spec.delta1, d2 = spec.delta2;
  FptProblem p;
  p.v = [tab](double tau) { return (*tab)(tau); };
  p.v_prime = vp;
  p.d = [a, s, Ps, d1, d2](double tau) {
    return d2 * std::exp(-(a.primitive(s + tau) - Ps)) - d1;
  };
  p.d_prime = [a, s, Ps, d2](double tau) {
    return -d2 * a(s + tau) * std::exp(-(a.primitive(s + tau) - Ps));
  };
  p.sigma = spec.sigma;
  return p;
}

// First-passage problem of the climb from 1 - delta2 at time v0 back up to
// 1 - delta1 along the stable branch, in the offset tau = u - v0: the
// transform z = e^{alpha(u,v0)}(y + 1) - (2 - delta2) has variance
// sigma^2 Int_0^tau e^{2 alpha(v0+w,v0)} g^2 dw and reaches the switching
// level when z reaches d(tau) = (2-delta1) e^{alpha(v0+tau,v0)} - (2-delta2).
inline FptProblem model_psi_up_problem(const ModelSpec& spec, double v0,
                                       double t_max, int n_table = 2048) {
  if (!(t_max > 0.0))
    throw std::invalid_argument("model_psi_up_problem: t_max must be > 0");
  const PeriodicFunction a = spec.a;
  const PeriodicFunction g = spec.g;
  const double P0 = spec.a.primitive(v0);
  auto vp = [a, g, v0, P0](double tau) {
    const double gt = g(v0 + tau);
    return std::exp(2.0 * (a.primitive(v0 + tau) - P0)) * gt * gt;
  };
  auto tab = std::make_shared<detail::C1Table>(
      detail::build_c1_table(vp, t_max, n_table));
  const double d1 = spec.delta1, d2 = spec.delta2;
  FptProblem p;
  p.v = [tab](double tau) { return (*tab)(tau); };
  p.v_prime = vp;
  p.d = [a, v0, P0, d1, d2](double tau) {
    return (2.0 - d1) * std::exp(a.primitive(v0 + tau) - P0) - (2.0 - d2);
  };
  p.d_prime = [a, v0, P0, d1](double tau) {
    return (2.0 - d1) * a(v0 + tau) * std::exp(a.primitive(v0 + tau) - P0);
  };
  p.sigma = spec.sigma;
  return p;
}

namespace detail {

// Density values of a Volterra solution at arbitrary offsets: the prefactor
// is interpolated linearly on the solve grid (constant below the first
// node) and recombined with the exact exponential of the problem.
struct PsiInterp {
  FptProblem prob;
  VolterraSolution sol;

  double operator()(double tau) const {
    if (tau <= 0.0) return 0.0;
    const double h = sol.grid.front();
    const double x = tau / h;
    double c;
    const std::size_t n = sol.c.size();
    if (x <= 1.0) {
      c = sol.c.front();
    } else if (x >= double(n)) {
      c = sol.c.back();
    } else {
      const std::size_t k = static_cast<std::size_t>(x - 1.0);
      const double w = x - double(k + 1);
      c = sol.c[k] * (1.0 - w) + sol.c[k + 1] * w;
    }
    const double v = prob.v(tau);
    if (v <= 0.0) return 0.0;
    const double d = prob.d(tau);
    return c * std::exp(-d * d / (2.0 * prob.sigma * prob.sigma * v)) /
           prob.sigma;
  }
};

inline PsiInterp make_psi_interp(FptProblem prob, double horizon, int n) {
  VolterraSolution sol = solve_second_kind(prob, horizon, n);
  return {std::move(prob), std::move(sol)};
}

}  // namespace detail

// Renewal series for the density q(t,s) of reaching +1 at t from 1 - delta1
// at s, with any number of intermediate excursions below 1 - delta2:
//   q = p1 + sum_n Int_s^t p1(t,u) K_n(u,s) du,
//   K(u,s) = Int_s^u psi_up(u,w) psi_down(w,s) dw.
// The unkilled down density stands in for its killed variant, so the
// corrections carry a slight upward bias. The first correction is computed
// by nested quadrature (outer Gauss panels doubled until stable to 1e-8
// relative, fresh Volterra solves per outer node); deeper terms, when their
// geometric estimate exceeds 1e-12 of the running sum, come from a shared
// triangular kernel table at coarser accuracy, and otherwise stay inside
// remainder_bound.
struct RenewalResult {
  double p1 = 0.0;
  std::vector<double> terms;     // computed corrections, first N of them
  double q = 0.0;                // p1 + sum of computed terms
  double remainder_bound = 0.0;  // M^N (t-s)^N / N!
  double kernel_sup = 0.0;       // M, the uniform kernel bound
  double sandwich_lo = 0.0;      // leading prefactor alone
  double sandwich_hi = 0.0;      // with the documented constant 10
};

inline RenewalResult renewal_series(const TheoryContext& ctx, double t,
                                    double s, int N) {
  if (!(t > s)) throw std::invalid_argument("renewal_series: requires t > s");
  if (N < 0) throw std::invalid_argument("renewal_series: requires N >= 0");
  const ModelSpec& spec = ctx.spec;
  const double sigma = spec.sigma;
  const double span = t - s;

  RenewalResult res;
  res.p1 = p1_density(ctx, t, s).value;
  res.kernel_sup = kernel_rates(ctx, t, s).kernel_bound;

  // M^N (t-s)^N / N! without overflow in the intermediate power.
  double rb = 1.0;
  for (int k = 1; k <= N; ++k) rb *= res.kernel_sup * span / double(k);
  res.remainder_bound = rb;

  const double vh = v_hat_plus(spec, t, s);
  const double rho2 = vh > 0.0
                          ? spec.delta1 * spec.delta1 / vh
                          : std::numeric_limits<double>::infinity();
  const double expo = std::exp(-rho2 / (2.0 * sigma * sigma));
  const double c_lead = res.p1 * sigma / (expo > 0.0 ? expo : 1.0);
  res.sandwich_lo = res.p1;
  const double D0 = ctx.hyp.Delta0;
  if (D0 > 0.0) {
    res.sandwich_hi =
        (c_lead + 10.0 * span / (sigma * sigma) * (1.0 + c_lead) *
                      std::exp(-D0 * D0 / (4.0 * sigma * sigma))) *
        expo / sigma;
  } else {
    res.sandwich_hi = std::numeric_limits<double>::infinity();
  }

  if (N < 1 || res.p1 <= 0.0) {
    res.q = res.p1;
    return res;
  }

  // First correction, nested quadrature. One down solve covers the outer
  // variable; each outer node gets its own up solve.
  const int n_down = 768;
  const int n_up = 192;
  auto down = detail::make_psi_interp(model_psi_down_problem(spec, s, span),
                                      span, n_down);

  auto term1_with = [&](int panels) {
    double sum = 0.0;
    for (int pnl = 0; pnl < panels; ++pnl) {
      const double a0 = s + span * pnl / panels;
      const double b0 = s + span * (pnl + 1) / panels;
      const double mid = 0.5 * (a0 + b0), half = 0.5 * (b0 - a0);
      for (const auto& [x, w] : kGauss16Half) {
        for (double sgn : {-1.0, 1.0}) {
          const double v0 = mid + sgn * half * x;
          const double wt = w * half;
          const double down_v = down(v0 - s);
          if (down_v <= 0.0) continue;
          auto up = detail::make_psi_interp(
              model_psi_up_problem(spec, v0, t - v0), t - v0, n_up);
          const double inner =
              integrate(
                  [&](double u) {
                    return crossing_density_plus(spec, t, u) * up(u - v0);
                  },
                  v0, t, 1e-9, 0.0)
                  .value;
          sum += wt * down_v * inner;
        }
      }
    }
    return sum;
  };

  int panels = std::max(2, int(std::ceil(span / spec.period())));
  double term1 = term1_with(panels);
  for (int r = 0; r < 2; ++r) {
    panels *= 2;
    const double refined = term1_with(panels);
    const double change = std::fabs(refined - term1);
    term1 = refined;
    if (change <= 1e-8 * std::fabs(term1)) break;
  }
  res.terms.push_back(term1);

  // Deeper corrections on a shared triangular kernel table. Endpoint values
  // of every integrand vanish, so plain trapezoid rules suffice at the
  // accuracy these tiny terms need.
  const double ratio = term1 > 0.0 ? term1 / res.p1 : 0.0;
  double est = term1 * ratio;
  int computed = 1;
  if (N >= 2 && est > 1e-12 * (res.p1 + term1)) {
    const int m = 32;
    const double h = span / m;
    std::vector<detail::PsiInterp> dn, up;
    dn.reserve(m);
    up.reserve(m);
    for (int j = 0; j < m; ++j) {
      const double wj = s + j * h;
      dn.push_back(detail::make_psi_interp(
          model_psi_down_problem(spec, wj, t - wj), t - wj, 160));
      up.push_back(detail::make_psi_interp(
          model_psi_up_problem(spec, wj, t - wj), t - wj, 160));
    }
    // K(u_i, v_j) on the node triangle.
    std::vector<std::vector<double>> K(m + 1);
    for (int i = 0; i <= m; ++i) {
      K[i].assign(std::size_t(i) + 1, 0.0);
      for (int j = 0; j < i; ++j) {
        double acc = 0.0;
        for (int k = j + 1; k < i; ++k) {
          acc += up[k](double(i - k) * h) * dn[j](double(k - j) * h);
        }
        K[i][j] = acc * h;
      }
    }
    std::vector<double> p1_nodes(m + 1, 0.0);
    for (int i = 1; i < m; ++i)
      p1_nodes[i] = crossing_density_plus(spec, t, s + i * h);
    std::vector<double> kcur(m + 1);
    for (int i = 0; i <= m; ++i) kcur[i] = K[i][0];
    for (int n = 2; n <= N; ++n) {
      std::vector<double> knext(m + 1, 0.0);
      for (int i = 1; i <= m; ++i) {
        double acc = 0.0;
        for (int k = 1; k < i; ++k) acc += K[i][k] * kcur[k];
        knext[i] = acc * h;
      }
      kcur = std::move(knext);
      double term_n = 0.0;
      for (int i = 1; i < m; ++i) term_n += p1_nodes[i] * kcur[i];
      term_n *= h;
      res.terms.push_back(term_n);
      ++computed;
      if (std::fabs(term_n) <= 1e-12 * res.p1) break;
    }
  }
  (void)computed;

  res.q = res.p1;
  for (double v : res.terms) res.q += v;
  return res;
}

}  // namespace passage
