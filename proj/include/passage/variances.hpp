#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "passage/coefficients.hpp"
#include "passage/quadrature.hpp"

// Variance functions of the linearized dynamics around the two branches,
// the periodic rate function rho_per built from them, and the report of
// its minimum (location, curvature, prefactor constants).
//
// Conventions used throughout:
//   alpha(t, s)        integral of a over [s, t]
//   v_per_minus(t)     periodic variance of the branch attracted to -1
//   v_hat_per_plus(t)  periodic variance of the branch repelled from +1,
//                      in the time-reversed normalization
// Both periodic variances are T-periodic and are evaluated with t reduced
// mod T, so large arguments lose no accuracy.

namespace passage {

inline double alpha(const ModelSpec& spec, double t, double s = 0.0) {
  return spec.a.primitive(t) - spec.a.primitive(s);
}

// Instantaneous equilibrium variance g(t)^2 / (2 a(t)).
inline double v_star(const ModelSpec& spec, double t) {
  double gt = spec.g(t);
  return gt * gt / (2.0 * spec.a(t));
}

namespace detail {

inline double reduce_mod_period(double t, double T) {
  double r = std::fmod(t, T);
  return r < 0.0 ? r + T : r;
}

inline void require_positive_mean(const ModelSpec& spec, const char* who) {
  if (!(spec.lambda() > 0.0)) {
    throw std::domain_error(std::string(who) +
                            ": mean of a must be positive");
  }
}

// Golden-section minimization of f on [lo, hi] to an argument tolerance.
// Returns {argmin, f(argmin)}.
template <class F>
std::pair<double, double> golden_minimize(F&& f, double lo, double hi,
                                          double xtol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > xtol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  double xm = 0.5 * (lo + hi);
  double fm = f(xm);
  if (f1 < fm) {
    xm = x1;
    fm = f1;
  }
  if (f2 < fm) {
    xm = x2;
    fm = f2;
  }
  return {xm, fm};
}

}  // namespace detail

// Periodic variance of the stable branch:
//   v_per_minus(t) = [1 / (1 - e^{-2 lambda T})] *
//                    Int_t^{t+T} e^{-2 alpha(t+T, s)} g(s)^2 ds.
// The exponent is <= 0 on the whole domain.
inline double v_per_minus(const ModelSpec& spec, double t) {
  detail::require_positive_mean(spec, "v_per_minus");
  const double T = spec.period();
  const double lamT = spec.lambda() * T;
  t = detail::reduce_mod_period(t, T);
  // primitive(t + T) == primitive(t) + lambda * T, used in exact form.
  const double head = spec.a.primitive(t) + lamT;
  auto f = [&](double s) {
    double gs = spec.g(s);
    return std::exp(-2.0 * (head - spec.a.primitive(s))) * gs * gs;
  };
  return integrate(f, t, t + T).value / (1.0 - std::exp(-2.0 * lamT));
}

// Periodic variance of the unstable branch, time-reversed normalization:
//   v_hat_per_plus(t) = [1 / (e^{2 lambda T} - 1)] *
//                       Int_t^{t+T} e^{2 alpha(t+T, s)} g(s)^2 ds.
// Evaluated in the equivalent form with exponent 2 alpha(t, s) <= 0, which
// stays finite in the adiabatic regime (large lambda T).
inline double v_hat_per_plus(const ModelSpec& spec, double t) {
  detail::require_positive_mean(spec, "v_hat_per_plus");
  const double T = spec.period();
  const double lamT = spec.lambda() * T;
  t = detail::reduce_mod_period(t, T);
  const double at = spec.a.primitive(t);
  auto f = [&](double s) {
    double gs = spec.g(s);
    return std::exp(2.0 * (at - spec.a.primitive(s))) * gs * gs;
  };
  return integrate(f, t, t + T).value / (1.0 - std::exp(-2.0 * lamT));
}

// Accumulated variance along the stable branch since time t0:
//   v_minus(t, t0) = Int_{t0}^t e^{-2 alpha(t, s)} g(s)^2 ds,
// computed through the periodic solution.
inline double v_minus(const ModelSpec& spec, double t, double t0) {
  if (!(t >= t0)) throw std::invalid_argument("v_minus: requires t >= t0");
  const double vt = v_per_minus(spec, t);
  const double r = vt - std::exp(-2.0 * alpha(spec, t, t0)) *
                            v_per_minus(spec, t0);
  if (r < -1e-10 * vt) {
    throw std::runtime_error("v_minus: negative variance (quadrature failure)");
  }
  return r < 0.0 ? 0.0 : r;
}

// Backward-normalized variance of the unstable branch between s and t:
//   v_hat_plus(t, s) = Int_s^t e^{-2 alpha(u, s)} g(u)^2 du.
inline double v_hat_plus(const ModelSpec& spec, double t, double s) {
  if (!(t >= s)) throw std::invalid_argument("v_hat_plus: requires t >= s");
  const double vs = v_hat_per_plus(spec, s);
  const double r = vs - std::exp(-2.0 * alpha(spec, t, s)) *
                            v_hat_per_plus(spec, t);
  if (r < -1e-10 * vs) {
    throw std::runtime_error(
        "v_hat_plus: negative variance (quadrature failure)");
  }
  return r < 0.0 ? 0.0 : r;
}

// Forward variance of the unstable branch; grows like e^{2 alpha(t, s)} and
// may overflow for t - s of many periods. Prefer v_hat_plus at large spans.
inline double v_plus(const ModelSpec& spec, double t, double s) {
  return std::exp(2.0 * alpha(spec, t, s)) * v_hat_plus(spec, t, s);
}

// Squared periodic rate function:
//   rho_per(t)^2 = delta1^2 / v_hat_per_plus(t) + (2-delta1)^2 / v_per_minus(t).
inline double rho_per_sq(const ModelSpec& spec, double t) {
  const double d1 = spec.delta1;
  return d1 * d1 / v_hat_per_plus(spec, t) +
         (2.0 - d1) * (2.0 - d1) / v_per_minus(spec, t);
}

inline double rho_per(const ModelSpec& spec, double t) {
  return std::sqrt(rho_per_sq(spec, t));
}

// Summary of the minimum of rho_per over one period and the constants
// attached to it. Downstream densities read everything from here.
struct RateReport {
  double lambda = 0.0;  // mean of a
  double s_star = 0.0;  // argmin of rho_per, reduced to [0, T)
  double R = 0.0;       // rho_per(s_star)
  double rho_dd = 0.0;  // second derivative of rho_per^2 at s_star
  double C0 = 0.0;      // peak prefactor of the cycling profile
  double C = 0.0;       // = C0 / 2
  double gamma0 = 0.0;  // decay constant seen from the reference phase
  double theta0 = 0.0;  // = -log(gamma0) / 2
  // Another local minimum ties the global one within 1e-9 relative; the
  // smaller time was chosen. Downstream asymptotics are then marginal.
  bool weak_minimum = false;
  // Curvature at the minimum indistinguishable from zero; C0 and C are NaN.
  bool degenerate = false;
};

// Locate the minimum of rho_per^2 by a 4096-point scan over one period,
// refine every local minimum by golden section, and assemble the constants.
inline RateReport find_rate_minimum(const ModelSpec& spec) {
  detail::require_positive_mean(spec, "find_rate_minimum");
  const double T = spec.period();
  constexpr int kGrid = 4096;

  std::vector<double> rr(kGrid);
  double grid_min = std::numeric_limits<double>::infinity();
  double grid_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    rr[i] = rho_per_sq(spec, T * i / kGrid);
    grid_min = std::min(grid_min, rr[i]);
    grid_max = std::max(grid_max, rr[i]);
  }

  RateReport rep;
  rep.lambda = spec.lambda();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (grid_max - grid_min <= 1e-12 * grid_max) {
    // Flat rate function (constant coefficients): no meaningful minimum.
    rep.s_star = 0.0;
    rep.R = std::sqrt(rr[0]);
    rep.rho_dd = 0.0;
    rep.C0 = rep.C = nan;
    rep.gamma0 = (2.0 - spec.delta1) * (2.0 - spec.delta1) *
                 std::exp(-2.0 * alpha(spec, 0.0)) * v_per_minus(spec, 0.0) /
                 (v_per_minus(spec, 0.0) * v_per_minus(spec, 0.0));
    rep.theta0 = -0.5 * std::log(rep.gamma0);
    rep.weak_minimum = true;
    rep.degenerate = true;
    return rep;
  }

  auto f = [&](double t) { return rho_per_sq(spec, t); };

  // Refine every circular local minimum of the grid values.
  std::vector<std::pair<double, double>> cands;  // (t, rho_per^2)
  for (int i = 0; i < kGrid; ++i) {
    double prev = rr[(i + kGrid - 1) % kGrid];
    double next = rr[(i + 1) % kGrid];
    if (rr[i] <= prev && rr[i] <= next && (rr[i] < prev || rr[i] < next)) {
      auto [t, v] = detail::golden_minimize(f, T * (i - 1) / kGrid,
                                            T * (i + 1) / kGrid, T * 1e-10);
      cands.emplace_back(detail::reduce_mod_period(t, T), v);
    }
  }

  // Merge refinements that converged to the same point (circular metric).
  std::vector<std::pair<double, double>> merged;
  for (auto& c : cands) {
    bool dup = false;
    for (auto& m : merged) {
      double d = std::fabs(c.first - m.first);
      d = std::min(d, T - d);
      if (d < T * 1e-6) {
        if (c.second < m.second) m = c;
        dup = true;
        break;
      }
    }
    if (!dup) merged.push_back(c);
  }

  double best = std::numeric_limits<double>::infinity();
  for (auto& m : merged) best = std::min(best, m.second);

  double s = std::numeric_limits<double>::infinity();
  int ties = 0;
  for (auto& m : merged) {
    if (m.second <= best * (1.0 + 1e-9)) {
      ++ties;
      s = std::min(s, m.first);
    }
  }
  const double r2 = f(s);

  rep.s_star = s;
  rep.R = std::sqrt(r2);
  rep.weak_minimum = ties > 1;

  // Curvature of rho_per^2 at the minimum: central second difference with
  // one Richardson step.
  const double h = T * 1e-4;
  auto second_diff = [&](double step) {
    return (f(s + step) - 2.0 * r2 + f(s - step)) / (step * step);
  };
  rep.rho_dd = (4.0 * second_diff(h / 2) - second_diff(h)) / 3.0;

  const double d1 = spec.delta1;
  const double vh = v_hat_per_plus(spec, s);
  const double vm = v_per_minus(spec, s);
  const double vs = v_star(spec, s);
  const double gs = spec.g(s);

  if (!(rep.rho_dd > 1e-4 * r2 / (T * T))) {
    rep.degenerate = true;
    rep.C0 = rep.C = nan;
  } else {
    rep.C0 = 4.0 * (2.0 - d1) / d1 * gs * gs /
             std::sqrt(3.141592653589793238462643 * rep.rho_dd) *
             std::sqrt(vh) / (vm * std::sqrt(vm)) * (1.0 - vm / (2.0 * vs));
    rep.C = rep.C0 / 2.0;
  }

  rep.gamma0 = (2.0 - d1) * (2.0 - d1) * std::exp(-2.0 * alpha(spec, s)) *
               v_per_minus(spec, 0.0) / (vm * vm);
  rep.theta0 = -0.5 * std::log(rep.gamma0);
  return rep;
}

// Intrinsic time. Normalized so that theta(t + T) = theta(t) + lambda T and
// the per-period masses of the passage density close under the recurrence
// tested in the profile module.
inline double theta(const ModelSpec& spec, const RateReport& rate, double t) {
  const double vh_t = v_hat_per_plus(spec, t);
  const double vh_s = v_hat_per_plus(spec, rate.s_star);
  return alpha(spec, t, rate.s_star) - 0.5 * std::log(vh_t) -
         std::log(spec.delta1 / vh_s);
}

// theta'(t) = g(t)^2 / (2 v_hat_per_plus(t)); independent of the report.
inline double theta_prime(const ModelSpec& spec, double t) {
  const double gt = spec.g(t);
  return 0.5 * gt * gt / v_hat_per_plus(spec, t);
}

// Period-local decay constant gamma(t) for t in [nT, (n+1)T):
//   gamma(t) = delta1^2 e^{-2 alpha(t, s_star + nT)} v_hat_per_plus(t)
//              / v_hat_per_plus(s_star)^2.
inline double gamma_t(const ModelSpec& spec, const RateReport& rate, double t) {
  const double T = spec.period();
  const double n = std::floor(t / T);
  const double d1 = spec.delta1;
  const double vh_t = v_hat_per_plus(spec, t);
  const double vh_s = v_hat_per_plus(spec, rate.s_star);
  // alpha(t, s_star + nT) expanded so the n T shift enters exactly.
  const double a_ts = spec.a.primitive(t) - spec.a.primitive(rate.s_star) -
                      n * rate.lambda * T;
  return d1 * d1 * std::exp(-2.0 * a_ts) * vh_t / (vh_s * vh_s);
}

// Bounded representative of the intrinsic time: theta_bar = -log(gamma)/2,
// satisfying theta_bar(t) + lambda T floor(t/T) = theta(t).
inline double theta_bar(const ModelSpec& spec, const RateReport& rate,
                        double t) {
  return -0.5 * std::log(gamma_t(spec, rate, t));
}

}  // namespace passage
