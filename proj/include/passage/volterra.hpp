#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "passage/quadrature.hpp"

// First-passage density of a zero-drift Gaussian process to a moving
// boundary, via the pair of Volterra integral equations satisfied by the
// density.  The process is z_t with variance sigma^2 v(t); the boundary is
// d(t).  Writing F(t) for the density of z_t evaluated at d(t) and F(t|s)
// for the transition density between boundary points, the first-passage
// density psi solves
//
//   first kind:   F(t) = Int_0^t F(t|s) psi(s) ds
//   second kind:  psi(t) = b0(t) F(t) - Int_0^t b_tilde(t,s) F(t|s) psi(s) ds
//
// with b0 = v'[d/v - d'/v'] and b_tilde(t,s) = v'(t)[d(t,s)/v(t,s) - d'/v'],
// where x(t,s) = x(t) - x(s).  The solver works in the subexponential
// prefactor c(t) defined by psi = (1/sigma) c(t) e^{-d^2/2 sigma^2 v}, which
// satisfies the equivalent fixed-point equation
//
//   c(t) = c0(t) - (1/sigma) Int_0^t c_tilde(t,s) c(s) e^{-r(t,s)/2 sigma^2} ds
//
// with c0 = b0/sqrt(2 pi v), c_tilde = b_tilde/sqrt(2 pi v(t,s)) and the
// nonnegative exponent r(t,s).  The c form is immune to the underflow of
// psi at small times, where the density is subexponentially small but the
// prefactor is of order v^{-3/2}.

namespace passage {

// Gaussian first-passage problem: variance profile v (with derivative),
// moving boundary d (with derivative), noise amplitude sigma.  Requires
// v(0) = 0, v' > 0 and d(0) > 0 on the working interval.
struct FptProblem {
  std::function<double(double)> v;
  std::function<double(double)> v_prime;
  std::function<double(double)> d;
  std::function<double(double)> d_prime;
  double sigma = 1.0;
};

// Grid checks of the standing assumptions.  Throws std::invalid_argument on
// the first violated one.
inline void validate_problem(const FptProblem& p, double t_max,
                             int n_grid = 256) {
  if (!(p.sigma > 0.0)) throw std::invalid_argument("fpt: sigma must be > 0");
  if (!(t_max > 0.0)) throw std::invalid_argument("fpt: t_max must be > 0");
  if (!(p.d(0.0) > 0.0)) throw std::invalid_argument("fpt: d(0) must be > 0");
  const double v0 = p.v(0.0);
  const double scale = std::max(1.0, std::abs(p.v(t_max)));
  if (!(std::abs(v0) <= 1e-12 * scale)) {
    throw std::invalid_argument("fpt: v(0) must vanish");
  }
  for (int i = 0; i <= n_grid; ++i) {
    const double t = t_max * i / n_grid;
    if (!(p.v_prime(t) > 0.0)) {
      throw std::invalid_argument("fpt: v' must be positive on [0, t_max]");
    }
  }
}

// Transition density of the process at y, started from x at time s < t:
// a centered Gaussian in y - x with variance sigma^2 (v(t) - v(s)).
inline double transition_density(const FptProblem& p, double t, double y,
                                 double s, double x) {
  if (!(t > s)) {
    throw std::invalid_argument("transition_density: requires t > s");
  }
  const double vts = p.v(t) - p.v(s);
  const double z = (y - x) / p.sigma;
  return std::exp(-0.5 * z * z / vts) /
         (p.sigma * std::sqrt(2.0 * M_PI * vts));
}

// The boundary functionals entering both integral equations, all evaluated
// at a pair of times t > s.  b0 and c0 depend on t only.  r(t, s) is the
// nonnegative exponent of the prefactor equation; it vanishes at s = t.
struct BoundaryCoeffs {
  double b0 = 0.0;
  double b_tilde = 0.0;
  double c0 = 0.0;
  double c_tilde = 0.0;
  double r = 0.0;
};

inline BoundaryCoeffs boundary_coeffs(const FptProblem& p, double t,
                                      double s) {
  BoundaryCoeffs out;
  const double vt = p.v(t), vs = p.v(s);
  const double dt = p.d(t), ds = p.d(s);
  const double vp = p.v_prime(t), dp = p.d_prime(t);
  out.b0 = vp * (dt / vt - dp / vp);
  out.c0 = out.b0 / std::sqrt(2.0 * M_PI * vt);
  const double vts = vt - vs;
  out.b_tilde = vp * ((dt - ds) / vts - dp / vp);
  out.c_tilde = out.b_tilde / std::sqrt(2.0 * M_PI * vts);
  // Product form; manifestly >= 0, exact where the two-point slopes agree.
  const double slope = ds / vs - dt / vt;
  out.r = (vt * vs / vts) * slope * slope;
  return out;
}

struct VolterraSolution {
  std::vector<double> grid;  // uniform nodes h, 2h, ..., N h
  std::vector<double> psi;   // first-passage density at the nodes
  std::vector<double> c;     // prefactor, psi = (1/sigma) c e^{-d^2/2s^2 v}
  double mass = 0.0;         // trapezoid integral of psi over the grid
  double epsilon = 0.0;      // contraction constant for the prefactor map
  double diagnostics = 0.0;  // sup residual of the first-kind identity,
                             // relative to the free density F(t)
};

// Constants of the contraction estimate for the prefactor fixed-point map:
//   d v' - v d' >= Delta v' (1 + sqrt(v))     (boundary outruns the spread)
//   |c_tilde|   <= M1
//   (1 + v)     <= M2 v'
//   d v' - v d' <= M3 (1 + v^{3/2})
struct ContractionParams {
  double Delta = 0.0;
  double M1 = 0.0;
  double M2 = 0.0;
  double M3 = 0.0;
};

// Contraction constant of the prefactor map on [0, t]:
//   epsilon = 2 M1 (e^{-Delta^2/4 sigma^2} t / sigma + 4 M2 sigma / Delta^2).
// Values >= 1 mean the estimate gives no contraction guarantee.
inline double contraction_epsilon(const ContractionParams& cp, double sigma,
                                  double t) {
  if (!(cp.Delta > 0.0)) return std::numeric_limits<double>::infinity();
  const double d2 = cp.Delta * cp.Delta;
  return 2.0 * cp.M1 *
         (std::exp(-0.25 * d2 / (sigma * sigma)) * t / sigma +
          4.0 * cp.M2 * sigma / d2);
}

// Grid maximization of the defining inequalities.  Delta may come out
// nonpositive when the boundary assumption fails; contraction_epsilon then
// reports infinity.
inline ContractionParams estimate_contraction_params(const FptProblem& p,
                                                     double t_max,
                                                     int n_grid = 512) {
  ContractionParams cp;
  cp.Delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n_grid; ++i) {
    const double t = t_max * i / n_grid;
    const double v = p.v(t), vp = p.v_prime(t);
    const double num = p.d(t) * vp - v * p.d_prime(t);
    cp.Delta = std::min(cp.Delta, num / (vp * (1.0 + std::sqrt(v))));
    cp.M2 = std::max(cp.M2, (1.0 + v) / vp);
    cp.M3 = std::max(cp.M3, num / (1.0 + v * std::sqrt(v)));
  }
  // |c_tilde| needs the pair grid; a coarser mesh suffices for a sup that
  // only feeds the epsilon estimate.
  const int m = n_grid / 2;
  for (int i = 1; i <= m; ++i) {
    const double t = t_max * i / m;
    for (int j = 0; j < i; ++j) {
      const double s = t_max * j / m;
      cp.M1 = std::max(cp.M1, std::abs(boundary_coeffs(p, t, s).c_tilde));
    }
  }
  return cp;
}

// Explicit term of the prefactor equation, c0(t) = b0(t) / sqrt(2 pi v(t)).
inline double prefactor_c0(const FptProblem& p, double t) {
  const double vt = p.v(t);
  const double b0 = p.v_prime(t) * (p.d(t) / vt - p.d_prime(t) / p.v_prime(t));
  return b0 / std::sqrt(2.0 * M_PI * vt);
}

namespace detail {

// Kernel weight of the prefactor equation, c_tilde(t,s) e^{-r/2 sigma^2};
// written to be exactly zero at both endpoints (s = 0 where r diverges,
// s = t where c_tilde vanishes).
inline double prefactor_weight(const FptProblem& p, double t, double s) {
  if (s <= 0.0 || s >= t) return 0.0;
  const BoundaryCoeffs bc = boundary_coeffs(p, t, s);
  return bc.c_tilde * std::exp(-0.5 * bc.r / (p.sigma * p.sigma));
}

}  // namespace detail

struct FirstKindReport {
  std::vector<double> residual;  // per node, relative to F(t) where testable
  double sup_rel = 0.0;          // over nodes with t >= t_min and F above floor
  double argmax_t = std::numeric_limits<double>::quiet_NaN();
};

// Residual of the first-kind identity F(t) = Int_0^t F(t|s) psi(s) ds.
// Both sides are normalized by F(t), which turns the identity into
//
//   1 = (1/sigma) Int_0^t sqrt(v(t)/v(t,s)) e^{-r(t,s)/2 sigma^2} c(s) ds,
//
// so the evaluation stays well conditioned even where the density itself
// underflows.  The substitution u = sqrt(t - s) removes the inverse
// square-root factor at the diagonal.  The prefactor is interpolated
// through m = c v^{3/2}, which is finite and slowly varying near t = 0
// where c itself grows like v^{-3/2}; below the first node m is continued
// as a constant.
inline FirstKindReport check_first_kind(const FptProblem& p,
                                        const VolterraSolution& sol,
                                        double t_min = 0.0) {
  FirstKindReport rep;
  const size_t n = sol.grid.size();
  rep.residual.assign(n, 0.0);
  if (n == 0) return rep;
  const double h = sol.grid[0];

  std::vector<double> m(n);
  for (size_t i = 0; i < n; ++i) {
    const double vi = p.v(sol.grid[i]);
    m[i] = sol.c[i] * vi * std::sqrt(vi);
  }
  auto c_at = [&](double s) {
    const double vs = p.v(s);
    if (!(vs > 0.0)) return 0.0;
    const double x = s / h;
    double ms;
    if (x <= 1.0) {
      ms = m[0];
    } else {
      const size_t k = std::min(static_cast<size_t>(x - 1.0), n - 2);
      const double w = x - static_cast<double>(k + 1);
      ms = m[k] + w * (m[k + 1] - m[k]);
    }
    return ms / (vs * std::sqrt(vs));
  };

  const double inv_two_sigma_sq = 0.5 / (p.sigma * p.sigma);
  for (size_t i = 0; i < n; ++i) {
    const double t = sol.grid[i];
    const double vt = p.v(t);
    auto integrand = [&](double u) {
      const double s = t - u * u;
      if (s <= 0.0) return 0.0;
      const double cs = c_at(s);
      if (cs == 0.0) return 0.0;
      const BoundaryCoeffs bc = boundary_coeffs(p, t, s);
      const double w = std::exp(-bc.r * inv_two_sigma_sq);
      if (w == 0.0) return 0.0;
      return 2.0 * u * std::sqrt(vt / (vt - p.v(s))) * w * cs;
    };
    // Fixed composite rule: the integrand is only piecewise smooth (the
    // prefactor is interpolated), so adaptive refinement would chase the
    // interpolation kinks.
    const double u_max = std::sqrt(t);
    constexpr int kPanels = 32;
    double rhs = 0.0;
    for (int q = 0; q < kPanels; ++q) {
      rhs += gauss16(integrand, u_max * q / kPanels,
                     u_max * (q + 1) / kPanels);
    }
    rep.residual[i] = std::abs(rhs / p.sigma - 1.0);
    if (t >= t_min && rep.residual[i] > rep.sup_rel) {
      rep.sup_rel = rep.residual[i];
      rep.argmax_t = t;
    }
  }
  return rep;
}

// Second-kind solve by product trapezoid on a uniform grid, forward
// substitution in one sweep.  The kernel vanishes at both ends of every
// panel row (diagonal like sqrt(t-s), left end through the exponent), so the
// trapezoid rule needs no singular treatment.  The sweep runs in the
// prefactor variables; psi is recovered pointwise afterwards.
inline VolterraSolution solve_second_kind(const FptProblem& p, double t_max,
                                          int n) {
  if (n < 8) throw std::invalid_argument("solve_second_kind: n too small");
  validate_problem(p, t_max);

  VolterraSolution sol;
  const double h = t_max / n;
  sol.grid.resize(n);
  sol.c.resize(n);
  sol.psi.resize(n);

  const double inv_two_sigma_sq = 0.5 / (p.sigma * p.sigma);
  for (int i = 0; i < n; ++i) {
    const double t = h * (i + 1);
    sol.grid[i] = t;
    double acc = 0.0;
    for (int j = 0; j < i; ++j) {
      acc += detail::prefactor_weight(p, t, sol.grid[j]) * sol.c[j];
    }
    sol.c[i] = prefactor_c0(p, t) - (h / p.sigma) * acc;
    const double dt = p.d(t);
    sol.psi[i] =
        sol.c[i] * std::exp(-dt * dt * inv_two_sigma_sq / p.v(t)) / p.sigma;
  }

  for (int i = 0; i + 1 < n; ++i) {
    sol.mass += 0.5 * h * (sol.psi[i] + sol.psi[i + 1]);
  }
  sol.mass += 0.5 * h * sol.psi[0];  // leading panel, psi(0) = 0

  sol.epsilon =
      contraction_epsilon(estimate_contraction_params(p, t_max), p.sigma,
                          t_max);
  sol.diagnostics = check_first_kind(p, sol).sup_rel;
  return sol;
}

struct FixedPointResult {
  std::vector<double> grid;
  std::vector<double> c0;   // explicit prefactor term
  std::vector<double> c;    // converged iterate
  double epsilon = 0.0;     // contraction constant at t_max
  double bracket_rel = 0.0; // half-width of the two-sided bound, relative
  int iterations = 0;
  bool converged = false;
  bool contraction = false; // epsilon < 1
};

// Picard iteration of the prefactor map on a uniform grid, started from c0.
// The two-sided bound c0 [1 -+ bracket_rel] holds for the true prefactor
// whenever epsilon < 1; with epsilon >= 1 the iteration is still attempted
// and the bracket is reported as infinite.
inline FixedPointResult fixed_point_prefactor(const FptProblem& p,
                                              const ContractionParams& cp,
                                              double t_max, int n,
                                              int max_iters = 100) {
  if (n < 8) throw std::invalid_argument("fixed_point_prefactor: n too small");
  validate_problem(p, t_max);

  FixedPointResult out;
  const double h = t_max / n;
  out.grid.resize(n);
  out.c0.resize(n);
  for (int i = 0; i < n; ++i) {
    out.grid[i] = h * (i + 1);
    out.c0[i] = prefactor_c0(p, out.grid[i]);
  }
  out.c = out.c0;

  out.epsilon = contraction_epsilon(cp, p.sigma, t_max);
  out.contraction = out.epsilon < 1.0;

  // The kernel weights are iteration-invariant; precompute the strict lower
  // triangle once so each sweep is a plain triangular multiply.
  std::vector<double> weight(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0, k = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j, ++k) {
      weight[k] = detail::prefactor_weight(p, out.grid[i], out.grid[j]);
    }
  }

  std::vector<double> next(n);
  for (out.iterations = 1; out.iterations <= max_iters; ++out.iterations) {
    double change = 0.0, scale = 1.0;
    for (int i = 0, k = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < i; ++j, ++k) {
        acc += weight[k] * out.c[j];
      }
      next[i] = out.c0[i] - (h / p.sigma) * acc;
      change = std::max(change, std::abs(next[i] - out.c[i]));
      scale = std::max(scale, std::abs(next[i]));
    }
    out.c.swap(next);
    if (change <= 1e-12 * scale) {
      out.converged = true;
      break;
    }
  }

  if (out.contraction) {
    out.bracket_rel =
        out.epsilon / (1.0 - out.epsilon) * cp.M2 * cp.M3 / cp.Delta;
  } else {
    out.bracket_rel = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace passage
