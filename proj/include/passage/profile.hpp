#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "passage/gammafn.hpp"
#include "passage/variances.hpp"

// The universal cycling profile P(x) in its two representations (shifted
// Gumbel-kernel sum and Fourier series), and the raw finite sums feeding the
// per-period passage densities. The profile depends on the model only
// through the product lambda * T.

namespace passage {

namespace detail {
constexpr double kPi = 3.141592653589793238462643;
constexpr double kLn2 = 0.693147180559945309417232;
}  // namespace detail

// Kernel A(x) = (1/2) exp(-2x - e^{-2x}/2). Peaks at x = -ln(2)/2 with
// value 1/e; decays like e^{-2x} rightward and double-exponentially
// leftward. Exact 0 when the inner exponential overflows.
inline double A_func(double x) {
  const double u = -2.0 * x;
  if (u > 709.0) return 0.0;
  return 0.5 * std::exp(u - 0.5 * std::exp(u));
}

// Companion cumulative kernel B(x) = exp(-e^{-2x}/2), increasing from 0
// to 1.
inline double B_func(double x) {
  const double u = -2.0 * x;
  if (u > 709.0) return 0.0;
  return std::exp(-0.5 * std::exp(u));
}

// The sole parameter of the cycling profile.
struct CyclingParams {
  double lambdaT = 1.0;
};

// P(x) = sum over integer l of A(lambdaT (l - x)), truncated where the
// right tail falls below 1e-16 of the running sum and the left tail
// underflows past the peak.
inline double profile_sum(CyclingParams p, double x) {
  if (!(p.lambdaT > 0.0))
    throw std::invalid_argument("profile_sum: lambdaT must be positive");
  const double lamT = p.lambdaT;
  const long long lc = std::llround(x);
  double sum = 0.0;
  for (long long l = lc;; --l) {
    const double y = lamT * (double(l) - x);
    const double term = A_func(y);
    sum += term;
    if (y < -0.35 && term <= 1e-16 * sum) break;
  }
  for (long long l = lc + 1;; ++l) {
    const double y = lamT * (double(l) - x);
    const double term = A_func(y);
    sum += term;
    if (y > 0.0 && term <= 1e-16 * sum) break;
  }
  return sum;
}

// Fourier coefficient of the profile:
//   P_hat(q) = [1 / (2 lambdaT)] 2^{-i pi q / lambdaT} Gamma(1 - i pi q / lambdaT).
inline std::complex<double> fourier_coefficient(CyclingParams p, long long q) {
  if (!(p.lambdaT > 0.0))
    throw std::invalid_argument("fourier_coefficient: lambdaT must be positive");
  const double y = detail::kPi * double(q) / p.lambdaT;
  const std::complex<double> rot =
      std::exp(std::complex<double>(0.0, -y * detail::kLn2));
  return rot * gamma_fn({1.0, -y}) / (2.0 * p.lambdaT);
}

// |P_hat(q)| decays like e^{-pi^2 q / (2 lambdaT)}; this cutoff leaves a
// tail below 1e-16 of the total.
inline int fourier_q_max(CyclingParams p) {
  return static_cast<int>(
             std::ceil(2.0 * p.lambdaT / (detail::kPi * detail::kPi) * 37.0)) +
         5;
}

// Same profile through its Fourier series; real by conjugate symmetry of
// the coefficients.
inline double profile_fourier(CyclingParams p, double x) {
  const int qmax = fourier_q_max(p);
  double s = fourier_coefficient(p, 0).real();
  for (int q = 1; q <= qmax; ++q) {
    const std::complex<double> c = fourier_coefficient(p, q);
    const double ph = 2.0 * detail::kPi * double(q) * x;
    s += 2.0 * (c.real() * std::cos(ph) - c.imag() * std::sin(ph));
  }
  return s;
}

// Inputs of the per-period finite sum. The phase values theta_bar (at the
// evaluation time) and theta0 come from the rate report; gamma0 and gamma_t
// are carried along for diagnostics since e^{-2 theta} reproduces them.
struct SumParams {
  int n = 1;             // period index, >= 1
  double eta = 1.0;      // |log sigma|, > 0
  double t = 0.0;        // time theta_bar refers to
  double lambdaT = 1.0;  // profile parameter of the underlying model
  double gamma0 = 0.0;
  double gamma_t = 0.0;
  double theta0 = 0.0;
  double theta_bar = 0.0;
};

// S_tilde(n, eta, t) = sum_{l=0}^{n-1} A(l lambdaT - eta + theta_bar)
//                                      B((n-l) lambdaT - eta + theta0).
inline double S_tilde(const SumParams& sp) {
  if (sp.n < 1) throw std::invalid_argument("S_tilde: n must be >= 1");
  if (!(sp.eta > 0.0)) throw std::invalid_argument("S_tilde: eta must be positive");
  if (!(sp.lambdaT > 0.0))
    throw std::invalid_argument("S_tilde: lambdaT must be positive");
  double s = 0.0;
  for (int l = 0; l < sp.n; ++l) {
    s += A_func(double(l) * sp.lambdaT - sp.eta + sp.theta_bar) *
         B_func(double(sp.n - l) * sp.lambdaT - sp.eta + sp.theta0);
  }
  return s;
}

// Bilateral limit of S_tilde: S_hat(eta, t) = P((eta - theta(t)) / lambdaT).
inline double S_hat(const ModelSpec& spec, const RateReport& rate, double eta,
                    double t) {
  const double lamT = rate.lambda * spec.period();
  return profile_sum({lamT}, (eta - theta(spec, rate, t)) / lamT);
}

}  // namespace passage
