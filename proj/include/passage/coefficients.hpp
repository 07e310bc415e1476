#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace passage {

// Trigonometric polynomial with period T:
//   f(t) = mean + sum_k cos_coef[k-1] cos(2 pi k t / T)
//               + sum_k sin_coef[k-1] sin(2 pi k t / T)
// Coefficient vectors are indexed by harmonic (entry 0 is the fundamental)
// and may have different lengths.
struct PeriodicFunction {
  double T = 1.0;
  double mean = 0.0;
  std::vector<double> cos_coef;
  std::vector<double> sin_coef;

  PeriodicFunction() = default;
  PeriodicFunction(double period, double mean_value,
                   std::vector<double> cosines = {},
                   std::vector<double> sines = {})
      : T(period), mean(mean_value), cos_coef(std::move(cosines)),
        sin_coef(std::move(sines)) {
    if (!(T > 0.0) || !std::isfinite(T))
      throw std::invalid_argument("PeriodicFunction: period must be positive");
    check_finite(mean, "mean");
    for (double c : cos_coef) check_finite(c, "cos");
    for (double s : sin_coef) check_finite(s, "sin");
  }

  double operator()(double t) const {
    const double w = 2.0 * std::numbers::pi / T;
    double v = mean;
    for (std::size_t k = 0; k < cos_coef.size(); ++k)
      v += cos_coef[k] * std::cos(w * double(k + 1) * t);
    for (std::size_t k = 0; k < sin_coef.size(); ++k)
      v += sin_coef[k] * std::sin(w * double(k + 1) * t);
    return v;
  }

  // Exact antiderivative with primitive(0) = 0. Harmonics integrate to zero
  // over a full period, so primitive(t + T) = primitive(t) + mean * T.
  double primitive(double t) const {
    const double w = 2.0 * std::numbers::pi / T;
    double v = mean * t;
    for (std::size_t k = 0; k < cos_coef.size(); ++k) {
      const double wk = w * double(k + 1);
      v += cos_coef[k] * std::sin(wk * t) / wk;
    }
    for (std::size_t k = 0; k < sin_coef.size(); ++k) {
      const double wk = w * double(k + 1);
      v += sin_coef[k] * (1.0 - std::cos(wk * t)) / wk;
    }
    return v;
  }

  // Extrema over one period, located by a dense scan plus golden-section
  // refinement. The scan wraps, so boundary extrema are handled.
  std::pair<double, double> min_point() const { return extremum(false); }
  std::pair<double, double> max_point() const { return extremum(true); }
  double min_on_period() const { return min_point().second; }
  double max_on_period() const { return max_point().second; }

 private:
  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string("PeriodicFunction: non-finite ") +
                                  what + " coefficient");
  }

  std::pair<double, double> extremum(bool maximize) const {
    constexpr int kGrid = 2048;
    const double h = T / kGrid;
    int best = 0;
    double best_v = maximize ? -INFINITY : INFINITY;
    for (int i = 0; i < kGrid; ++i) {
      const double v = (*this)(i * h);
      if (maximize ? v > best_v : v < best_v) {
        best_v = v;
        best = i;
      }
    }
    // Golden-section refinement on the wrapped bracket around the grid winner.
    const double sgn = maximize ? -1.0 : 1.0;
    auto eval = [&](double t) { return sgn * (*this)(t); };
    double lo = (best - 1) * h, hi = (best + 1) * h;
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = eval(x1), f2 = eval(x2);
    while (hi - lo > T * 1e-12) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kInvPhi * (hi - lo);
        f1 = eval(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kInvPhi * (hi - lo);
        f2 = eval(x2);
      }
    }
    double arg = 0.5 * (lo + hi);
    const double val = (*this)(arg);
    arg = std::fmod(arg, T);
    if (arg < 0.0) arg += T;
    return {arg, val};
  }
};

// Accumulated relaxation rate over [0, t] and over [s, t].
inline double alpha(const PeriodicFunction& a, double t) {
  return a.primitive(t);
}

inline double alpha2(const PeriodicFunction& a, double t, double s) {
  return a.primitive(t) - a.primitive(s);
}

// Mean relaxation rate over one period, alpha(T) / T. Exactly the mean field
// of the trigonometric representation.
inline double lyapunov(const PeriodicFunction& a) { return a.mean; }

// Two-level system specification. The state relaxes toward -1 or +1 at rate
// a(t) and is driven by noise of amplitude sigma * g(t). delta1 and delta2
// set the switch-up and switch-down levels 1 - delta1 and 1 - delta2.
// Positivity of a and g over the period is a hypothesis checked separately,
// not a construction invariant.
struct ModelSpec {
  PeriodicFunction a;
  PeriodicFunction g;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double sigma = 0.0;

  ModelSpec(PeriodicFunction a_fn, PeriodicFunction g_fn, double d1, double d2,
            double sigma_noise)
      : a(std::move(a_fn)), g(std::move(g_fn)), delta1(d1), delta2(d2),
        sigma(sigma_noise) {
    if (a.T != g.T)
      throw std::invalid_argument("ModelSpec: a and g periods differ");
    if (!(delta1 > 0.0 && delta1 < delta2 && delta2 < 1.0))
      throw std::invalid_argument("ModelSpec: need 0 < delta1 < delta2 < 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("ModelSpec: sigma must be positive");
  }

  double period() const { return a.T; }

  // Mean relaxation rate; the drift primitive grows by lambda() * period()
  // each period.
  double lambda() const { return a.mean; }
};

}  // namespace passage
