#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "passage/quadrature.hpp"
#include "passage/variances.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace passage;

namespace {

// Reference scenario used across the analytic tests: one-harmonic drift and
// noise modulation, moderately asymmetric levels.
ModelSpec ref_spec() {
  return {PeriodicFunction(1.0, 1.0, {}, {0.1}),
          PeriodicFunction(1.0, 2.2, {0.44}, {}), 0.1, 0.55, 0.35};
}

// Constant drift, even one-harmonic noise modulation.
ModelSpec even_g_spec() {
  return {PeriodicFunction(1.0, 1.0), PeriodicFunction(1.0, 1.0, {0.3}, {}),
          0.1, 0.3, 0.1};
}

// Period-2 variant with the modulation in the second harmonic; its rate
// function has two equally deep minima per period.
ModelSpec two_minima_spec() {
  return {PeriodicFunction(2.0, 1.0), PeriodicFunction(2.0, 1.0, {0.0, 0.3}, {}),
          0.1, 0.3, 0.1};
}

ModelSpec const_spec() {
  return {PeriodicFunction(1.0, 1.0), PeriodicFunction(1.0, 1.0), 0.1, 0.3,
          0.1};
}

// Direct quadrature of the accumulated variance, bypassing the periodic
// solution: Int_{t0}^t exp(-2 alpha(t, s)) g(s)^2 ds.
double v_minus_direct(const ModelSpec& m, double t, double t0) {
  return integrate(
      [&](double s) {
        double gs = m.g(s);
        return std::exp(-2.0 * alpha(m, t, s)) * gs * gs;
      },
      t0, t);
}

double v_hat_plus_direct(const ModelSpec& m, double t, double s) {
  return integrate(
      [&](double u) {
        double gu = m.g(u);
        return std::exp(-2.0 * alpha(m, u, s)) * gu * gu;
      },
      s, t);
}

// Richardson-extrapolated central difference; accurate enough to resolve
// residuals at the 1e-9 level for one-harmonic coefficients.
template <class F>
double deriv(F&& f, double t, double h) {
  double d1 = (f(t + h) - f(t - h)) / (2.0 * h);
  double d2 = (f(t + h / 2) - f(t - h / 2)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace

TEST_CASE("constant coefficients give the fixed-point variance") {
  ModelSpec m = const_spec();
  CHECK_THAT(v_per_minus(m, 0.37), WithinRel(0.5, 1e-12));
  CHECK_THAT(v_hat_per_plus(m, 0.37), WithinRel(0.5, 1e-12));
  CHECK_THAT(v_star(m, 0.37), WithinRel(0.5, 1e-15));

  ModelSpec m2{PeriodicFunction(1.0, 2.0), PeriodicFunction(1.0, 1.0), 0.1,
               0.3, 0.1};
  CHECK_THAT(v_per_minus(m2, 0.0), WithinRel(0.25, 1e-12));
  CHECK_THAT(v_hat_per_plus(m2, 0.0), WithinRel(0.25, 1e-12));

  // (1 - e^{-2t})/2 and (e^{2(t-s)} - 1)/2 in the constant case.
  CHECK_THAT(v_minus(m, 1.0, 0.0),
             WithinRel(0.43233235838169365, 1e-12));
  CHECK_THAT(v_hat_plus(m, 1.5, 0.5),
             WithinRel(0.43233235838169365, 1e-12));
  CHECK_THAT(v_plus(m, 1.0, 0.0), WithinRel(3.1945280494653251, 1e-12));

  // rho_per^2 = delta1^2/v + (2-delta1)^2/v with v = 1/2.
  CHECK_THAT(rho_per_sq(m, 0.8), WithinRel(7.24, 1e-12));
  CHECK_THAT(rho_per(m, 0.8), WithinRel(2.6907248094147422, 1e-12));
}

TEST_CASE("periodic variances match frozen quadrature values") {
  ModelSpec m = ref_spec();
  CHECK_THAT(v_per_minus(m, 0.0), WithinRel(2.618265515772318, 1e-11));
  CHECK_THAT(v_hat_per_plus(m, 0.0), WithinRel(2.501524740725158, 1e-11));
  CHECK_THAT(v_per_minus(m, 0.62), WithinRel(2.172420464778673, 1e-11));
  CHECK_THAT(v_hat_per_plus(m, 0.62), WithinRel(2.672971251562078, 1e-11));
  CHECK_THAT(rho_per_sq(m, 0.55), WithinRel(1.621550415452121, 1e-11));

  ModelSpec s1 = even_g_spec();
  CHECK_THAT(v_per_minus(s1, 0.0), WithinRel(0.550655752273329, 1e-11));
  CHECK_THAT(v_hat_per_plus(s1, 0.0), WithinRel(0.550655752273329, 1e-11));
  CHECK_THAT(v_per_minus(s1, 0.4), WithinRel(0.547986870303311, 1e-11));
  CHECK_THAT(v_hat_per_plus(s1, 0.4), WithinRel(0.452699087878767, 1e-11));
  CHECK_THAT(rho_per_sq(s1, 0.3), WithinRel(6.101220705045123, 1e-11));
}

TEST_CASE("periodic variances reduce their argument mod T") {
  ModelSpec m = ref_spec();
  CHECK_THAT(v_per_minus(m, 5.62), WithinRel(v_per_minus(m, 0.62), 1e-12));
  CHECK_THAT(v_hat_per_plus(m, 107.62),
             WithinRel(v_hat_per_plus(m, 0.62), 1e-12));
  CHECK_THAT(v_per_minus(m, -0.38), WithinRel(v_per_minus(m, 0.62), 1e-12));
}

TEST_CASE("accumulated variances match the periodic-solution relation") {
  ModelSpec m = ref_spec();
  CHECK_THAT(v_minus(m, 1.7, 0.2), WithinRel(2.030549558444738, 1e-11));
  CHECK_THAT(v_hat_plus(m, 1.7, 0.2), WithinRel(2.062531506459151, 1e-11));

  ModelSpec s1 = even_g_spec();
  CHECK_THAT(v_minus(s1, 1.7, 0.2), WithinRel(0.402486629279467, 1e-11));
  CHECK_THAT(v_hat_plus(s1, 1.7, 0.2), WithinRel(0.416492265407261, 1e-11));

  // Relation vs direct quadrature, absolute 1e-10.
  for (double t : {0.9, 1.7, 3.3}) {
    CHECK_THAT(v_minus(m, t, 0.2),
               WithinAbs(v_minus_direct(m, t, 0.2), 1e-10));
    CHECK_THAT(v_hat_plus(m, t, 0.2),
               WithinAbs(v_hat_plus_direct(m, t, 0.2), 1e-10));
  }

  CHECK(v_minus(m, 0.7, 0.7) == 0.0);
  CHECK(v_hat_plus(m, 0.7, 0.7) == 0.0);
  CHECK_THROWS_AS(v_minus(m, 0.2, 0.7), std::invalid_argument);
  CHECK_THROWS_AS(v_hat_plus(m, 0.2, 0.7), std::invalid_argument);
}

TEST_CASE("periodic variances satisfy their defining ODEs") {
  // v' = -2 a v + g^2 for the stable branch; the hatted unstable variance
  // solves v' = +2 a v - g^2.
  for (const ModelSpec& m : {ref_spec(), even_g_spec()}) {
    const double h = 2e-3;
    for (int i = 0; i < 64; ++i) {
      double t = m.period() * i / 64;
      double g2 = m.g(t) * m.g(t);
      double rm = deriv([&](double u) { return v_per_minus(m, u); }, t, h) +
                  2.0 * m.a(t) * v_per_minus(m, t) - g2;
      double rp = deriv([&](double u) { return v_hat_per_plus(m, u); }, t, h) -
                  2.0 * m.a(t) * v_hat_per_plus(m, t) + g2;
      CHECK_THAT(rm, WithinAbs(0.0, 1e-8 * g2));
      CHECK_THAT(rp, WithinAbs(0.0, 1e-8 * g2));
    }
  }
}

TEST_CASE("periodic variances stay within the adiabatic envelope") {
  ModelSpec m = ref_spec();
  double vlo = 1e300, vhi = -1e300;
  for (int i = 0; i < 4096; ++i) {
    double v = v_star(m, m.period() * i / 4096);
    vlo = std::min(vlo, v);
    vhi = std::max(vhi, v);
  }
  for (int i = 0; i < 256; ++i) {
    double t = m.period() * i / 256;
    for (double v : {v_per_minus(m, t), v_hat_per_plus(m, t)}) {
      CHECK(v >= vlo - 1e-10);
      CHECK(v <= vhi + 1e-10);
    }
  }
}

TEST_CASE("slow forcing tracks the instantaneous equilibrium") {
  double prev = 1e300;
  for (double T : {1.0, 4.0, 16.0, 64.0}) {
    ModelSpec m{PeriodicFunction(T, 1.0, {}, {0.1}),
                PeriodicFunction(T, 2.2, {0.44}, {}), 0.1, 0.55, 0.35};
    double worst = 0.0;
    for (int i = 0; i < 64; ++i) {
      double t = T * i / 64;
      worst = std::max(worst,
                       std::fabs(v_per_minus(m, t) - v_star(m, t)));
    }
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("even noise modulation mirrors the two branches") {
  // With constant a and g(-t) = g(t), the unstable-branch variance is the
  // time reversal of the stable one.
  ModelSpec s1 = even_g_spec();
  for (int i = 0; i < 64; ++i) {
    double t = s1.period() * i / 64;
    CHECK_THAT(v_hat_per_plus(s1, t),
               WithinRel(v_per_minus(s1, s1.period() - t), 1e-11));
  }
}

TEST_CASE("rate minimum report on the reference scenario") {
  ModelSpec m = ref_spec();
  RateReport rep = find_rate_minimum(m);

  CHECK_THAT(rep.lambda, WithinRel(1.0, 1e-15));
  // The minimum is located from function values only, so its position is
  // resolvable to about sqrt(eps / rho_dd) ~ 2e-8; first-order dependents
  // (gamma0, theta0) carry tolerances scaled accordingly.
  CHECK_THAT(rep.s_star, WithinAbs(0.154667488070177, 1e-7));
  CHECK_THAT(rep.R, WithinRel(1.144441368595883, 1e-11));
  CHECK_THAT(rep.rho_dd, WithinRel(6.187722941438285, 1e-6));
  CHECK_THAT(rep.C0, WithinRel(16.814757784698326, 1e-6));
  CHECK_THAT(rep.gamma0, WithinRel(0.894417523739516, 1e-6));
  CHECK_THAT(rep.theta0, WithinAbs(0.055791292020610, 5e-7));
  CHECK_FALSE(rep.weak_minimum);
  CHECK_FALSE(rep.degenerate);

  // Pinned algebraic relations.
  CHECK(rep.C0 == 2.0 * rep.C);
  CHECK(rep.theta0 == -0.5 * std::log(rep.gamma0));
  CHECK_THAT(rep.R, WithinRel(rho_per(m, rep.s_star), 1e-12));

  CHECK_THAT(v_hat_per_plus(m, rep.s_star),
             WithinRel(2.238228600742954, 1e-7));
  CHECK_THAT(v_per_minus(m, rep.s_star),
             WithinRel(2.765693876270461, 1e-7));
}

TEST_CASE("tied minima are flagged and the earlier one is chosen") {
  RateReport rep = find_rate_minimum(two_minima_spec());
  CHECK(rep.weak_minimum);
  CHECK_FALSE(rep.degenerate);
  CHECK_THAT(rep.s_star, WithinAbs(0.190206984830, 1e-7));
  CHECK_THAT(rep.R, WithinRel(2.426860883322, 1e-10));
  CHECK_THAT(rep.rho_dd, WithinRel(37.023064821303, 1e-6));
  CHECK_THAT(rep.C0, WithinRel(6.038138768636, 1e-6));
  CHECK_THAT(rep.gamma0, WithinRel(3.589643485792, 1e-6));
  CHECK_THAT(rep.theta0, WithinAbs(-0.639026444995, 5e-7));
}

TEST_CASE("flat rate function reports a degenerate minimum") {
  RateReport rep = find_rate_minimum(const_spec());
  CHECK(rep.degenerate);
  CHECK(std::isnan(rep.C0));
  CHECK(std::isnan(rep.C));
  CHECK_THAT(rep.R, WithinRel(2.6907248094147422, 1e-11));
  CHECK(std::isfinite(rep.gamma0));
}

TEST_CASE("intrinsic time and its bounded representative") {
  ModelSpec m = ref_spec();
  RateReport rep = find_rate_minimum(m);

  CHECK_THAT(theta(m, rep, 12.3), WithinRel(14.874910003456389, 1e-8));
  CHECK_THAT(theta_bar(m, rep, 12.3), WithinRel(2.874910003456389, 1e-7));
  CHECK_THAT(theta_prime(m, 12.3), WithinRel(0.971424601268742, 1e-10));

  const double lamT = rep.lambda * m.period();
  for (double t : {0.12, 3.7, 12.3, 25.81}) {
    // theta advances by lambda T per period.
    CHECK_THAT(theta(m, rep, t + m.period()) - theta(m, rep, t),
               WithinRel(lamT, 1e-9));
    // Bounded form plus the accumulated drift reproduces theta.
    double n = std::floor(t / m.period());
    CHECK_THAT(theta_bar(m, rep, t) + lamT * n,
               WithinRel(theta(m, rep, t), 1e-10));
    // theta_bar is minus half the log of gamma by construction.
    CHECK_THAT(std::exp(-2.0 * theta_bar(m, rep, t)),
               WithinRel(gamma_t(m, rep, t), 1e-14));
  }

  // Constant case: theta' = g^2 / (2 v) = 1.
  ModelSpec c = const_spec();
  CHECK_THAT(theta_prime(c, 0.4), WithinRel(1.0, 1e-12));
}

TEST_CASE("nonpositive mean drift is rejected") {
  ModelSpec m{PeriodicFunction(1.0, -1.0), PeriodicFunction(1.0, 1.0), 0.1,
              0.3, 0.1};
  CHECK_THROWS_AS(v_per_minus(m, 0.0), std::domain_error);
  CHECK_THROWS_AS(v_hat_per_plus(m, 0.0), std::domain_error);
  CHECK_THROWS_AS(find_rate_minimum(m), std::domain_error);
}
