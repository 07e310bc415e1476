#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "passage/profile.hpp"
#include "passage/quadrature.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace passage;

TEST_CASE("kernel shapes and overflow policy") {
  // Peak value 1/e at x = -ln(2)/2.
  CHECK_THAT(A_func(-0.5 * std::log(2.0)),
             WithinRel(std::exp(-1.0), 1e-14));
  CHECK_THAT(B_func(0.0), WithinRel(std::exp(-0.5), 1e-14));
  // Right tail of A behaves like (1/2) e^{-2x}.
  CHECK_THAT(A_func(20.0), WithinRel(0.5 * std::exp(-40.0), 1e-10));
  // Deep left arguments underflow to exact zero without overflow.
  CHECK(A_func(-400.0) == 0.0);
  CHECK(B_func(-400.0) == 0.0);
  CHECK_THAT(B_func(400.0), WithinRel(1.0, 1e-15));
}

TEST_CASE("profile sum matches frozen values and is periodic") {
  CHECK_THAT(profile_sum({1.0}, 0.0), WithinRel(0.468854630524095, 1e-12));
  CHECK_THAT(profile_sum({1.0}, 0.37), WithinRel(0.515726815256222, 1e-12));
  CHECK_THAT(profile_sum({5.0}, 0.5), WithinRel(0.003357795572626, 1e-12));
  CHECK_THAT(profile_sum({0.3}, 0.25), WithinRel(1.666666341095702, 1e-12));

  for (double x : {0.0, 0.21, 0.85}) {
    for (double lamT : {0.3, 1.0, 5.0}) {
      CHECK_THAT(profile_sum({lamT}, x + 1.0),
                 WithinRel(profile_sum({lamT}, x), 1e-12));
      CHECK(profile_sum({lamT}, x) > 0.0);
    }
  }

  // Adiabatic regime: one term dominates the whole sum.
  double dominant = A_func(5.0 * 0.5);
  CHECK_THAT(profile_sum({5.0}, 0.5), WithinRel(dominant, 1e-4));
}

TEST_CASE("fourier coefficients match frozen values") {
  CHECK_THAT(fourier_coefficient({1.0}, 0).real(), WithinRel(0.5, 1e-14));
  CHECK_THAT(fourier_coefficient({2.0}, 0).real(), WithinRel(0.25, 1e-14));
  CHECK(fourier_coefficient({1.0}, 0).imag() == 0.0);

  auto c11 = fourier_coefficient({1.0}, 1);
  CHECK_THAT(c11.real(), WithinRel(-0.015481831074241, 1e-11));
  CHECK_THAT(c11.imag(), WithinRel(0.003944185640825, 1e-11));

  auto c32 = fourier_coefficient({2.0}, 3);
  CHECK_THAT(c32.real(), WithinRel(7.811865328713454e-04, 1e-11));
  CHECK_THAT(c32.imag(), WithinRel(-2.795150736303251e-04, 1e-11));

  // Conjugate symmetry keeps the series real.
  for (long long q = 1; q <= 5; ++q) {
    auto cp = fourier_coefficient({0.7}, q);
    auto cm = fourier_coefficient({0.7}, -q);
    CHECK_THAT(cm.real(), WithinRel(cp.real(), 1e-13));
    CHECK_THAT(cm.imag(), WithinRel(-cp.imag(), 1e-13));
  }

  CHECK(fourier_q_max({1.0}) == 13);
}

TEST_CASE("both representations agree on a dense grid") {
  for (double lamT : {0.3, 0.5, 1.0, 2.0, 5.0}) {
    double worst = 0.0;
    for (int i = 0; i < 128; ++i) {
      double x = double(i) / 128;
      worst = std::max(worst, std::fabs(profile_sum({lamT}, x) -
                                        profile_fourier({lamT}, x)));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("profile integrates to the zeroth fourier coefficient") {
  for (double lamT : {0.5, 1.0, 2.0}) {
    double mass = integrate([&](double x) { return profile_sum({lamT}, x); },
                            0.0, 1.0);
    CHECK_THAT(mass, WithinAbs(1.0 / (2.0 * lamT), 1e-8));
  }
}

TEST_CASE("profile flattens as the period shrinks") {
  double prev_ratio = 1e300;
  for (double lamT : {5.0, 2.0, 1.0, 0.5, 0.3}) {
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 512; ++i) {
      double v = profile_sum({lamT}, double(i) / 512);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double ratio = hi / lo;
    CHECK(ratio < prev_ratio);
    prev_ratio = ratio;
  }
}

TEST_CASE("finite sum matches frozen value and closes under recurrence") {
  // Frozen from the reference scenario at t = 12.3, sigma = 0.35.
  SumParams sp;
  sp.n = 12;
  sp.eta = -std::log(0.35);
  sp.lambdaT = 1.0;
  sp.theta_bar = 2.874910003456389;
  sp.theta0 = 0.055791292020610;
  CHECK_THAT(S_tilde(sp), WithinRel(1.485607774590189e-02, 1e-10));

  // Single-term case reduces to one A * B product.
  SumParams s1 = sp;
  s1.n = 1;
  CHECK_THAT(S_tilde(s1),
             WithinRel(A_func(sp.theta_bar - sp.eta) *
                           B_func(sp.lambdaT - sp.eta + sp.theta0),
                       1e-14));

  // Raising eta by one period step while dropping two terms reproduces the
  // same value: the boundary terms are below double resolution.
  SumParams a;
  a.n = 40;
  a.eta = 3.0 + 1.0;
  a.lambdaT = 1.0;
  a.theta_bar = 0.37;
  a.theta0 = 0.62;
  SumParams b = a;
  b.n = 38;
  b.eta = 3.0;
  double va = S_tilde(a), vb = S_tilde(b);
  CHECK(std::fabs(va - vb) <= 1e-6 * vb);
}

TEST_CASE("bilateral sum equals the profile at the rescaled argument") {
  ModelSpec m{PeriodicFunction(1.0, 1.0, {}, {0.1}),
              PeriodicFunction(1.0, 2.2, {0.44}, {}), 0.1, 0.55, 0.35};
  RateReport rep = find_rate_minimum(m);
  const double lamT = rep.lambda * m.period();
  for (double t : {8.2, 12.3}) {
    for (double eta : {1.05, 2.0}) {
      double expected =
          profile_sum({lamT}, (eta - theta(m, rep, t)) / lamT);
      CHECK_THAT(S_hat(m, rep, eta, t), WithinRel(expected, 1e-14));
    }
  }
}
