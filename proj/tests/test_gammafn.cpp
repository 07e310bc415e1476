#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "passage/gammafn.hpp"

using Catch::Matchers::WithinRel;
using passage::gamma_fn;

namespace {
constexpr double kPi = 3.141592653589793238462643;

double rel_err(std::complex<double> got, std::complex<double> want) {
  return std::abs(got - want) / std::abs(want);
}
}  // namespace

TEST_CASE("gamma matches factorials and half-integer values") {
  CHECK_THAT(gamma_fn({1.0, 0.0}).real(), WithinRel(1.0, 1e-13));
  CHECK_THAT(gamma_fn({2.0, 0.0}).real(), WithinRel(1.0, 1e-13));
  CHECK_THAT(gamma_fn({5.0, 0.0}).real(), WithinRel(24.0, 1e-13));
  CHECK_THAT(gamma_fn({0.5, 0.0}).real(),
             WithinRel(std::sqrt(kPi), 1e-13));
  CHECK(std::abs(gamma_fn({5.0, 0.0}).imag()) < 1e-13);
}

TEST_CASE("gamma matches frozen complex values") {
  auto g1 = gamma_fn({1.5, -2.5});
  CHECK(rel_err(g1, {0.047852328112029621, -0.11646735440110321}) < 1e-12);

  auto g2 = gamma_fn({1.0, -1.0});
  CHECK(rel_err(g2, {0.49801566811835604, 0.15494982830181069}) < 1e-12);
}

TEST_CASE("gamma modulus on the critical strip has a closed form") {
  // |Gamma(1 + iy)|^2 = pi y / sinh(pi y).
  for (double y : {0.5, 1.0, 3.0, 8.0, 20.0}) {
    double m2 = std::norm(gamma_fn({1.0, y}));
    CHECK_THAT(m2, WithinRel(kPi * y / std::sinh(kPi * y), 1e-12));
  }
}

TEST_CASE("gamma satisfies the recurrence and conjugate symmetry") {
  for (std::complex<double> z :
       {std::complex<double>{1.0, -4.0}, {0.7, 2.3}, {1.5, -12.0}}) {
    CHECK(rel_err(gamma_fn(z + 1.0), z * gamma_fn(z)) < 1e-12);
    auto gc = gamma_fn(std::conj(z));
    CHECK(rel_err(gc, std::conj(gamma_fn(z))) < 1e-13);
  }
}

TEST_CASE("reflection covers the left half plane") {
  // Gamma(z) Gamma(1 - z) = pi / sin(pi z).
  for (std::complex<double> z :
       {std::complex<double>{-0.5, 1.0}, {0.2, -2.0}, {-1.3, 0.4}}) {
    auto lhs = gamma_fn(z) * gamma_fn(1.0 - z);
    auto rhs = kPi / std::sin(kPi * z);
    CHECK(rel_err(lhs, rhs) < 1e-11);
  }
}
