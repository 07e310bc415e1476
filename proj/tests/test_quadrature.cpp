#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "passage/quadrature.hpp"

using passage::gauss16;
using passage::integrate;

TEST_CASE("single panel is exact for low-degree polynomials") {
  auto cubic = [](double x) { return x * x * x - 2.0 * x + 1.0; };
  CHECK(gauss16(cubic, 0.0, 1.0) == Catch::Approx(0.25).epsilon(1e-15));
  auto deg15 = [](double x) { return std::pow(x, 15); };
  CHECK(gauss16(deg15, 0.0, 1.0) == Catch::Approx(1.0 / 16.0).epsilon(1e-14));
}

TEST_CASE("adaptive quadrature on smooth integrands") {
  auto r = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == Catch::Approx(std::numbers::e - 1.0).epsilon(1e-13));

  r = integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
  CHECK(r.value == Catch::Approx(2.0).epsilon(1e-13));

  // Moderately oscillatory with exact zero value.
  r = integrate([](double x) { return std::cos(40.0 * std::numbers::pi * x); },
                0.0, 1.0);
  CHECK(std::abs(r.value) < 1e-12);
}

TEST_CASE("orientation and degenerate interval") {
  auto f = [](double x) { return x; };
  CHECK(integrate(f, 1.0, 0.0).value == Catch::Approx(-0.5).epsilon(1e-14));
  CHECK(integrate(f, 2.0, 2.0).value == 0.0);
}

TEST_CASE("sharp peak is resolved by subdivision") {
  // Narrow Gaussian bump integrates to nearly sqrt(pi) * width.
  const double w = 1e-3;
  auto f = [w](double x) {
    const double u = (x - 0.37) / w;
    return std::exp(-u * u);
  };
  auto r = integrate(f, 0.0, 1.0, 1e-12, 1e-16);
  CHECK(r.value ==
        Catch::Approx(std::sqrt(std::numbers::pi) * w).epsilon(1e-10));
  CHECK(r.panels > 16);
}
