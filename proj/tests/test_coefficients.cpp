#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "passage/coefficients.hpp"

using passage::ModelSpec;
using passage::PeriodicFunction;

TEST_CASE("evaluation and primitive of a trig polynomial") {
  // a(t) = 1 + 0.5 sin(2 pi t): primitive(0.5) = 0.5 + 1/(2 pi).
  PeriodicFunction a(1.0, 1.0, {}, {0.5});
  CHECK(a(0.25) == Catch::Approx(1.5).epsilon(1e-15));
  CHECK(a.primitive(0.5) ==
        Catch::Approx(0.5 + 1.0 / (2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(a.primitive(0.0) == 0.0);

  // Reference drift a(t) = 1 + 0.1 sin(2 pi t).
  PeriodicFunction aref(1.0, 1.0, {}, {0.1});
  CHECK(aref.primitive(0.73) == Catch::Approx(0.747910234674734).epsilon(1e-13));
}

TEST_CASE("primitive grows by mean * T per period") {
  PeriodicFunction f(2.0, 1.3, {0.4, -0.2}, {0.1});
  const double lamT = 1.3 * 2.0;
  for (double t : {0.0, 0.31, 1.7}) {
    CHECK(f.primitive(t + 2.0) - f.primitive(t) ==
          Catch::Approx(lamT).margin(1e-13));
  }
}

TEST_CASE("extrema with interior and boundary locations") {
  // 2.2 + 0.44 cos(2 pi t): max 2.64 at t=0 (wraps), min 1.76 at t=0.5.
  PeriodicFunction g(1.0, 2.2, {0.44});
  auto [tmax, vmax] = g.max_point();
  auto [tmin, vmin] = g.min_point();
  CHECK(vmax == Catch::Approx(2.64).epsilon(1e-12));
  CHECK(vmin == Catch::Approx(1.76).epsilon(1e-12));
  CHECK(std::min(tmax, 1.0 - tmax) < 1e-6);
  CHECK(tmin == Catch::Approx(0.5).margin(1e-6));

  // Interior maximum of a mixed harmonic: 1 + 0.3 sin(2 pi t) peaks at t=0.25.
  PeriodicFunction h(1.0, 1.0, {}, {0.3});
  auto [th, vh] = h.max_point();
  CHECK(th == Catch::Approx(0.25).margin(1e-9));
  CHECK(vh == Catch::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("model validation") {
  PeriodicFunction a(1.0, 1.0, {}, {0.1});
  PeriodicFunction g(1.0, 2.2, {0.44});
  CHECK_NOTHROW(ModelSpec(a, g, 0.1, 0.55, 0.35));

  PeriodicFunction g2(2.0, 2.2, {0.44});
  CHECK_THROWS_AS(ModelSpec(a, g2, 0.1, 0.55, 0.35), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec(a, g, 0.55, 0.1, 0.35), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec(a, g, 0.1, 0.1, 0.35), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec(a, g, 0.1, 1.2, 0.35), std::invalid_argument);
  CHECK_THROWS_AS(ModelSpec(a, g, 0.1, 0.55, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PeriodicFunction(1.0, NAN), std::invalid_argument);

  ModelSpec m(a, g, 0.1, 0.55, 0.35);
  CHECK(m.lambda() == 1.0);
  CHECK(m.period() == 1.0);
}
