#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "passage/montecarlo.hpp"
#include "passage/theory.hpp"

using Catch::Matchers::WithinAbs;
using namespace passage;

namespace {

ModelSpec ref_spec() {
  return {PeriodicFunction(1.0, 1.0, {}, {0.1}),
          PeriodicFunction(1.0, 2.2, {0.44}, {}), 0.1, 0.55, 0.35};
}

ModelSpec strong_spec() {
  return {PeriodicFunction(1.0, 1.5, {}, {0.15}),
          PeriodicFunction(1.0, 2.45, {0.49}, {}), 0.45, 0.75, 0.35};
}

ModelSpec const_spec(double sigma) {
  return {PeriodicFunction(1.0, 1.0), PeriodicFunction(1.0, 1.0), 0.1, 0.3,
          sigma};
}

double crossed_fraction(const SimulationResult& sim, double t) {
  std::int64_t c = 0;
  for (const PathOutcome& o : sim.outcomes) {
    if (!std::isnan(o.tau_plus) && o.tau_plus <= t + 1e-12) ++c;
  }
  return double(c) / double(sim.outcomes.size());
}

}  // namespace

TEST_CASE("single-branch crossings match the exact law at grid times") {
  ModelSpec m = const_spec(0.1);
  SimConfig cfg;
  cfg.substeps_per_period = 32;
  cfg.n_paths = 20000;
  cfg.t_max_periods = 8;
  cfg.seed = 7101;
  cfg.single_branch = true;
  SimulationResult sim = simulate(m, cfg);

  // Constant coefficients give v_hat_plus(t, 0) = (1 - e^{-2t})/2 and the
  // crossing distribution in closed form; bridge-corrected sampling is
  // exact in law at substep ends, leaving only Monte Carlo error
  // (se ~ 0.0026 at this n, tolerance is four of those).
  for (double t : {0.5, 2.0, 8.0}) {
    const double vh = 0.5 * (1.0 - std::exp(-2.0 * t));
    const double exact = std::erfc(m.delta1 / (m.sigma * std::sqrt(2.0 * vh)));
    CHECK_THAT(crossed_fraction(sim, t), WithinAbs(exact, 0.012));
  }
}

TEST_CASE("bridge correction only adds crossings") {
  ModelSpec m = const_spec(0.1);
  SimConfig cfg;
  cfg.substeps_per_period = 16;
  cfg.n_paths = 5000;
  cfg.t_max_periods = 4;
  cfg.seed = 88;
  cfg.single_branch = true;

  SimulationResult with = simulate(m, cfg);
  cfg.bridge_correction = false;
  SimulationResult without = simulate(m, cfg);

  // Same seed means the same driving Gaussians, so the corrected run can
  // only cross earlier, never later.
  int strictly_earlier = 0;
  for (std::size_t p = 0; p < with.outcomes.size(); ++p) {
    const double tw = with.outcomes[p].tau_plus;
    const double to = without.outcomes[p].tau_plus;
    const double tw_eff = std::isnan(tw) ? 1e300 : tw;
    const double to_eff = std::isnan(to) ? 1e300 : to;
    CHECK(tw_eff <= to_eff);
    if (tw_eff < to_eff) ++strictly_earlier;
  }
  CHECK(strictly_earlier > 0);
}

TEST_CASE("runs replay exactly for any thread count") {
  ModelSpec m = strong_spec();
  SimConfig cfg;
  cfg.substeps_per_period = 16;
  cfg.n_paths = 600;
  cfg.t_max_periods = 6;
  cfg.seed = 424242;
  cfg.switch_level_bridge = true;

  SimulationResult one = simulate(m, cfg);
  cfg.threads = 3;
  SimulationResult three = simulate(m, cfg);

  REQUIRE(one.outcomes.size() == three.outcomes.size());
  for (std::size_t p = 0; p < one.outcomes.size(); ++p) {
    const PathOutcome& a = one.outcomes[p];
    const PathOutcome& b = three.outcomes[p];
    CHECK(a.n_switches == b.n_switches);
    CHECK((std::isnan(a.tau_plus) ? std::isnan(b.tau_plus)
                                  : a.tau_plus == b.tau_plus));
    CHECK((std::isnan(a.first_up_time) ? std::isnan(b.first_up_time)
                                       : a.first_up_time == b.first_up_time));
  }

  cfg.seed = 424243;
  SimulationResult other = simulate(m, cfg);
  bool any_diff = false;
  for (std::size_t p = 0; p < one.outcomes.size(); ++p) {
    any_diff |= one.outcomes[p].n_switches != other.outcomes[p].n_switches;
    any_diff |= std::isnan(one.outcomes[p].first_up_time) !=
                std::isnan(other.outcomes[p].first_up_time);
  }
  CHECK(any_diff);
}

TEST_CASE("switching bookkeeping is consistent") {
  ModelSpec m = strong_spec();
  SimConfig cfg;
  cfg.substeps_per_period = 32;
  cfg.n_paths = 4000;
  cfg.t_max_periods = 16;
  cfg.seed = 5;
  SimulationResult sim = simulate(m, cfg);

  std::int64_t absorbed = 0, censored = 0;
  for (const PathOutcome& o : sim.outcomes) {
    if (std::isnan(o.tau_plus)) {
      ++censored;
      continue;
    }
    ++absorbed;
    // Crossing +1 happens on the unstable branch, which the path can only
    // be on after an odd number of switches.
    REQUIRE_FALSE(std::isnan(o.first_up_time));
    CHECK(o.first_up_time <= o.tau_plus);
    CHECK(o.first_up_time > cfg.start_time);
    CHECK(o.n_switches % 2 == 1);
  }
  CHECK(absorbed > 100);
  CHECK(censored > 100);
}

TEST_CASE("first-switch histogram follows the branch-exit density shape") {
  ModelSpec m = ref_spec();
  SimConfig cfg;
  cfg.substeps_per_period = 32;
  cfg.n_paths = 200000;
  cfg.t_max_periods = 8;
  cfg.seed = 90210;
  SimulationResult sim = simulate(m, cfg);

  // Pool first up-switch times over late periods modulo the period and
  // compare the 16-bin histogram against the closed-form exit density.
  const int nb = 16;
  std::vector<double> counts(nb, 0.0);
  std::int64_t events = 0;
  for (const PathOutcome& o : sim.outcomes) {
    const double s = o.first_up_time;
    if (std::isnan(s) || s < 2.0 || s >= 8.0) continue;
    const double frac = s - std::floor(s);
    counts[std::min(nb - 1, int(frac * nb))] += 1.0;
    ++events;
  }
  REQUIRE(events > 1000);

  TheoryContext ctx = make_theory_context(m);
  std::vector<double> predicted(nb);
  for (int b = 0; b < nb; ++b) {
    predicted[b] = psi_minus(ctx, 6.0 + (b + 0.5) / nb).value;
  }

  double sc = 0.0, sp = 0.0, scc = 0.0, spp = 0.0, scp = 0.0;
  for (int b = 0; b < nb; ++b) {
    sc += counts[b];
    sp += predicted[b];
    scc += counts[b] * counts[b];
    spp += predicted[b] * predicted[b];
    scp += counts[b] * predicted[b];
  }
  const double r = (nb * scp - sc * sp) /
                   std::sqrt((nb * scc - sc * sc) * (nb * spp - sp * sp));
  CHECK(r > 0.9);
}

TEST_CASE("density estimates carry binomial confidence intervals") {
  ModelSpec m = const_spec(0.1);
  SimConfig cfg;
  cfg.substeps_per_period = 16;
  cfg.n_paths = 3000;
  cfg.t_max_periods = 4;
  cfg.seed = 13;
  cfg.single_branch = true;
  SimulationResult sim = simulate(m, cfg);

  DensityEstimate est = estimate_density(sim, {0.0, 1.0, 2.0, 4.0});
  REQUIRE(est.counts.size() == 3);
  std::int64_t binned = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    binned += est.counts[b];
    CHECK(est.ci_lo[b] <= est.density[b]);
    CHECK(est.density[b] <= est.ci_hi[b]);
    CHECK(est.density[b] ==
          double(est.counts[b]) / (double(est.total) *
                                   (est.t_hi[b] - est.t_lo[b])));
  }
  CHECK(est.total == cfg.n_paths);
  CHECK(binned + est.censored <= est.total);
  CHECK(est.censored > 0);
  // Most crossings happen in the first period for this level and noise.
  CHECK(est.counts[0] > est.counts[2]);

  CHECK_THROWS_AS(estimate_density(sim, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_density(sim, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("configuration is validated and coarse grids warn") {
  ModelSpec m = strong_spec();
  SimConfig cfg;
  cfg.n_paths = 10;
  cfg.t_max_periods = 1;

  cfg.substeps_per_period = 8;  // lambda h = 0.1875
  CHECK_FALSE(simulate(m, cfg).warnings.empty());
  cfg.substeps_per_period = 48;
  CHECK(simulate(m, cfg).warnings.empty());

  SimConfig bad = cfg;
  bad.substeps_per_period = 0;
  CHECK_THROWS_AS(simulate(m, bad), std::invalid_argument);
  bad = cfg;
  bad.n_paths = 0;
  CHECK_THROWS_AS(simulate(m, bad), std::invalid_argument);
  bad = cfg;
  bad.t_max_periods = 0;
  CHECK_THROWS_AS(simulate(m, bad), std::invalid_argument);
  bad = cfg;
  bad.threads = 0;
  CHECK_THROWS_AS(simulate(m, bad), std::invalid_argument);
}
