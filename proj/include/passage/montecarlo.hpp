#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "passage/coefficients.hpp"
#include "passage/quadrature.hpp"
#include "passage/rng.hpp"

// Path simulator for the two-level system. Each substep draws the branch
// endpoint from its exact Gaussian transition (integrating-factor closed
// form, weights quadratured once per period), so discretization only enters
// through the substep resolution of switching and crossing times. A
// Brownian-bridge test recovers mid-substep hits of +1 exactly in law;
// optional endpoint-frozen bridges approximate the same for the switching
// levels, whose boundaries move in the transformed coordinates.

namespace passage {

struct SimConfig {
  int substeps_per_period = 48;
  std::int64_t n_paths = 10000;
  int t_max_periods = 32;
  std::uint64_t seed = 1;
  // Bridge test for +1 crossings inside a substep (exact in law).
  bool bridge_correction = true;
  // Bridge tests for the switching levels (approximate).
  bool switch_level_bridge = false;
  int threads = 1;
  // Unstable branch only, started at 1 - delta1, never switching: isolates
  // the crossing law the closed forms describe.
  bool single_branch = false;
  double start_time = 0.0;
};

// Times are absolute and sit on substep ends; NaN marks "never happened"
// within the horizon.
struct PathOutcome {
  double tau_plus = std::numeric_limits<double>::quiet_NaN();
  double first_up_time = std::numeric_limits<double>::quiet_NaN();
  std::int32_t n_switches = 0;
};

struct SimulationResult {
  SimConfig config;
  std::vector<PathOutcome> outcomes;
  std::vector<std::string> warnings;
};

namespace detail {

// Per-substep transition data over one period; index j is the substep
// number modulo substeps_per_period, valid for any start time because the
// coefficients are periodic.
//   em, ep:   e^{-alpha}, e^{+alpha} across the substep
//   swm, swp: sigma * sqrt of the branch variance increments
//   bm, bp:   bridge exponent scales em/(sigma^2 wm), ep/(sigma^2 wp)
struct SubstepTables {
  double h = 0.0;
  std::vector<double> em, ep, swm, swp, bm, bp;
};

inline SubstepTables build_tables(const ModelSpec& spec,
                                  const SimConfig& cfg) {
  const int sub = cfg.substeps_per_period;
  SubstepTables tab;
  tab.h = spec.period() / sub;
  tab.em.resize(sub);
  tab.ep.resize(sub);
  tab.swm.resize(sub);
  tab.swp.resize(sub);
  tab.bm.resize(sub);
  tab.bp.resize(sub);
  const double s2 = spec.sigma * spec.sigma;
  for (int j = 0; j < sub; ++j) {
    const double t0 = cfg.start_time + j * tab.h;
    const double t1 = t0 + tab.h;
    const double P1 = spec.a.primitive(t1);
    const double ah = P1 - spec.a.primitive(t0);
    const double wm = integrate(
        [&](double u) {
          const double gu = spec.g(u);
          return std::exp(-2.0 * (P1 - spec.a.primitive(u))) * gu * gu;
        },
        t0, t1, 1e-13, 0.0);
    const double wp = integrate(
        [&](double u) {
          const double gu = spec.g(u);
          return std::exp(2.0 * (P1 - spec.a.primitive(u))) * gu * gu;
        },
        t0, t1, 1e-13, 0.0);
    tab.em[j] = std::exp(-ah);
    tab.ep[j] = std::exp(ah);
    tab.swm[j] = spec.sigma * std::sqrt(wm);
    tab.swp[j] = spec.sigma * std::sqrt(wp);
    tab.bm[j] = tab.em[j] / (s2 * wm);
    tab.bp[j] = tab.ep[j] / (s2 * wp);
  }
  return tab;
}

// Bridge crossings with exponents beyond this are never sampled; the miss
// probability is below e^{-40} per substep.
constexpr double kBridgeExponentCap = 40.0;

inline PathOutcome run_path(const ModelSpec& spec, const SimConfig& cfg,
                            const SubstepTables& tab, const CounterRng& rng,
                            std::uint64_t path) {
  const double L1 = 1.0 - spec.delta1;
  const double L2 = 1.0 - spec.delta2;
  const int sub = cfg.substeps_per_period;
  const std::uint32_t n_steps =
      std::uint32_t(sub) * std::uint32_t(cfg.t_max_periods);

  PathOutcome out;
  bool plus = cfg.single_branch;
  double y = plus ? L1 : -1.0;

  for (std::uint32_t j = 0; j < n_steps; ++j) {
    const int jm = int(j % std::uint32_t(sub));
    const double t1 = cfg.start_time + double(j + 1) * tab.h;
    const double z = rng.normal(path, j);

    if (plus) {
      const double y1 = 1.0 + (y - 1.0) * tab.ep[jm] + tab.swp[jm] * z;
      if (y1 > 1.0) {
        out.tau_plus = t1;
        return out;
      }
      if (cfg.bridge_correction) {
        const double expo = 2.0 * (1.0 - y) * (1.0 - y1) * tab.bp[jm];
        if (expo < kBridgeExponentCap &&
            rng.uniform(path, j, DrawSlot::bridge_top) <= std::exp(-expo)) {
          out.tau_plus = t1;
          return out;
        }
      }
      if (!cfg.single_branch) {
        if (y1 < L2) {
          plus = false;
          ++out.n_switches;
        } else if (cfg.switch_level_bridge) {
          const double expo = 2.0 * (y - L2) * (y1 - L2) * tab.bp[jm];
          if (expo < kBridgeExponentCap &&
              rng.uniform(path, j, DrawSlot::bridge_down) <=
                  std::exp(-expo)) {
            plus = false;
            ++out.n_switches;
          }
        }
      }
      y = y1;
    } else {
      const double y1 = -1.0 + (y + 1.0) * tab.em[jm] + tab.swm[jm] * z;
      bool crossed = y1 > L1;
      if (!crossed && cfg.switch_level_bridge) {
        const double expo = 2.0 * (L1 - y) * (L1 - y1) * tab.bm[jm];
        crossed = expo < kBridgeExponentCap &&
                  rng.uniform(path, j, DrawSlot::bridge_up) <=
                      std::exp(-expo);
      }
      if (crossed) {
        plus = true;
        ++out.n_switches;
        if (std::isnan(out.first_up_time)) out.first_up_time = t1;
        // A jump past both levels in one substep switches and crosses.
        if (y1 > 1.0) {
          out.tau_plus = t1;
          return out;
        }
      }
      y = y1;
    }
  }
  return out;
}

}  // namespace detail

inline SimulationResult simulate(const ModelSpec& spec,
                                 const SimConfig& cfg) {
  if (cfg.substeps_per_period < 1)
    throw std::invalid_argument("simulate: substeps_per_period must be >= 1");
  if (cfg.n_paths < 1)
    throw std::invalid_argument("simulate: n_paths must be >= 1");
  if (cfg.t_max_periods < 1)
    throw std::invalid_argument("simulate: t_max_periods must be >= 1");
  if (cfg.threads < 1)
    throw std::invalid_argument("simulate: threads must be >= 1");
  if (!std::isfinite(cfg.start_time))
    throw std::invalid_argument("simulate: start_time must be finite");

  SimulationResult res;
  res.config = cfg;

  const double lh = spec.lambda() * spec.period() / cfg.substeps_per_period;
  if (lh > 0.05) {
    res.warnings.push_back(
        "lambda * h = " + std::to_string(lh) +
        " exceeds 0.05; switching times are coarsely resolved");
  }

  const detail::SubstepTables tab = detail::build_tables(spec, cfg);
  const CounterRng rng(cfg.seed);
  res.outcomes.resize(std::size_t(cfg.n_paths));

  auto worker = [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t p = lo; p < hi; ++p) {
      res.outcomes[std::size_t(p)] =
          detail::run_path(spec, cfg, tab, rng, std::uint64_t(p));
    }
  };

  if (cfg.threads == 1) {
    worker(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk =
        (cfg.n_paths + cfg.threads - 1) / cfg.threads;
    for (int k = 0; k < cfg.threads; ++k) {
      const std::int64_t lo = std::int64_t(k) * chunk;
      const std::int64_t hi = std::min<std::int64_t>(lo + chunk, cfg.n_paths);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return res;
}

// Histogram density of the crossing times with normal-approximation 95%
// binomial intervals. Counts outside the edges are not binned; paths that
// never crossed show up in censored.
struct DensityEstimate {
  std::vector<double> t_lo, t_hi;
  std::vector<std::int64_t> counts;
  std::vector<double> density, ci_lo, ci_hi;
  std::int64_t total = 0;
  std::int64_t censored = 0;
};

inline DensityEstimate estimate_density(const SimulationResult& sim,
                                        const std::vector<double>& edges) {
  if (edges.size() < 2)
    throw std::invalid_argument("estimate_density: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument(
          "estimate_density: edges must increase strictly");
  }

  const std::size_t nbins = edges.size() - 1;
  DensityEstimate est;
  est.t_lo.assign(edges.begin(), edges.end() - 1);
  est.t_hi.assign(edges.begin() + 1, edges.end());
  est.counts.assign(nbins, 0);
  est.total = std::int64_t(sim.outcomes.size());

  for (const PathOutcome& o : sim.outcomes) {
    if (std::isnan(o.tau_plus)) {
      ++est.censored;
      continue;
    }
    const auto it =
        std::upper_bound(edges.begin(), edges.end(), o.tau_plus);
    if (it == edges.begin() || it == edges.end()) continue;
    ++est.counts[std::size_t(it - edges.begin()) - 1];
  }

  est.density.resize(nbins);
  est.ci_lo.resize(nbins);
  est.ci_hi.resize(nbins);
  const double n = double(est.total);
  for (std::size_t b = 0; b < nbins; ++b) {
    const double width = est.t_hi[b] - est.t_lo[b];
    const double p = double(est.counts[b]) / n;
    const double half = 1.96 * std::sqrt(p * (1.0 - p) / n) / width;
    est.density[b] = p / width;
    est.ci_lo[b] = std::max(0.0, est.density[b] - half);
    est.ci_hi[b] = est.density[b] + half;
  }
  return est;
}

}  // namespace passage
