#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "passage/coefficients.hpp"
#include "passage/montecarlo.hpp"

// Scenario files bundle a model with simulation settings. The canonical
// form below hashes everything that determines simulation output (model,
// levels, noise, grid, seed, bridges), and deliberately excludes the name
// and thread count, which only affect presentation and wall time. Output
// files carry the hash so results stay traceable to their inputs.

namespace passage {

struct Scenario {
  std::string name;
  ModelSpec model;
  SimConfig sim;
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

inline void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline void append_coefs(std::string& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_num(out, v[i]);
  }
}

}  // namespace detail

inline std::string canonical_form(const Scenario& s) {
  std::string out;
  out.reserve(256);
  out += "T=";
  detail::append_num(out, s.model.period());
  out += ";a.mean=";
  detail::append_num(out, s.model.a.mean);
  out += ";a.cos=";
  detail::append_coefs(out, s.model.a.cos_coef);
  out += ";a.sin=";
  detail::append_coefs(out, s.model.a.sin_coef);
  out += ";g.mean=";
  detail::append_num(out, s.model.g.mean);
  out += ";g.cos=";
  detail::append_coefs(out, s.model.g.cos_coef);
  out += ";g.sin=";
  detail::append_coefs(out, s.model.g.sin_coef);
  out += ";delta1=";
  detail::append_num(out, s.model.delta1);
  out += ";delta2=";
  detail::append_num(out, s.model.delta2);
  out += ";sigma=";
  detail::append_num(out, s.model.sigma);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                ";sub=%d;paths=%lld;periods=%d;seed=%llu;bridge=%d;levels=%d;"
                "single=%d",
                s.sim.substeps_per_period,
                static_cast<long long>(s.sim.n_paths), s.sim.t_max_periods,
                static_cast<unsigned long long>(s.sim.seed),
                s.sim.bridge_correction ? 1 : 0,
                s.sim.switch_level_bridge ? 1 : 0,
                s.sim.single_branch ? 1 : 0);
  out += buf;
  out += ";start=";
  detail::append_num(out, s.sim.start_time);
  return out;
}

inline std::uint64_t scenario_hash(const Scenario& s) {
  return fnv1a64(canonical_form(s));
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  const auto coefs = [](const nlohmann::json& node,
                        const char* key) -> std::vector<double> {
    if (!node.contains(key)) return {};
    return node.at(key).get<std::vector<double>>();
  };

  const nlohmann::json& jm = j.at("model");
  const double T = jm.at("T").get<double>();
  const nlohmann::json& ja = jm.at("a");
  const nlohmann::json& jg = jm.at("g");
  PeriodicFunction a(T, ja.at("mean").get<double>(), coefs(ja, "cos"),
                     coefs(ja, "sin"));
  PeriodicFunction g(T, jg.at("mean").get<double>(), coefs(jg, "cos"),
                     coefs(jg, "sin"));

  const nlohmann::json& jl = j.at("levels");
  const nlohmann::json& jn = j.at("noise");
  ModelSpec model(std::move(a), std::move(g), jl.at("delta1").get<double>(),
                  jl.at("delta2").get<double>(),
                  jn.at("sigma").get<double>());

  Scenario s{j.value("name", std::string("unnamed")), std::move(model),
             SimConfig{}};
  if (j.contains("sim")) {
    const nlohmann::json& js = j.at("sim");
    s.sim.substeps_per_period =
        js.value("substeps_per_period", s.sim.substeps_per_period);
    s.sim.n_paths = js.value("n_paths", s.sim.n_paths);
    s.sim.t_max_periods = js.value("t_max_periods", s.sim.t_max_periods);
    s.sim.seed = js.value("seed", s.sim.seed);
    s.sim.bridge_correction =
        js.value("bridge_correction", s.sim.bridge_correction);
    s.sim.switch_level_bridge =
        js.value("switch_level_bridge", s.sim.switch_level_bridge);
    s.sim.threads = js.value("threads", s.sim.threads);
    s.sim.single_branch = js.value("single_branch", s.sim.single_branch);
    s.sim.start_time = js.value("start_time", s.sim.start_time);
  }
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["model"]["T"] = s.model.period();
  j["model"]["a"]["mean"] = s.model.a.mean;
  j["model"]["a"]["cos"] = s.model.a.cos_coef;
  j["model"]["a"]["sin"] = s.model.a.sin_coef;
  j["model"]["g"]["mean"] = s.model.g.mean;
  j["model"]["g"]["cos"] = s.model.g.cos_coef;
  j["model"]["g"]["sin"] = s.model.g.sin_coef;
  j["levels"]["delta1"] = s.model.delta1;
  j["levels"]["delta2"] = s.model.delta2;
  j["noise"]["sigma"] = s.model.sigma;
  j["sim"]["substeps_per_period"] = s.sim.substeps_per_period;
  j["sim"]["n_paths"] = s.sim.n_paths;
  j["sim"]["t_max_periods"] = s.sim.t_max_periods;
  j["sim"]["seed"] = s.sim.seed;
  j["sim"]["bridge_correction"] = s.sim.bridge_correction;
  j["sim"]["switch_level_bridge"] = s.sim.switch_level_bridge;
  j["sim"]["threads"] = s.sim.threads;
  j["sim"]["single_branch"] = s.sim.single_branch;
  j["sim"]["start_time"] = s.sim.start_time;
  return j;
}

inline Scenario parse_scenario_text(const std::string& text) {
  return scenario_from_json(nlohmann::json::parse(text));
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scenario: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_scenario: cannot open " + path);
  out << scenario_to_json(s).dump(2) << '\n';
}

// The scenario the cross-validation suite runs on: strong mean drift so the
// rate minimum is deep and unique, heavy noise modulation so the cycling
// profile is pronounced, and levels wide enough that simulated crossings
// arrive at a practical rate at sigma = 0.35.
inline Scenario reference_scenario() {
  Scenario s{"reference",
             ModelSpec(PeriodicFunction(1.0, 1.5, {}, {0.15}),
                       PeriodicFunction(1.0, 2.45, {0.49}, {}), 0.45, 0.75,
                       0.35),
             SimConfig{}};
  s.sim.substeps_per_period = 48;
  s.sim.n_paths = 1000000;
  s.sim.t_max_periods = 32;
  s.sim.seed = 1;
  return s;
}

}  // namespace passage
