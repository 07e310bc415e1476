#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "passage/csv.hpp"
#include "passage/scenario.hpp"
#include "passage/version.hpp"

using namespace passage;

TEST_CASE("shipped reference scenario matches the built-in one") {
  const std::string path =
      std::string(PASSAGE_SOURCE_DIR) + "/scenarios/reference.json";
  const Scenario file = load_scenario(path);
  const Scenario ref = reference_scenario();

  CHECK(file.name == ref.name);
  CHECK(file.model.sigma == ref.model.sigma);
  CHECK(file.model.delta1 == ref.model.delta1);
  CHECK(file.sim.n_paths == ref.sim.n_paths);
  CHECK(scenario_hash(file) == scenario_hash(ref));
}

TEST_CASE("reference scenario hash is frozen") {
  // Guards both the canonical-form layout and the reference parameters:
  // a change to either invalidates previously stamped result files.
  CHECK(scenario_hash(reference_scenario()) == 0xecb26643e011ad19ull);
}

TEST_CASE("save and load round-trip preserves the scenario") {
  Scenario s = reference_scenario();
  s.name = "roundtrip";
  s.model.sigma = 0.27;
  s.sim.seed = 777;
  s.sim.start_time = 0.125;

  const auto path =
      std::filesystem::temp_directory_path() / "passage_roundtrip.json";
  save_scenario(s, path.string());
  const Scenario back = load_scenario(path.string());
  std::filesystem::remove(path);

  CHECK(back.name == "roundtrip");
  CHECK(back.model.sigma == 0.27);
  CHECK(back.sim.seed == 777);
  CHECK(back.sim.start_time == 0.125);
  CHECK(scenario_hash(back) == scenario_hash(s));
}

TEST_CASE("hash tracks physics and ignores presentation") {
  const Scenario base = reference_scenario();
  const std::uint64_t h0 = scenario_hash(base);

  Scenario s = base;
  s.name = "renamed";
  s.sim.threads = 8;
  CHECK(scenario_hash(s) == h0);

  s = base;
  s.model.sigma = 0.36;
  CHECK(scenario_hash(s) != h0);

  s = base;
  s.sim.seed = 2;
  CHECK(scenario_hash(s) != h0);

  s = base;
  s.sim.substeps_per_period = 96;
  CHECK(scenario_hash(s) != h0);

  s = base;
  s.sim.single_branch = true;
  CHECK(scenario_hash(s) != h0);
}

TEST_CASE("scenario parsing rejects malformed input") {
  const char* missing_model = R"({"levels":{"delta1":0.1,"delta2":0.5},
                                  "noise":{"sigma":0.3}})";
  CHECK_THROWS(parse_scenario_text(missing_model));

  const char* missing_sigma = R"({"model":{"T":1.0,"a":{"mean":1.0},
                                  "g":{"mean":1.0}},
                                  "levels":{"delta1":0.1,"delta2":0.5}})";
  CHECK_THROWS(parse_scenario_text(missing_sigma));

  // Levels out of order fail the model's own validation.
  const char* bad_levels = R"({"model":{"T":1.0,"a":{"mean":1.0},
                               "g":{"mean":1.0}},
                               "levels":{"delta1":0.6,"delta2":0.5},
                               "noise":{"sigma":0.3}})";
  CHECK_THROWS_AS(parse_scenario_text(bad_levels), std::invalid_argument);

  const char* not_json = "definitely not json";
  CHECK_THROWS(parse_scenario_text(not_json));
}

TEST_CASE("scenario parsing fills optional blocks with defaults") {
  const char* minimal = R"({"model":{"T":1.0,"a":{"mean":1.0},
                            "g":{"mean":1.0}},
                            "levels":{"delta1":0.1,"delta2":0.5},
                            "noise":{"sigma":0.3}})";
  const Scenario s = parse_scenario_text(minimal);
  const SimConfig def{};
  CHECK(s.name == "unnamed");
  CHECK(s.sim.substeps_per_period == def.substeps_per_period);
  CHECK(s.sim.n_paths == def.n_paths);
  CHECK(s.sim.seed == def.seed);
  CHECK(s.model.a.cos_coef.empty());
  CHECK(s.model.a.sin_coef.empty());
}

TEST_CASE("csv writer stamps provenance and formats rows") {
  std::ostringstream os;
  CsvWriter w(os, {"t", "value"}, 0xdeadbeefcafef00dull, 42);
  w.row(std::vector<double>{1.5, 0.1});
  w.row({"end", "ok"});

  const std::string expected = std::string("# scenario=deadbeefcafef00d") +
                               " seed=42 version=" + kVersion +
                               "\nt,value\n1.5,0.10000000000000001\nend,ok\n";
  CHECK(os.str() == expected);
}

TEST_CASE("csv writer rejects mismatched rows") {
  std::ostringstream os;
  CsvWriter w(os, {"a", "b", "c"}, 0, 0);
  CHECK_THROWS_AS(w.row(std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(w.row({"x", "y", "z", "w"}), std::invalid_argument);
  CHECK_THROWS_AS(CsvWriter(os, {}, 0, 0), std::invalid_argument);
}
