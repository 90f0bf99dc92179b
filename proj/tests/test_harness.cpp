#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdce/harness.hpp"

using namespace bdce;

namespace {
// small scenario so whole experiments run in well under a second
ExperimentSpec tiny() {
  ExperimentSpec s;
  s.scenario.N = 16;
  s.scenario.Np = 4;
  s.scenario.Nrf = 4;
  s.scenario.Nps = 2;
  s.scenario.L = 2;
  s.values = {5, 15};
  s.trials = 4;
  s.seed = 99;
  s.hmp.max_iter = 30;
  s.mdgpp.T_ini = 15;
  s.mdgpp.T_ref = 4;
  s.record_wall_time = false;
  return s;
}
}  // namespace

TEST_CASE("nmse") {
  const CVec h = CVec::Constant(10, cd(1, 1));
  CHECK(nmse_db({h, h}, {h, h}) == -300.0);
  CHECK(nmse_db({CVec::Zero(10)}, {h}) == doctest::Approx(0.0));
  CVec e = CVec::Zero(10);
  e[0] = cd(0, std::sqrt(0.01 * h.squaredNorm()));
  CHECK(nmse_db({h + e, h - e}, {h, h}) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK_THROWS_AS(nmse_ratio(h, CVec::Zero(10)), Error);
  CHECK_THROWS_AS(nmse_ratio(CVec::Zero(3), h), Error);
}

TEST_CASE("sweep application") {
  const ScenarioConfig base = desk_scale();
  CHECK(apply_sweep(base, "snr_db", 7).snr_db == 7);
  CHECK(apply_sweep(base, "n_pilot_symbols", 8).M() == base.Nrf * 8);
  const ScenarioConfig e = apply_sweep(base, "eta_max", 0.1);
  CHECK(e.eta_sample_max() == doctest::Approx(0.1));
  CHECK(e.eta_max() == doctest::Approx(0.1));
  const ScenarioConfig b = apply_sweep(base, "bandwidth", 800e6);
  CHECK(b.df_pilot == doctest::Approx(50e6));
  CHECK(b.Np == base.Np);
  CHECK(b.tau_max == doctest::Approx(0.25 / 50e6));
  CHECK_THROWS_AS(apply_sweep(base, "nope", 1), Error);
}

TEST_CASE("spec validation") {
  ExperimentSpec s = tiny();
  s.trials = 0;
  CHECK_THROWS_AS(validate(s), Error);
  s = tiny();
  s.sweep_var = "n_pilot_symbols";
  s.values = {2.5};
  CHECK_THROWS_AS(validate(s), Error);
  s = tiny();
  s.estimators = {"hmp", "lasso"};
  CHECK_THROWS_AS(validate(s), Error);
  s = tiny();
  s.values.clear();
  CHECK_THROWS_AS(validate(s), Error);
}

TEST_CASE("trial seeds depend on seed and trial only") {
  CHECK(trial_seed(1, 0) != trial_seed(1, 1));
  CHECK(trial_seed(1, 0) != trial_seed(2, 0));
  CHECK(trial_seed(5, 3) == trial_seed(5, 3));
}

TEST_CASE("csv schema and determinism across thread counts") {
  ExperimentSpec s = tiny();
  s.threads = 1;
  const ExperimentResult a = run_experiment(s);
  s.threads = 4;
  const ExperimentResult b = run_experiment(s);
  const std::string ca = csv_string(a.records), cb = csv_string(b.records);
  CHECK(ca == cb);
  std::istringstream is(ca);
  std::string header;
  std::getline(is, header);
  CHECK(header == "sweep_var,sweep_value,estimator,nmse_db,trials,wall_ms");
  CHECK(a.records.size() == 2 * 4);
  for (const auto& r : a.records) {
    CHECK(std::isfinite(r.nmse_db));
    CHECK(r.trials == 4);
    CHECK(r.flagged == 0);
  }
  CHECK_FALSE(a.flag_breach);
}

TEST_CASE("oracle is exact on noiseless on-grid data") {
  ExperimentSpec s = tiny();
  s.on_grid = true;
  s.values = {std::numeric_limits<double>::infinity()};
  s.estimators = {"oracle"};
  const ExperimentResult r = run_experiment(s);
  CHECK(r.records[0].nmse_db <= -120);
}

TEST_CASE("output file and dictionary cache") {
  const auto dir = std::filesystem::temp_directory_path() / "bdce_harness_test";
  std::filesystem::remove_all(dir);
  ExperimentSpec s = tiny();
  s.estimators = {"somp"};
  s.output = (dir / "out.csv").string();
  s.dict_cache_dir = (dir / "cache").string();
  std::filesystem::create_directories(dir);
  const ExperimentResult r1 = run_experiment(s);
  const ExperimentResult r2 = run_experiment(s);
  std::ifstream f(s.output, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == csv_string(r1.records));
  CHECK(csv_string(r1.records) == csv_string(r2.records));
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "cache"), {}) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("json round trip") {
  ExperimentSpec s = tiny();
  s.sweep_var = "bandwidth";
  s.values = {200e6, 400e6};
  s.estimators = {"hmp", "oracle"};
  s.hmp.rho0 = 0.6;
  s.mdgpp.order = {Family::Tau, Family::Psi, Family::Eta};
  s.mdgpp.E_th = 0.1;
  s.scenario.tau_max = 3e-9;
  const ExperimentSpec t = spec_from_json_text(spec_to_json_text(s));
  CHECK(spec_to_json_text(t) == spec_to_json_text(s));
  CHECK(t.values == s.values);
  CHECK(t.scenario.N == 16);
  CHECK(t.scenario.tau_max == 3e-9);
  CHECK(t.mdgpp.order[0] == Family::Tau);
  CHECK(t.hmp.rho0 == 0.6);

  const ExperimentSpec d = spec_from_json_text(R"({"scenario": "desk", "trials": 3})");
  CHECK(d.trials == 3);
  CHECK(d.scenario.N == 64);
  CHECK(d.scenario.tau_max == doctest::Approx(0.25 / 25e6));
  CHECK_THROWS(spec_from_json_text(R"({"scenario": "huge"})"));
  CHECK_THROWS(spec_from_json_text(R"({"sweep": {"var": "x", "values": [1]}})"));
}
