#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdce/channel_model.hpp"
#include "bdce/hmp.hpp"
#include "bdce/mdgpp.hpp"

namespace bdce {

struct ExperimentSpec {
  ScenarioConfig scenario = desk_scale();
  std::string sweep_var = "snr_db";  // snr_db | n_pilot_symbols | eta_max | bandwidth
  std::vector<double> values{15.0};
  int trials = 50;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators{"hmp", "mdgpp", "somp", "oracle"};
  std::string output;
  int threads = 0;  // 0: hardware concurrency
  bool on_grid = false;
  bool record_wall_time = true;
  double eta_threshold = 0.5;
  std::string dict_cache_dir;
  std::string trace_dir;  // traces of trial 0 per sweep value
  HmpOptions hmp;
  MdgppOptions mdgpp;
  int somp_max_atoms = 0;              // 0: scenario L
  double somp_residual_factor = 1.0;   // stop at factor * sqrt(M Np sigma^2)
  double max_flagged_fraction = 0.1;
};

struct NmseRecord {
  std::string sweep_var;
  double sweep_value = 0;
  std::string estimator;
  double nmse_db = 0;
  int trials = 0;
  double wall_ms = 0;
  int flagged = 0;
};

struct TrialOutcome {
  double ratio = 0;  // |h_hat - h|^2 / |h|^2
  double ms = 0;
  bool ok = false;
};

struct ExperimentResult {
  std::vector<NmseRecord> records;
  // outcomes[value][estimator][trial]
  std::vector<std::vector<std::vector<TrialOutcome>>> outcomes;
  bool flag_breach = false;
};

double nmse_ratio(const CVec& h_hat, const CVec& h);
double nmse_db(const std::vector<CVec>& h_hat, const std::vector<CVec>& h_true);
double nmse_db_from_ratios(const std::vector<double>& ratios);

ScenarioConfig apply_sweep(const ScenarioConfig& base, const std::string& var, double value);
std::uint64_t trial_seed(std::uint64_t seed, int trial);

void validate(const ExperimentSpec& spec);
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::string csv_string(const std::vector<NmseRecord>& recs);
void write_csv(const std::vector<NmseRecord>& recs, const std::string& path);

// JSON mirror of ExperimentSpec; missing keys keep defaults
ExperimentSpec load_spec(const std::string& path);
ExperimentSpec spec_from_json_text(const std::string& text);
std::string spec_to_json_text(const ExperimentSpec& spec);

}  // namespace bdce
