#include <fstream>
#include <sstream>

#include "bdce/harness.hpp"
#include "json.hpp"

namespace bdce {

using nlohmann::json;

namespace {

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Family family_from(const std::string& s) {
  if (s == "psi") return Family::Psi;
  if (s == "eta") return Family::Eta;
  if (s == "tau") return Family::Tau;
  throw Error("unknown perturbation family: " + s);
}

const char* family_name(Family f) {
  return f == Family::Psi ? "psi" : f == Family::Eta ? "eta" : "tau";
}

void read_scenario(const json& j, ScenarioConfig& c) {
  get(j, "fc", c.fc);
  get(j, "df_pilot", c.df_pilot);
  get(j, "N", c.N);
  get(j, "Np", c.Np);
  get(j, "Nrf", c.Nrf);
  get(j, "Nps", c.Nps);
  get(j, "r_min", c.r_min);
  get(j, "L", c.L);
  get(j, "n_o", c.n_o);
  get(j, "snr_db", c.snr_db);
  get(j, "eta_max_sample", c.eta_max_sample);
  get(j, "beam_squint", c.beam_squint);
  // spacing is always c/(2 fc); tau_max defaults to 0.25/df unless given
  c.sync_derived(!j.contains("tau_max"));
  get(j, "tau_max", c.tau_max);
}

json write_scenario(const ScenarioConfig& c) {
  return json{{"fc", c.fc},         {"df_pilot", c.df_pilot}, {"N", c.N},
              {"Np", c.Np},         {"Nrf", c.Nrf},           {"Nps", c.Nps},
              {"r_min", c.r_min},   {"L", c.L},               {"n_o", c.n_o},
              {"tau_max", c.tau_max}, {"snr_db", c.snr_db},   {"eta_max_sample", c.eta_max_sample},
              {"beam_squint", c.beam_squint}};
}

void read_hmp(const json& j, HmpOptions& o) {
  get(j, "max_iter", o.max_iter);
  get(j, "tol", o.tol);
  get(j, "rho0", o.rho0);
  get(j, "rho_min", o.rho_min);
  get(j, "max_retries", o.max_retries);
  get(j, "lambda_init", o.lambda_init);
  get(j, "lambda_min", o.lambda_min);
  get(j, "learn", o.learn);
  get(j, "noise_floor_rel", o.noise_floor_rel);
}

}  // namespace

ExperimentSpec spec_from_json_text(const std::string& text) {
  const json j = json::parse(text);
  ExperimentSpec s;
  if (j.contains("scenario")) {
    if (j["scenario"].is_string()) {
      const std::string name = j["scenario"];
      if (name == "desk") s.scenario = desk_scale();
      else if (name == "full") s.scenario = full_scale();
      else throw Error("unknown scenario preset: " + name);
    } else {
      read_scenario(j["scenario"], s.scenario);
    }
  }
  if (j.contains("sweep")) {
    get(j["sweep"], "var", s.sweep_var);
    get(j["sweep"], "values", s.values);
  }
  get(j, "trials", s.trials);
  get(j, "seed", s.seed);
  get(j, "estimators", s.estimators);
  get(j, "output", s.output);
  get(j, "threads", s.threads);
  get(j, "on_grid", s.on_grid);
  get(j, "record_wall_time", s.record_wall_time);
  get(j, "eta_threshold", s.eta_threshold);
  get(j, "dict_cache_dir", s.dict_cache_dir);
  get(j, "trace_dir", s.trace_dir);
  get(j, "somp_max_atoms", s.somp_max_atoms);
  get(j, "somp_residual_factor", s.somp_residual_factor);
  get(j, "max_flagged_fraction", s.max_flagged_fraction);
  if (j.contains("hmp")) read_hmp(j["hmp"], s.hmp);
  if (j.contains("mdgpp")) {
    const json& m = j["mdgpp"];
    get(m, "E_th", s.mdgpp.E_th);
    get(m, "T_ini", s.mdgpp.T_ini);
    get(m, "T_ref", s.mdgpp.T_ref);
    get(m, "n_sweeps", s.mdgpp.n_sweeps);
    get(m, "target_y", s.mdgpp.target_y);
    get(m, "carrier_compensated_delay", s.mdgpp.carrier_compensated_delay);
    get(m, "stage2_rho", s.mdgpp.stage2_rho);
    if (m.contains("order")) {
      const auto names = m["order"].get<std::vector<std::string>>();
      if (names.size() != 3) throw Error("mdgpp.order needs three entries");
      for (int i = 0; i < 3; ++i) s.mdgpp.order[i] = family_from(names[i]);
    }
  }
  validate(s);
  return s;
}

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return spec_from_json_text(ss.str());
}

std::string spec_to_json_text(const ExperimentSpec& s) {
  json order = json::array();
  for (Family f : s.mdgpp.order) order.push_back(family_name(f));
  const json j{
      {"scenario", write_scenario(s.scenario)},
      {"sweep", {{"var", s.sweep_var}, {"values", s.values}}},
      {"trials", s.trials},
      {"seed", s.seed},
      {"estimators", s.estimators},
      {"output", s.output},
      {"threads", s.threads},
      {"on_grid", s.on_grid},
      {"record_wall_time", s.record_wall_time},
      {"eta_threshold", s.eta_threshold},
      {"dict_cache_dir", s.dict_cache_dir},
      {"trace_dir", s.trace_dir},
      {"somp_max_atoms", s.somp_max_atoms},
      {"somp_residual_factor", s.somp_residual_factor},
      {"max_flagged_fraction", s.max_flagged_fraction},
      {"hmp",
       {{"max_iter", s.hmp.max_iter}, {"tol", s.hmp.tol}, {"rho0", s.hmp.rho0}, {"rho_min", s.hmp.rho_min},
        {"max_retries", s.hmp.max_retries}, {"lambda_init", s.hmp.lambda_init},
        {"lambda_min", s.hmp.lambda_min}, {"learn", s.hmp.learn}, {"noise_floor_rel", s.hmp.noise_floor_rel}}},
      {"mdgpp",
       {{"E_th", s.mdgpp.E_th}, {"T_ini", s.mdgpp.T_ini}, {"T_ref", s.mdgpp.T_ref},
        {"n_sweeps", s.mdgpp.n_sweeps}, {"target_y", s.mdgpp.target_y},
        {"carrier_compensated_delay", s.mdgpp.carrier_compensated_delay},
        {"stage2_rho", s.mdgpp.stage2_rho}, {"order", order}}}};
  return j.dump(2);
}

}  // namespace bdce
