#include "bdce/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "bdce/baselines.hpp"
#include "bdce/dictionary.hpp"
#include "bdce/kernels.hpp"
#include "bdce/measurement.hpp"

namespace bdce {

double nmse_ratio(const CVec& h_hat, const CVec& h) {
  const double e = h.squaredNorm();
  if (!(e > 0)) throw Error("nmse: zero-norm truth");
  if (h_hat.size() != h.size()) throw Error("nmse: length mismatch");
  return (h_hat - h).squaredNorm() / e;
}

double nmse_db_from_ratios(const std::vector<double>& r) {
  if (r.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double v : r) s += v;
  return std::max(10 * std::log10(s / double(r.size())), -300.0);
}

double nmse_db(const std::vector<CVec>& h_hat, const std::vector<CVec>& h) {
  if (h_hat.size() != h.size()) throw Error("nmse: trial count mismatch");
  std::vector<double> r;
  for (std::size_t d = 0; d < h.size(); ++d) r.push_back(nmse_ratio(h_hat[d], h[d]));
  return nmse_db_from_ratios(r);
}

ScenarioConfig apply_sweep(const ScenarioConfig& base, const std::string& var, double v) {
  ScenarioConfig c = base;
  if (var == "snr_db") {
    c.snr_db = v;
  } else if (var == "n_pilot_symbols") {
    c.Nps = int(std::lround(v));
  } else if (var == "eta_max") {
    // dictionary range and path sampling both follow the swept bound
    c.r_min = 1.0 / v;
    c.eta_max_sample = v;
  } else if (var == "bandwidth") {
    c.df_pilot = v / c.Np;
    c.sync_derived(true);
  } else {
    throw Error("unknown sweep variable: " + var);
  }
  validate(c);
  return c;
}

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  // splitmix64 of (seed, trial); the sweep value is deliberately not mixed in
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (std::uint64_t(trial) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void validate(const ExperimentSpec& s) {
  if (s.trials < 1) throw Error("trials must be >= 1");
  if (s.values.empty()) throw Error("sweep needs at least one value");
  static const char* vars[] = {"snr_db", "n_pilot_symbols", "eta_max", "bandwidth"};
  if (std::find(std::begin(vars), std::end(vars), s.sweep_var) == std::end(vars))
    throw Error("unknown sweep variable: " + s.sweep_var);
  for (double v : s.values) {
    if (!std::isfinite(v) && s.sweep_var != "snr_db") throw Error("non-finite sweep value");
    if (s.sweep_var == "n_pilot_symbols" && (v < 1 || v != std::floor(v))) throw Error("n_pilot_symbols must be a positive integer");
    if ((s.sweep_var == "eta_max" || s.sweep_var == "bandwidth") && !(v > 0)) throw Error("sweep value must be positive");
  }
  static const char* ests[] = {"hmp", "mdgpp", "somp", "oracle"};
  if (s.estimators.empty()) throw Error("no estimators selected");
  for (const auto& e : s.estimators)
    if (std::find(std::begin(ests), std::end(ests), e) == std::end(ests)) throw Error("unknown estimator: " + e);
  validate(s.scenario);
}

namespace {

struct Model {
  ScenarioConfig cfg;
  SamplingGrid grid;
  std::shared_ptr<const Dictionary> dict;
};

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string value_tag(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%g", v);
  return b;
}

void run_trial(const ExperimentSpec& spec, const Model& mdl, double value, int trial,
               std::vector<TrialOutcome>& out) {
  const ScenarioConfig& cfg = mdl.cfg;
  const Dictionary& D = *mdl.dict;
  std::mt19937_64 rng(trial_seed(spec.seed, trial));
  std::vector<int> on_idx;
  const std::vector<PathParams> paths =
      spec.on_grid ? on_grid_paths(rng, mdl.grid, D, cfg.L, &on_idx) : sample_paths(rng, cfg);
  const CVec h = synthesize_channel(paths, cfg);
  const HybridPrecoder F = build_precoder(rng, cfg);
  const CVec s = apply_measurement(h, F);
  const double sz2 = calibrate_noise(s, cfg.snr_db);
  const ReceivedSignal rx = add_noise(s, sz2, rng);
  const CMat G = measure_matrix(D.U, F);
  const bool trace = !spec.trace_dir.empty() && trial == 0;

  for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
    const std::string& name = spec.estimators[e];
    TrialOutcome& o = out[e];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      CVec hh;
      if (name == "hmp") {
        EstimateReport r = hmp_estimate(rx.y, G, D.U, sz2, spec.hmp);
        hh = std::move(r.h_hat);
        if (trace)
          write_hmp_trace_csv(r.trace, (std::filesystem::path(spec.trace_dir) /
                                        ("hmp_" + spec.sweep_var + "_" + value_tag(value) + ".csv")).string());
      } else if (name == "mdgpp") {
        MdgppOptions mo = spec.mdgpp;
        mo.hmp = spec.hmp;
        MdgppReport r = two_stage_estimate({rx.y, D, mdl.grid, cfg, F, sz2}, G, mo);
        hh = std::move(r.h_hat);
        if (trace)
          write_mdgpp_trace_csv(r.trace, (std::filesystem::path(spec.trace_dir) /
                                          ("mdgpp_" + spec.sweep_var + "_" + value_tag(value) + ".csv")).string());
      } else if (name == "somp") {
        const int atoms = spec.somp_max_atoms > 0 ? spec.somp_max_atoms : cfg.L;
        const double tol = spec.somp_residual_factor * std::sqrt(double(rx.y.size()) * sz2);
        hh = somp_estimate(rx.y, G, D.U, atoms, tol).h_hat;
      } else if (name == "oracle") {
        std::vector<int> S = on_idx;
        if (!spec.on_grid) {
          for (const auto& p : paths) S.push_back(nearest_index(p, mdl.grid));
          std::sort(S.begin(), S.end());
          S.erase(std::unique(S.begin(), S.end()), S.end());
        }
        hh = ls_oracle(rx.y, G, D.U, S);
      }
      o.ratio = nmse_ratio(hh, h);
      o.ok = std::isfinite(o.ratio);
    } catch (const std::exception&) {
      o.ok = false;
    }
    o.ms = spec.record_wall_time ? ms_since(t0) : 0.0;
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  if (!spec.trace_dir.empty()) std::filesystem::create_directories(spec.trace_dir);

  // one model per sweep value; dictionaries shared when the key matches
  std::vector<Model> models;
  std::map<std::string, std::shared_ptr<const Dictionary>> dicts;
  for (double v : spec.values) {
    Model m;
    m.cfg = apply_sweep(spec.scenario, spec.sweep_var, v);
    m.grid = build_grid(m.cfg, spec.eta_threshold);
    const std::string key = dictionary_cache_key(m.cfg, spec.eta_threshold);
    auto it = dicts.find(key);
    if (it == dicts.end())
      it = dicts.emplace(key, std::make_shared<const Dictionary>(
                                  cached_dictionary(spec.dict_cache_dir, m.grid, m.cfg, spec.eta_threshold))).first;
    m.dict = it->second;
    models.push_back(std::move(m));
  }

  const std::size_t nv = spec.values.size(), ne = spec.estimators.size(), nt = std::size_t(spec.trials);
  ExperimentResult res;
  res.outcomes.assign(nv, std::vector<std::vector<TrialOutcome>>(ne, std::vector<TrialOutcome>(nt)));

  const std::size_t jobs = nv * nt;
  int threads = spec.threads > 0 ? spec.threads : int(std::max(1u, std::thread::hardware_concurrency()));
  threads = int(std::min<std::size_t>(std::size_t(threads), jobs));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    std::vector<TrialOutcome> buf(ne);
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t vi = j / nt, d = j % nt;
      std::fill(buf.begin(), buf.end(), TrialOutcome{});
      run_trial(spec, models[vi], spec.values[vi], int(d), buf);
      for (std::size_t e = 0; e < ne; ++e) res.outcomes[vi][e][d] = buf[e];
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // aggregation in fixed (value, estimator, trial) order
  for (std::size_t vi = 0; vi < nv; ++vi)
    for (std::size_t e = 0; e < ne; ++e) {
      NmseRecord r;
      r.sweep_var = spec.sweep_var;
      r.sweep_value = spec.values[vi];
      r.estimator = spec.estimators[e];
      std::vector<double> ratios;
      double ms = 0;
      for (const auto& o : res.outcomes[vi][e]) {
        if (o.ok) ratios.push_back(o.ratio);
        else ++r.flagged;
        ms += o.ms;
      }
      r.trials = int(ratios.size());
      r.nmse_db = nmse_db_from_ratios(ratios);
      r.wall_ms = ms;
      if (double(r.flagged) > spec.max_flagged_fraction * double(spec.trials)) res.flag_breach = true;
      res.records.push_back(r);
    }
  if (!spec.output.empty()) write_csv(res.records, spec.output);
  return res;
}

std::string csv_string(const std::vector<NmseRecord>& recs) {
  std::ostringstream os;
  os << "sweep_var,sweep_value,estimator,nmse_db,trials,wall_ms\n";
  char line[256];
  for (const auto& r : recs) {
    std::snprintf(line, sizeof line, "%s,%.10g,%s,%.6f,%d,%.3f\n", r.sweep_var.c_str(), r.sweep_value,
                  r.estimator.c_str(), r.nmse_db, r.trials, r.wall_ms);
    os << line;
  }
  return os.str();
}

void write_csv(const std::vector<NmseRecord>& recs, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << csv_string(recs);
}

}  // namespace bdce
