#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "bdce/channel_model.hpp"
#include "bdce/types.hpp"

namespace bdce {

struct SamplingGrid {
  std::vector<double> psi_grid, eta_grid, tau_grid;
  double psi_delta = 0, eta_delta = 0, tau_delta = 0;
  int K_an = 0, K_sl = 0, K_de = 0, K = 0;
  bool eta_fallback = false;  // threshold unreachable, single slope sample
  std::string report;

  struct Tuple {
    int k_an, k_sl, k_de;
  };
  Tuple index_map(int k) const;
  int flatten(int k_an, int k_sl, int k_de) const;
  double psi_of(int k) const { return psi_grid[index_map(k).k_an]; }
  double eta_of(int k) const { return eta_grid[index_map(k).k_sl]; }
  double tau_of(int k) const { return tau_grid[index_map(k).k_de]; }
};

// |<c(0,0,fc), c(eta,0,fc)>|, both unit norm
double slope_coherence(double eta, const ScenarioConfig& cfg);
SamplingGrid build_grid(const ScenarioConfig& cfg, double eta_coherence_threshold = 0.5);

struct Dictionary {
  CMat U, U_psi, U_eta, U_tau;
  // grid tuples whose amplitude model is invalid get the far-field amplitude
  int amplitude_fallbacks = 0;
  std::vector<bool> fallback;
};

// column generator; amplitude falls back to uniform where the model is invalid
CVec dictionary_column(double psi, double eta, double tau, const ScenarioConfig& cfg,
                       bool* fell_back = nullptr);
// analytic partials of dictionary_column wrt psi, eta, tau
std::array<CVec, 3> dictionary_column_derivs(double psi, double eta, double tau,
                                             const ScenarioConfig& cfg);

Dictionary build_dictionary(const SamplingGrid& grid, const ScenarioConfig& cfg,
                            double max_bytes = 4e9);

// binary cache keyed by a hash of everything the dictionary depends on
std::string dictionary_cache_key(const ScenarioConfig& cfg, double threshold);
bool load_dictionary(const std::string& path, const std::string& key, Dictionary& out);
void save_dictionary(const std::string& path, const std::string& key, const Dictionary& d);
Dictionary cached_dictionary(const std::string& dir, const SamplingGrid& grid,
                             const ScenarioConfig& cfg, double threshold);

// paths sitting exactly on grid tuples (valid amplitude only), distinct indices
std::vector<PathParams> on_grid_paths(std::mt19937_64& rng, const SamplingGrid& grid,
                                      const Dictionary& dict, int L,
                                      std::vector<int>* indices = nullptr);
// nearest grid tuple of a path
int nearest_index(const PathParams& p, const SamplingGrid& grid);

}  // namespace bdce
