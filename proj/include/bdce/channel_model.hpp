#pragma once

#include <random>
#include <vector>

#include "bdce/types.hpp"

namespace bdce {

struct ScenarioConfig {
  double fc = 30e9;          // carrier, Hz
  double df_pilot = 25e6;    // pilot subcarrier spacing, Hz
  int N = 64;                // antennas
  int Np = 16;               // pilot subcarriers
  int Nrf = 8;
  int Nps = 4;               // pilot symbols
  double r_min = 3.0;        // m
  int L = 3;
  double d_spacing = kLight / (2 * 30e9);
  int n_o = 0;
  double tau_max = 0.25 / 25e6;
  double snr_db = 15.0;
  // slope upper bound used for path sampling; <= 0 means 1/r_min
  double eta_max_sample = 0.0;
  // false: spatial response evaluated at fc on every subcarrier (no squint)
  bool beam_squint = true;

  int M() const { return Nrf * Nps; }
  double eta_max() const { return 1.0 / r_min; }
  double eta_sample_max() const { return eta_max_sample > 0 ? eta_max_sample : eta_max(); }
  // recompute derived fields after editing fc / df_pilot
  void sync_derived(bool reset_tau_max = true);
};

ScenarioConfig desk_scale();
ScenarioConfig full_scale();  // Table-I sized; the dictionary will not fit in memory
void validate(const ScenarioConfig& cfg);

struct PathParams {
  cd alpha{1.0, 0.0};
  double psi = 0.0;
  double eta = 0.0;
  double tau = 0.0;
};

double pilot_frequency(int p, const ScenarioConfig& cfg);
// frequency the spatial response is evaluated at on subcarrier p
double spatial_frequency(int p, const ScenarioConfig& cfg);

CVec phase_steering(double eta, double psi, double f, const ScenarioConfig& cfg);
// throws Error when some denominator is <= 0
RVec amplitude_steering(double eta, double psi, const ScenarioConfig& cfg);
bool amplitude_valid(double eta, double psi, const ScenarioConfig& cfg);
CVec delay_steering(double tau, const ScenarioConfig& cfg);
// c(eta, psi, f) = a o b, unit norm
CVec beam_steering(double eta, double psi, double f, const ScenarioConfig& cfg);

// h, length N*Np, index p*N + n
CVec synthesize_channel(const std::vector<PathParams>& paths, const ScenarioConfig& cfg);

std::vector<PathParams> sample_paths(std::mt19937_64& rng, const ScenarioConfig& cfg);

}  // namespace bdce
