#include "bdce/channel_model.hpp"

#include <cmath>
#include <string>

namespace bdce {

void ScenarioConfig::sync_derived(bool reset_tau_max) {
  d_spacing = kLight / (2.0 * fc);
  if (reset_tau_max) tau_max = 0.25 / df_pilot;
}

ScenarioConfig desk_scale() {
  ScenarioConfig c;
  c.sync_derived();
  return c;
}

ScenarioConfig full_scale() {
  ScenarioConfig c;
  c.N = 256;
  c.Np = 64;
  c.Nrf = 8;
  c.Nps = 4;
  c.sync_derived();
  return c;
}

void validate(const ScenarioConfig& c) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid scenario: ") + what);
  };
  need(c.N >= 1, "N >= 1");
  need(c.Np >= 1, "Np >= 1");
  need(c.Nrf >= 1 && c.Nps >= 1, "Nrf, Nps >= 1");
  need(c.fc > 0, "fc > 0");
  need(c.df_pilot > 0, "df_pilot > 0");
  need(c.r_min > 0, "r_min > 0");
  need(c.L >= 0, "L >= 0");
  need(c.n_o >= 0 && c.n_o < c.N, "0 <= n_o < N");
  need(c.tau_max >= 0, "tau_max >= 0");
  need(std::abs(c.d_spacing - kLight / (2 * c.fc)) <= 1e-15 * c.d_spacing, "d_spacing = c/(2 fc)");
}

double pilot_frequency(int p, const ScenarioConfig& cfg) {
  if (p < 0 || p >= cfg.Np) throw Error("pilot index out of range");
  return cfg.fc + (p - cfg.Np / 2.0) * cfg.df_pilot;
}

double spatial_frequency(int p, const ScenarioConfig& cfg) {
  return cfg.beam_squint ? pilot_frequency(p, cfg) : cfg.fc;
}

CVec phase_steering(double eta, double psi, double f, const ScenarioConfig& cfg) {
  CVec a(cfg.N);
  const double k = 2 * kPi * f / kLight;
  for (int n = 0; n < cfg.N; ++n) {
    const double x = (n - cfg.n_o) * cfg.d_spacing;
    const double ph = -k * (x * psi + x * x * eta);
    a[n] = cd(std::cos(ph), std::sin(ph));
  }
  return a;
}

namespace {
// eta * (r + dn d psi + dn^2 d^2 eta) with r = (1 - psi^2)/eta; finite at eta = 0
double scaled_den(int n, double eta, double psi, const ScenarioConfig& cfg) {
  const double x = (n - cfg.n_o) * cfg.d_spacing;
  return (1 - psi * psi) + x * psi * eta + x * x * eta * eta;
}
}  // namespace

bool amplitude_valid(double eta, double psi, const ScenarioConfig& cfg) {
  if (eta == 0.0) return true;
  for (int n = 0; n < cfg.N; ++n)
    if (!(scaled_den(n, eta, psi, cfg) > 0)) return false;
  return true;
}

RVec amplitude_steering(double eta, double psi, const ScenarioConfig& cfg) {
  RVec b(cfg.N);
  if (eta == 0.0) {
    b.setConstant(1.0 / std::sqrt(double(cfg.N)));
    return b;
  }
  for (int n = 0; n < cfg.N; ++n) {
    const double den = scaled_den(n, eta, psi, cfg);
    if (!(den > 0)) throw Error("amplitude model invalid: non-positive distance term");
    b[n] = 1.0 / den;
  }
  b /= b.norm();
  return b;
}

CVec delay_steering(double tau, const ScenarioConfig& cfg) {
  CVec d(cfg.Np);
  for (int p = 0; p < cfg.Np; ++p) {
    const double ph = -2 * kPi * pilot_frequency(p, cfg) * tau;
    d[p] = cd(std::cos(ph), std::sin(ph));
  }
  return d;
}

CVec beam_steering(double eta, double psi, double f, const ScenarioConfig& cfg) {
  CVec a = phase_steering(eta, psi, f, cfg);
  RVec b = amplitude_steering(eta, psi, cfg);
  return a.cwiseProduct(b.cast<cd>());
}

CVec synthesize_channel(const std::vector<PathParams>& paths, const ScenarioConfig& cfg) {
  CVec h = CVec::Zero(std::size_t(cfg.N) * cfg.Np);
  for (const auto& pp : paths) {
    const RVec b = amplitude_steering(pp.eta, pp.psi, cfg);
    const CVec d = delay_steering(pp.tau, cfg);
    for (int p = 0; p < cfg.Np; ++p) {
      const CVec a = phase_steering(pp.eta, pp.psi, spatial_frequency(p, cfg), cfg);
      const cd g = pp.alpha * d[p];
      for (int n = 0; n < cfg.N; ++n) h[std::size_t(p) * cfg.N + n] += g * a[n] * b[n];
    }
  }
  return h;
}

std::vector<PathParams> sample_paths(std::mt19937_64& rng, const ScenarioConfig& cfg) {
  if (cfg.L < 1) throw Error("sample_paths needs L >= 1");
  std::uniform_real_distribution<double> upsi(-1.0, 1.0), ueta(0.0, cfg.eta_sample_max()),
      utau(0.0, cfg.tau_max);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  const double aperture = cfg.N * cfg.d_spacing;
  std::vector<PathParams> out;
  while (int(out.size()) < cfg.L) {
    PathParams pp;
    pp.psi = upsi(rng);
    pp.eta = ueta(rng);
    pp.tau = utau(rng);
    // redraw geometries outside the model's validity (r <= aperture or negative distance)
    if (pp.eta > 0) {
      const double r = (1 - pp.psi * pp.psi) / pp.eta;
      if (r <= aperture || !amplitude_valid(pp.eta, pp.psi, cfg)) continue;
    }
    out.push_back(pp);
  }
  double pw = 0;
  for (auto& pp : out) {
    const double re = gauss(rng), im = gauss(rng);
    pp.alpha = cd(re, im);
    pw += std::norm(pp.alpha);
  }
  for (auto& pp : out) pp.alpha /= std::sqrt(pw);
  return out;
}

}  // namespace bdce
