#include "bdce/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bdce {

SamplingGrid::Tuple SamplingGrid::index_map(int k) const {
  if (k < 0 || k >= K) throw Error("grid index out of range");
  const int plane = K_an * K_sl;
  return {(k % plane) / K_sl, k % K_sl, k / plane};
}

int SamplingGrid::flatten(int k_an, int k_sl, int k_de) const {
  if (k_an < 0 || k_an >= K_an || k_sl < 0 || k_sl >= K_sl || k_de < 0 || k_de >= K_de)
    throw Error("grid tuple out of range");
  return k_de * K_an * K_sl + k_an * K_sl + k_sl;
}

double slope_coherence(double eta, const ScenarioConfig& cfg) {
  const CVec a = phase_steering(0.0, 0.0, cfg.fc, cfg);
  const CVec b = phase_steering(eta, 0.0, cfg.fc, cfg);
  const RVec wa = amplitude_steering(0.0, 0.0, cfg), wb = amplitude_steering(eta, 0.0, cfg);
  cd s = 0;
  for (int n = 0; n < cfg.N; ++n) s += std::conj(a[n] * wa[n]) * b[n] * wb[n];
  return std::abs(s);
}

namespace {

int ceil_count(double span, double step) {
  // ratios like 4.0000000001 from rounding must not add a sample
  return std::max(1, int(std::ceil(span / step * (1 - 1e-12))));
}

}  // namespace

SamplingGrid build_grid(const ScenarioConfig& cfg, double thr) {
  validate(cfg);
  if (!(thr > 0 && thr < 1)) throw Error("coherence threshold must be in (0,1)");
  SamplingGrid g;
  g.psi_delta = 2.0 / cfg.N;
  g.K_an = cfg.N;
  g.tau_delta = 1.0 / (cfg.Np * cfg.df_pilot);
  g.K_de = ceil_count(cfg.tau_max, g.tau_delta);

  const double emax = cfg.eta_max();
  // first slope where coherence with the far-field beam drops to thr
  const int scan = 2000;
  double lo = 0, hi = -1;
  for (int i = 1; i <= scan; ++i) {
    const double e = emax * i / scan;
    if (slope_coherence(e, cfg) <= thr) {
      hi = e;
      break;
    }
    lo = e;
  }
  if (hi < 0) {
    g.eta_fallback = true;
    g.eta_delta = emax;
    g.K_sl = 1;
    g.eta_grid = {emax / 2};
    g.report = "slope coherence threshold unreachable for this array; using one slope sample";
  } else {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope_coherence(mid, cfg) <= thr ? hi : lo) = mid;
    }
    g.eta_delta = hi;
    g.K_sl = ceil_count(emax, hi);
    for (int k = 0; k < g.K_sl; ++k) g.eta_grid.push_back((k + 0.5) * g.eta_delta);
  }
  for (int k = 0; k < g.K_an; ++k) g.psi_grid.push_back(-1.0 + (k + 0.5) * g.psi_delta);
  for (int k = 0; k < g.K_de; ++k) g.tau_grid.push_back((k + 0.5) * g.tau_delta);
  g.K = g.K_an * g.K_sl * g.K_de;
  return g;
}

namespace {

// amplitude and its partials; uniform with zero partials when invalid
struct Amp {
  RVec b, db_psi, db_eta;
  bool fallback = false;
};

Amp amplitude_with_partials(double eta, double psi, const ScenarioConfig& cfg) {
  Amp r;
  const int N = cfg.N;
  r.db_psi = RVec::Zero(N);
  r.db_eta = RVec::Zero(N);
  if (!amplitude_valid(eta, psi, cfg)) {
    r.fallback = true;
    r.b = RVec::Constant(N, 1.0 / std::sqrt(double(N)));
    return r;
  }
  RVec w(N), dwp(N), dwe(N);
  for (int n = 0; n < N; ++n) {
    const double x = (n - cfg.n_o) * cfg.d_spacing;
    const double D = (1 - psi * psi) + x * psi * eta + x * x * eta * eta;
    w[n] = 1.0 / D;
    dwp[n] = -(-2 * psi + x * eta) / (D * D);
    dwe[n] = -(x * psi + 2 * x * x * eta) / (D * D);
  }
  const double nw = w.norm();
  r.b = w / nw;
  r.db_psi = (dwp - r.b * r.b.dot(dwp)) / nw;
  r.db_eta = (dwe - r.b * r.b.dot(dwe)) / nw;
  return r;
}

}  // namespace

CVec dictionary_column(double psi, double eta, double tau, const ScenarioConfig& cfg,
                       bool* fell_back) {
  const Amp A = amplitude_with_partials(eta, psi, cfg);
  if (fell_back) *fell_back = A.fallback;
  const CVec d = delay_steering(tau, cfg);
  CVec u(std::size_t(cfg.N) * cfg.Np);
  for (int p = 0; p < cfg.Np; ++p) {
    const CVec a = phase_steering(eta, psi, spatial_frequency(p, cfg), cfg);
    for (int n = 0; n < cfg.N; ++n) u[std::size_t(p) * cfg.N + n] = d[p] * a[n] * A.b[n];
  }
  return u;
}

std::array<CVec, 3> dictionary_column_derivs(double psi, double eta, double tau,
                                             const ScenarioConfig& cfg) {
  const Amp A = amplitude_with_partials(eta, psi, cfg);
  const CVec d = delay_steering(tau, cfg);
  const std::size_t len = std::size_t(cfg.N) * cfg.Np;
  std::array<CVec, 3> out{CVec(len), CVec(len), CVec(len)};
  const cd j(0.0, 1.0);
  for (int p = 0; p < cfg.Np; ++p) {
    const double f = spatial_frequency(p, cfg);
    const double k = 2 * kPi * f / kLight;
    const CVec a = phase_steering(eta, psi, f, cfg);
    const cd dtau = -j * 2.0 * kPi * pilot_frequency(p, cfg);
    for (int n = 0; n < cfg.N; ++n) {
      const double x = (n - cfg.n_o) * cfg.d_spacing;
      const cd da = d[p] * a[n];
      const std::size_t i = std::size_t(p) * cfg.N + n;
      out[0][i] = da * (-j * k * x * A.b[n] + A.db_psi[n]);
      out[1][i] = da * (-j * k * x * x * A.b[n] + A.db_eta[n]);
      out[2][i] = dtau * da * A.b[n];
    }
  }
  return out;
}

Dictionary build_dictionary(const SamplingGrid& grid, const ScenarioConfig& cfg, double max_bytes) {
  const double rows = double(cfg.N) * cfg.Np;
  const double bytes = 4.0 * rows * grid.K * sizeof(cd);
  if (bytes > max_bytes) {
    std::ostringstream os;
    os << "dictionary too large: " << rows << " x " << grid.K << " complex, 4 matrices = "
       << bytes / 1e9 << " GB (limit " << max_bytes / 1e9 << " GB)";
    throw Error(os.str());
  }
  Dictionary D;
  const Eigen::Index R = Eigen::Index(rows);
  D.U.resize(R, grid.K);
  D.U_psi.resize(R, grid.K);
  D.U_eta.resize(R, grid.K);
  D.U_tau.resize(R, grid.K);
  D.fallback.assign(grid.K, false);
  for (int k = 0; k < grid.K; ++k) {
    const auto t = grid.index_map(k);
    const double psi = grid.psi_grid[t.k_an], eta = grid.eta_grid[t.k_sl], tau = grid.tau_grid[t.k_de];
    bool fb = false;
    D.U.col(k) = dictionary_column(psi, eta, tau, cfg, &fb);
    auto dv = dictionary_column_derivs(psi, eta, tau, cfg);
    D.U_psi.col(k) = dv[0];
    D.U_eta.col(k) = dv[1];
    D.U_tau.col(k) = dv[2];
    D.fallback[k] = fb;
    D.amplitude_fallbacks += fb;
  }
  return D;
}

std::string dictionary_cache_key(const ScenarioConfig& c, double thr) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "v1|%.17g|%.17g|%d|%d|%.17g|%.17g|%d|%.17g|%.17g|%d", c.fc,
                c.df_pilot, c.N, c.Np, c.r_min, c.d_spacing, c.n_o, c.tau_max, thr,
                int(c.beam_squint));
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (const char* p = buf; *p; ++p) {
    h ^= std::uint8_t(*p);
    h *= 1099511628211ull;
  }
  char out[32];
  std::snprintf(out, sizeof out, "%016llx", (unsigned long long)h);
  return out;
}

namespace {
const char kMagic[8] = {'B', 'D', 'C', 'E', 'D', 'C', 'T', '1'};
}

void save_dictionary(const std::string& path, const std::string& key, const Dictionary& d) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write dictionary cache " + path);
  f.write(kMagic, 8);
  const std::uint64_t klen = key.size();
  f.write(reinterpret_cast<const char*>(&klen), 8);
  f.write(key.data(), klen);
  const std::int64_t dims[3] = {d.U.rows(), d.U.cols(), d.amplitude_fallbacks};
  f.write(reinterpret_cast<const char*>(dims), sizeof dims);
  for (const CMat* m : {&d.U, &d.U_psi, &d.U_eta, &d.U_tau})
    f.write(reinterpret_cast<const char*>(m->data()), std::streamsize(m->size() * sizeof(cd)));
  for (bool b : d.fallback) f.put(char(b));
}

bool load_dictionary(const std::string& path, const std::string& key, Dictionary& d) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) return false;
  std::uint64_t klen = 0;
  f.read(reinterpret_cast<char*>(&klen), 8);
  if (klen > 256) return false;
  std::string k(klen, '\0');
  f.read(k.data(), klen);
  if (k != key) return false;
  std::int64_t dims[3];
  if (!f.read(reinterpret_cast<char*>(dims), sizeof dims)) return false;
  for (CMat* m : {&d.U, &d.U_psi, &d.U_eta, &d.U_tau}) {
    m->resize(dims[0], dims[1]);
    f.read(reinterpret_cast<char*>(m->data()), std::streamsize(m->size() * sizeof(cd)));
  }
  d.amplitude_fallbacks = int(dims[2]);
  d.fallback.assign(dims[1], false);
  for (std::int64_t i = 0; i < dims[1]; ++i) d.fallback[i] = f.get() != 0;
  return bool(f);
}

Dictionary cached_dictionary(const std::string& dir, const SamplingGrid& grid,
                             const ScenarioConfig& cfg, double thr) {
  if (dir.empty()) return build_dictionary(grid, cfg);
  const std::string key = dictionary_cache_key(cfg, thr);
  const std::string path = (std::filesystem::path(dir) / ("dict_" + key + ".bin")).string();
  Dictionary d;
  if (load_dictionary(path, key, d) && d.U.cols() == grid.K) return d;
  d = build_dictionary(grid, cfg);
  std::filesystem::create_directories(dir);
  save_dictionary(path, key, d);
  return d;
}

std::vector<PathParams> on_grid_paths(std::mt19937_64& rng, const SamplingGrid& grid,
                                      const Dictionary& dict, int L, std::vector<int>* indices) {
  std::uniform_int_distribution<int> pick(0, grid.K - 1);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  std::vector<int> idx;
  while (int(idx.size()) < L) {
    const int k = pick(rng);
    if (dict.fallback[k] || std::find(idx.begin(), idx.end(), k) != idx.end()) continue;
    idx.push_back(k);
  }
  std::vector<PathParams> out;
  double pw = 0;
  for (int k : idx) {
    PathParams pp;
    pp.psi = grid.psi_of(k);
    pp.eta = grid.eta_of(k);
    pp.tau = grid.tau_of(k);
    const double re = gauss(rng), im = gauss(rng);
    pp.alpha = cd(re, im);
    pw += std::norm(pp.alpha);
    out.push_back(pp);
  }
  for (auto& pp : out) pp.alpha /= std::sqrt(pw);
  if (indices) *indices = idx;
  return out;
}

int nearest_index(const PathParams& p, const SamplingGrid& g) {
  auto cell = [](double v, double lo, double step, int count) {
    return std::clamp(int(std::floor((v - lo) / step)), 0, count - 1);
  };
  return g.flatten(cell(p.psi, -1.0, g.psi_delta, g.K_an), cell(p.eta, 0.0, g.eta_delta, g.K_sl),
                   cell(p.tau, 0.0, g.tau_delta, g.K_de));
}

}  // namespace bdce
