#include "bdce/measurement.hpp"

#include <cmath>

namespace bdce {

HybridPrecoder build_precoder(std::mt19937_64& rng, const ScenarioConfig& cfg) {
  std::uniform_real_distribution<double> uth(0.0, 2 * kPi);
  const double s = 1.0 / std::sqrt(double(cfg.N));
  HybridPrecoder F;
  F.blocks.reserve(cfg.Np);
  for (int p = 0; p < cfg.Np; ++p) {
    CMat B(cfg.N, cfg.M());
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      for (Eigen::Index i = 0; i < B.rows(); ++i) {
        const double th = uth(rng);
        B(i, j) = cd(s * std::cos(th), s * std::sin(th));
      }
    F.blocks.push_back(std::move(B));
  }
  return F;
}

CVec apply_measurement(const CVec& h, const HybridPrecoder& F) {
  const int N = F.N(), M = F.M(), Np = F.Np();
  if (h.size() != Eigen::Index(N) * Np) throw Error("apply_measurement: dimension mismatch");
  CVec s(Eigen::Index(M) * Np);
  for (int p = 0; p < Np; ++p) {
    const CVec sp = F.blocks[p].adjoint() * h.segment(Eigen::Index(p) * N, N);
    for (int m = 0; m < M; ++m) s[Eigen::Index(m) * Np + p] = sp[m];
  }
  return s;
}

CMat measure_matrix(const CMat& U, const HybridPrecoder& F) {
  const int N = F.N(), M = F.M(), Np = F.Np();
  if (U.rows() != Eigen::Index(N) * Np) throw Error("measure_matrix: dimension mismatch");
  CMat G(Eigen::Index(M) * Np, U.cols());
  for (int p = 0; p < Np; ++p) {
    const CMat Gp = F.blocks[p].adjoint() * U.middleRows(Eigen::Index(p) * N, N);
    for (int m = 0; m < M; ++m) G.row(Eigen::Index(m) * Np + p) = Gp.row(m);
  }
  return G;
}

double calibrate_noise(const CVec& s, double snr_db) {
  const double e = s.squaredNorm();
  if (!(e > 0)) throw Error("calibrate_noise: zero signal");
  return e / double(s.size()) * std::pow(10.0, -snr_db / 10.0);
}

ReceivedSignal add_noise(const CVec& s, double sigma_z2, std::mt19937_64& rng) {
  if (sigma_z2 < 0) throw Error("negative noise variance");
  ReceivedSignal r;
  r.sigma_z2 = sigma_z2;
  r.y = s;
  if (sigma_z2 == 0) return r;
  std::normal_distribution<double> g(0.0, std::sqrt(sigma_z2 / 2));
  for (Eigen::Index i = 0; i < r.y.size(); ++i) {
    const double re = g(rng), im = g(rng);
    r.y[i] += cd(re, im);
  }
  return r;
}

}  // namespace bdce
