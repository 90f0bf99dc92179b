#include "bdce/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "bdce/kernels.hpp"

namespace bdce {

namespace {

CMat gather(const CMat& G, const std::vector<int>& S) {
  CMat A(G.rows(), Eigen::Index(S.size()));
  for (std::size_t i = 0; i < S.size(); ++i) A.col(Eigen::Index(i)) = G.col(S[i]);
  return A;
}

}  // namespace

CVec ls_gains(const CVec& y, const CMat& G, const std::vector<int>& S) {
  if (S.empty()) return CVec();
  const CMat A = gather(G, S);
  Eigen::ColPivHouseholderQR<CMat> qr(A);
  if (qr.rank() < A.cols()) throw Error("ls: rank-deficient support");
  return qr.solve(y);
}

SompResult somp_estimate(const CVec& y, const CMat& G, int max_atoms, double residual_tol) {
  SompResult out;
  const Eigen::Index K = G.cols();
  const RVec gn = G.colwise().norm().transpose();
  std::vector<bool> banned(K, false);
  CVec r = y;
  out.residual_norms.push_back(r.norm());
  CVec corr;
  while (int(out.support.size()) < max_atoms && r.norm() > residual_tol) {
    kern::gemv_h(G, r, corr);
    Eigen::Index best = -1;
    double bv = -1;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (banned[k] || !(gn[k] > 0)) continue;
      const double v = std::abs(corr[k]) / gn[k];
      if (v > bv) {
        bv = v;
        best = k;
      }
    }
    if (best < 0) break;
    banned[best] = true;
    std::vector<int> trial = out.support;
    trial.push_back(int(best));
    CVec b;
    try {
      b = ls_gains(y, G, trial);
    } catch (const Error&) {
      continue;  // dependent atom: drop it and pick the next one
    }
    const CVec rn = y - gather(G, trial) * b;
    out.support = std::move(trial);
    out.beta_ls = std::move(b);
    r = rn;
    out.residual_norms.push_back(r.norm());
  }
  return out;
}

SompResult somp_estimate(const CVec& y, const CMat& G, const CMat& U, int max_atoms, double residual_tol) {
  SompResult out = somp_estimate(y, G, max_atoms, residual_tol);
  out.h_hat = CVec::Zero(U.rows());
  for (std::size_t i = 0; i < out.support.size(); ++i) out.h_hat += U.col(out.support[i]) * out.beta_ls[i];
  return out;
}

CVec ls_oracle(const CVec& y, const CMat& G, const CMat& U, const std::vector<int>& S) {
  CVec h = CVec::Zero(U.rows());
  if (S.empty()) return h;
  const CVec b = ls_gains(y, G, S);
  for (std::size_t i = 0; i < S.size(); ++i) h += U.col(S[i]) * b[i];
  return h;
}

}  // namespace bdce
