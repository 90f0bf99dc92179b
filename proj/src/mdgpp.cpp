#include "bdce/mdgpp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bdce/kernels.hpp"

namespace bdce {

bool Perturbations::inside() const {
  auto ok = [](const RVec& v, double h) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (!(v[i] >= -h && v[i] < h)) return false;
    return true;
  };
  return ok(d_psi, half_psi) && ok(d_eta, half_eta) && ok(d_tau, half_tau);
}

std::vector<int> prune(const CVec& beta, double E_th) {
  if (E_th < 0 || E_th > 1) throw Error("prune: E_th must be in [0,1]");
  const RVec mag = beta.cwiseAbs();
  const double peak = mag.size() ? mag.maxCoeff() : 0.0;
  if (!(peak > 0)) throw Error("prune: all-zero initial estimate, empty support");
  std::vector<int> S;
  for (Eigen::Index k = 0; k < mag.size(); ++k)
    if (mag[k] > 0 && mag[k] >= E_th * peak) S.push_back(int(k));
  return S;
}

CMat assemble_perturbed(const CMat& U, const CMat& U_psi, const CMat& U_eta, const CMat& U_tau,
                        const Perturbations& p) {
  CMat out = U;
  for (Eigen::Index k = 0; k < U.cols(); ++k)
    out.col(k) += U_psi.col(k) * p.d_psi[k] + U_eta.col(k) * p.d_eta[k] + U_tau.col(k) * p.d_tau[k];
  kern::add_flops(12ull * U.rows() * U.cols());
  return out;
}

QPProblem build_qp(const CMat& GD, const CMat& G_rest, const CVec& target, const CVec& beta,
                   const RVec& s2, double bound) {
  const Eigen::Index R = GD.rows(), K = GD.cols();
  if (G_rest.rows() != R || G_rest.cols() != K || target.size() != R || beta.size() != K ||
      s2.size() != K)
    throw Error("build_qp: dimension mismatch");
  // A = GD^H GD, one column at a time through the kernel table
  CMat A(K, K);
  for (Eigen::Index j = 0; j < K; ++j)
    kern::active().cmv_h(GD.data(), R, K, GD.col(j).data(), A.col(j).data());
  kern::add_flops(8ull * R * K * K);

  QPProblem qp;
  qp.bound = bound;
  qp.P.resize(K, K);
  for (Eigen::Index j = 0; j < K; ++j)
    for (Eigen::Index i = 0; i < K; ++i)
      qp.P(i, j) = (std::conj(A(i, j)) * beta[i] * std::conj(beta[j])).real() +
                   (i == j ? A(i, i).real() * s2[i] : 0.0);
  qp.P = 0.5 * (qp.P + qp.P.transpose()).eval();

  CVec Gb, c;
  kern::gemv(G_rest, beta, Gb);
  const CVec r = target - Gb;
  kern::gemv_h(GD, r, c);
  qp.u.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const cd dk = GD.col(k).dot(G_rest.col(k));  // conj(GD_k)^T G_rest_k
    qp.u[k] = (std::conj(beta[k]) * c[k]).real() - (dk * s2[k]).real();
  }
  kern::add_flops(8ull * R * K + 10ull * K * K);
  return qp;
}

double qp_objective(const QPProblem& qp, const RVec& x) { return x.dot(qp.P * x) - 2 * qp.u.dot(x); }

RVec solve_qp_box(const QPProblem& qp, int n_sweeps, std::vector<double>* obj) {
  const Eigen::Index K = qp.u.size();
  RVec x = RVec::Zero(K);
  const double tr = qp.P.trace();
  if (K == 0 || !(tr > 0)) return x;
  const double eps = 1e-10 * tr / double(K);
  RMat Pr = qp.P;
  Pr.diagonal().array() += eps;
  const double lo = -qp.bound, hi = std::nextafter(qp.bound, 0.0);

  x = Pr.ldlt().solve(qp.u);
  kern::add_flops(std::uint64_t(2 * K * K * K / 3 + 4 * K * K));
  bool interior = x.allFinite();
  for (Eigen::Index k = 0; interior && k < K; ++k) interior = std::abs(x[k]) < qp.bound;
  if (interior) return x;

  // start from the clamped unconstrained point, then cyclic coordinate passes
  for (Eigen::Index k = 0; k < K; ++k) x[k] = std::isfinite(x[k]) ? std::clamp(x[k], lo, hi) : 0.0;
  QPProblem reg{Pr, qp.u, qp.bound};
  if (obj) obj->push_back(qp_objective(reg, x));
  for (int s = 0; s < n_sweeps; ++s) {
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!(Pr(k, k) > 0)) continue;
      const double off = Pr.col(k).dot(x) - Pr(k, k) * x[k];
      x[k] = std::clamp((qp.u[k] - off) / Pr(k, k), lo, hi);
      if (obj) obj->push_back(qp_objective(reg, x));
    }
    kern::add_flops(std::uint64_t(2 * K * K));
  }
  return x;
}

namespace {

CMat columns(const CMat& A, const std::vector<int>& S) {
  CMat out(A.rows(), Eigen::Index(S.size()));
  for (std::size_t i = 0; i < S.size(); ++i) out.col(Eigen::Index(i)) = A.col(S[i]);
  return out;
}

// Gr + sum over families of G_f diag(d_f), skipping `skip`
CMat combine(const CMat& Gr, const std::array<const CMat*, 3>& Gd, const std::array<const RVec*, 3>& d,
             int skip) {
  CMat out = Gr;
  for (int f = 0; f < 3; ++f) {
    if (f == skip) continue;
    for (Eigen::Index k = 0; k < Gr.cols(); ++k) out.col(k) += Gd[f]->col(k) * (*d[f])[k];
    kern::add_flops(4ull * Gr.rows() * Gr.cols());
  }
  return out;
}

}  // namespace

MdgppReport refine_on_support(const MdgppProblem& pb, const std::vector<int>& S,
                              const HmpSolver* stage1, const MdgppOptions& opts) {
  if (S.empty()) throw Error("refine: empty support");
  const Eigen::Index Kr = Eigen::Index(S.size());
  const Dictionary& D = pb.dict;

  const CMat Ur = columns(D.U, S), Upr = columns(D.U_psi, S), Uer = columns(D.U_eta, S);
  CMat Utr = columns(D.U_tau, S);
  if (opts.carrier_compensated_delay) {
    // d/dtau of exp(-j2pi(f_p - fc)tau): the carrier part is a common phase
    // already carried by beta, and it swamps the Taylor step otherwise
    Utr += cd(0.0, 2 * kPi * pb.cfg.fc) * Ur;
  }
  const CMat Gr = measure_matrix(Ur, pb.F);
  const std::array<CMat, 3> Gd{measure_matrix(Upr, pb.F), measure_matrix(Uer, pb.F),
                               measure_matrix(Utr, pb.F)};
  const std::array<const CMat*, 3> Gdp{&Gd[0], &Gd[1], &Gd[2]};

  MdgppReport rep;
  rep.support = S;
  Perturbations& pt = rep.pert;
  pt.d_psi = RVec::Zero(Kr);
  pt.d_eta = RVec::Zero(Kr);
  pt.d_tau = RVec::Zero(Kr);
  pt.half_psi = pb.grid.psi_delta / 2;
  pt.half_eta = pb.grid.eta_delta / 2;
  pt.half_tau = pb.grid.tau_delta / 2;
  std::array<RVec*, 3> dv{&pt.d_psi, &pt.d_eta, &pt.d_tau};
  const std::array<double, 3> half{pt.half_psi, pt.half_eta, pt.half_tau};
  auto dconst = [&]() { return std::array<const RVec*, 3>{dv[0], dv[1], dv[2]}; };

  HmpSolver s(Gr, pb.y, pb.sigma_z2, opts.hmp);
  if (stage1) {
    const MessageState& a = stage1->state();
    MessageState& b = s.state();
    b.xi_s_bs = a.xi_s_bs;
    for (Eigen::Index i = 0; i < Kr; ++i) {
      const int k = S[i];
      b.beta_hat[i] = a.beta_hat[k];
      b.sigma_beta2[i] = a.sigma_beta2[k];
      b.v_b_bsb[i] = a.v_b_bsb[k];
      b.nonzero_prob[i] = a.nonzero_prob[k];
      b.slab_mean[i] = a.slab_mean[k];
      b.slab_var[i] = a.slab_var[k];
      s.prior().chi[i] = stage1->prior().chi[k];
    }
    s.prior().lambda = stage1->prior().lambda;
  }
  s.set_rho(opts.stage2_rho);

  const double ey = pb.y.squaredNorm();
  const std::uint64_t f0 = kern::flops();
  try {
    for (int t = 0; t < opts.T_ref; ++t) {
      s.set_matrix(combine(Gr, Gdp, dconst(), -1));
      s.recompute_bfe();
      s.step();
      const MessageState& st = s.state();
      const CVec& target = (opts.target_y || st.s_hat.size() == 0) ? pb.y : st.s_hat;
      for (Family fam : opts.order) {
        const int f = int(fam);
        const CMat rest = combine(Gr, Gdp, dconst(), f);
        const QPProblem qp = build_qp(Gd[f], rest, target, st.beta_hat, st.sigma_beta2, half[f]);
        *dv[f] = solve_qp_box(qp, opts.n_sweeps);
      }
      const CMat Gt = combine(Gr, Gdp, dconst(), -1);
      CVec Gb;
      kern::gemv(Gt, st.beta_hat, Gb);
      if (!st.beta_hat.allFinite()) throw Error("refine: non-finite estimate");
      rep.trace.push_back({t + 1, ey > 0 ? (pb.y - Gb).squaredNorm() / ey : 0.0,
                           pt.d_psi.cwiseAbs().maxCoeff(), pt.d_eta.cwiseAbs().maxCoeff(),
                           pt.d_tau.cwiseAbs().maxCoeff()});
    }
  } catch (const Error&) {
    rep.stage2_failed = true;
  }
  rep.refine_flops = kern::flops() - f0;

  const CVec& bref = s.state().beta_hat;
  rep.beta_hat = CVec::Zero(D.U.cols());
  for (Eigen::Index i = 0; i < Kr; ++i) rep.beta_hat[S[i]] = bref[i];
  const CMat Uf = assemble_perturbed(Ur, Upr, Uer, Utr, pt);
  kern::gemv(Uf, bref, rep.h_hat);
  if (!rep.h_hat.allFinite()) rep.stage2_failed = true;
  return rep;
}

MdgppReport two_stage_estimate(const MdgppProblem& pb, const CMat& G, const MdgppOptions& opts) {
  HmpSolver s1(G, pb.y, pb.sigma_z2, opts.hmp);
  s1.run(opts.T_ini, opts.hmp.tol);
  EstimateReport r1;
  r1.beta_hat = s1.state().beta_hat;
  kern::gemv(pb.dict.U, r1.beta_hat, r1.h_hat);
  r1.prior = s1.prior();
  r1.trace = s1.trace();
  r1.iterations_used = s1.iterations();
  r1.converged = s1.converged();

  const std::vector<int> S = prune(r1.beta_hat, opts.E_th);
  MdgppReport rep = refine_on_support(pb, S, &s1, opts);
  rep.stage1 = std::move(r1);
  if (rep.stage2_failed) {
    rep.beta_hat = rep.stage1.beta_hat;
    rep.h_hat = rep.stage1.h_hat;
  }
  return rep;
}

void write_mdgpp_trace_csv(const std::vector<MdgppTraceRow>& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f.precision(10);
  f << "iteration,nmse_proxy,max_abs_dpsi,max_abs_deta,max_abs_dtau\n";
  for (const auto& t : trace)
    f << t.iteration << ',' << t.nmse_proxy << ',' << t.max_dpsi << ',' << t.max_deta << ',' << t.max_dtau
      << '\n';
}

}  // namespace bdce
