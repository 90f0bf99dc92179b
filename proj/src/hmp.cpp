#include "bdce/hmp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "bdce/kernels.hpp"

namespace bdce {

BgMoments bg_denoiser(cd mu, double v, double lambda, double chi) {
  if (!(v > 0)) throw Error("bg_denoiser: pseudo-variance must be positive");
  chi = std::max(chi, 0.0);
  const double m2 = std::norm(mu);
  BgMoments r;
  // odds of zero vs nonzero, log domain
  r.log_lr = std::log1p(-lambda) - std::log(lambda) + (-m2 / v - std::log(v)) -
             (-m2 / (chi + v) - std::log(chi + v));
  r.pi = 1.0 / (1.0 + std::exp(std::clamp(r.log_lr, -700.0, 700.0)));
  const double g = chi / (chi + v);
  r.slab_mean = g * mu;
  r.slab_var = g * v;
  r.mean = r.pi * r.slab_mean;
  r.var = std::max(r.pi * r.slab_var + r.pi * (1 - r.pi) * std::norm(r.slab_mean), 0.0);
  return r;
}

HmpSolver::HmpSolver(CMat G, CVec y, double sigma_z2, const HmpOptions& opts)
    : G_(std::move(G)), y_(std::move(y)), opt_(opts) {
  if (G_.rows() != y_.size()) throw Error("hmp: G rows must match y length");
  MN_ = double(G_.rows());
  G2_ = kern::abs2(G_);
  const double ey = y_.squaredNorm();
  sz2_ = std::max({sigma_z2, opts.noise_floor_rel * ey / MN_, kVarFloor});
  const Eigen::Index K = G_.cols();

  prior_.lambda = opts.lambda_init;
  prior_.chi.resize(K);
  const RVec gn = G2_.colwise().sum().transpose();
  for (Eigen::Index k = 0; k < K; ++k)
    prior_.chi[k] = std::max((ey - MN_ * sz2_) / (prior_.lambda * double(K) * gn[k]), 1e-12);

  const Eigen::Index R = G_.rows();
  st_.xi_s_bs = CVec::Zero(R);
  st_.beta_hat = CVec::Zero(K);
  st_.sigma_beta2 = prior_.lambda * prior_.chi;
  st_.v_b_bsb = prior_.chi;
  st_.nonzero_prob = RVec::Constant(K, prior_.lambda);
  st_.slab_mean = CVec::Zero(K);
  st_.slab_var = prior_.chi;
  rho_ = opts.rho0;
  J_ = std::numeric_limits<double>::infinity();
}

void HmpSolver::reset_prior(const BGPrior& p) {
  if (p.chi.size() != G_.cols()) throw Error("hmp: prior size mismatch");
  prior_ = p;
  const Eigen::Index K = G_.cols();
  st_.xi_s_bs.setZero();
  st_.beta_hat = CVec::Zero(K);
  st_.sigma_beta2 = (p.lambda * p.chi).cwiseMax(kVarFloor);
  st_.v_b_bsb = p.chi.cwiseMax(kVarFloor);
  st_.nonzero_prob = RVec::Constant(K, p.lambda);
  st_.slab_mean = CVec::Zero(K);
  st_.slab_var = p.chi.cwiseMax(kVarFloor);
  rho_ = opt_.rho0;
  J_ = std::numeric_limits<double>::infinity();
}

void HmpSolver::set_matrix(CMat G) {
  if (G.rows() != G_.rows() || G.cols() != G_.cols()) throw Error("hmp: set_matrix size change");
  G_ = std::move(G);
  G2_ = kern::abs2(G_);
}

MessageState HmpSolver::iterate(const MessageState& st, const BGPrior& prior) const {
  const Eigen::Index R = G_.rows(), K = G_.cols();
  MessageState o;
  RVec ps;
  kern::gemv(G2_, st.v_b_bsb, ps);                       // line 3
  ps = ps.cwiseMax(kVarFloor);
  CVec Gb;
  kern::gemv(G_, st.beta_hat, Gb);
  o.v_s_bs = ps;
  o.mu_s_bs = st.xi_s_bs.cwiseProduct(ps.cast<cd>()) + Gb;  // line 4

  o.sigma_s2.resize(R);
  o.s_hat.resize(R);
  o.v_s_bsb.resize(R);
  o.mu_s_bsb.resize(R);
  o.xi_s_bs.resize(R);
  o.pi_s_bs.resize(R);
  for (Eigen::Index i = 0; i < R; ++i) {
    const double p = ps[i];
    const double ss2 = 1.0 / (1.0 / p + 1.0 / sz2_);             // lines 5-6
    const cd sh = ss2 * (o.mu_s_bs[i] / p + y_[i] / sz2_);
    const double psb = 1.0 / std::max(1.0 / ss2 - 1.0 / p, kVarFloor);  // line 7
    // line 8: extrinsic mean of the b_s belief w.r.t. the incoming message
    const cd musb = (sh / ss2 - o.mu_s_bs[i] / p) * psb;
    o.sigma_s2[i] = ss2;
    o.s_hat[i] = sh;
    o.v_s_bsb[i] = psb;
    o.mu_s_bsb[i] = musb;
    o.xi_s_bs[i] = -(musb - o.mu_s_bs[i]) / (p + psb);          // lines 9-10
    o.pi_s_bs[i] = -(1.0 / p) * (1.0 - ss2 / p);                // line 11
  }
  kern::gemv_t(G2_, o.pi_s_bs, o.pi_b_bb);                       // line 12
  CVec back;
  kern::gemv_h(G_, o.xi_s_bs, back);

  o.v_b_bb.resize(K);
  o.mu_b.resize(K);
  o.beta_hat.resize(K);
  o.sigma_beta2.resize(K);
  o.nonzero_prob.resize(K);
  o.slab_mean.resize(K);
  o.slab_var.resize(K);
  o.v_b_bsb.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double vr = std::max(-(1.0 / o.pi_b_bb[k] + st.v_b_bsb[k] / MN_), kVarFloor);  // line 13
    const cd mub = -vr * back[k] + st.beta_hat[k];                                        // line 14
    const BgMoments m = bg_denoiser(mub, vr, prior.lambda, prior.chi[k]);                // 15-16
    o.v_b_bb[k] = vr;
    o.mu_b[k] = mub;
    o.beta_hat[k] = m.mean;
    o.sigma_beta2[k] = std::max(m.var, kVarFloor);
    o.nonzero_prob[k] = m.pi;
    o.slab_mean[k] = m.slab_mean;
    o.slab_var[k] = std::max(m.slab_var, kVarFloor);
    o.v_b_bsb[k] = 1.0 / std::max(1.0 / o.sigma_beta2[k] - 1.0 / (MN_ * vr), kVarFloor);  // line 17
  }
  return o;
}

BGPrior HmpSolver::update_hyperparams(const MessageState& p, const BGPrior& prior) const {
  BGPrior out = prior;
  out.chi = p.beta_hat.cwiseAbs2() + p.sigma_beta2;
  out.lambda = std::clamp(p.nonzero_prob.mean(), opt_.lambda_min, 1 - opt_.lambda_min);
  return out;
}

namespace {

double bg_kl(const MessageState& st, const BGPrior& prior) {
  const double lam = prior.lambda;
  double kl = 0;
  for (Eigen::Index k = 0; k < st.beta_hat.size(); ++k) {
    const double pi = std::clamp(st.nonzero_prob[k], 1e-300, 1.0);
    const double chi = std::max(prior.chi[k], kVarFloor);
    const double vs = st.slab_var[k];
    if (pi < 1) kl += (1 - pi) * std::log((1 - pi) / (1 - lam));
    kl += pi * std::log(pi / lam);
    kl += pi * (std::log(chi / vs) + (vs + std::norm(st.slab_mean[k])) / chi - 1);
  }
  return kl;
}

}  // namespace

double HmpSolver::bfe_surrogate(const MessageState& st, const BGPrior& prior) const {
  CVec Gb;
  kern::gemv(G_, st.beta_hat, Gb);
  RVec var(st.beta_hat.size());
  for (Eigen::Index k = 0; k < var.size(); ++k) {
    const double pi = st.nonzero_prob[k];
    var[k] = std::max(pi * (st.slab_var[k] + std::norm(st.slab_mean[k])) - std::norm(st.beta_hat[k]), 0.0);
  }
  RVec gv;
  kern::gemv(G2_, var, gv);
  const double misfit = ((y_ - Gb).squaredNorm() + gv.sum()) / sz2_;
  return bg_kl(st, prior) + misfit + MN_ * std::log(kPi * sz2_);
}

double HmpSolver::residual() const {
  CVec Gb;
  kern::gemv(G_, st_.beta_hat, Gb);
  const double ny = y_.norm();
  return ny > 0 ? (y_ - Gb).norm() / ny : (y_ - Gb).norm();
}

bool HmpSolver::step() {
  const MessageState prop = iterate(st_, prior_);
  MessageState cand;
  double J = J_;
  for (int tries = 0;; ++tries) {
    const double r = rho_, q = 1 - r;
    cand = prop;
    cand.beta_hat = r * prop.beta_hat + q * st_.beta_hat;
    cand.sigma_beta2 = r * prop.sigma_beta2 + q * st_.sigma_beta2;
    cand.xi_s_bs = r * prop.xi_s_bs + q * st_.xi_s_bs;
    cand.v_b_bsb = r * prop.v_b_bsb + q * st_.v_b_bsb;
    cand.nonzero_prob = r * prop.nonzero_prob + q * st_.nonzero_prob;
    cand.slab_var = r * prop.slab_var + q * st_.slab_var;
    for (Eigen::Index k = 0; k < cand.beta_hat.size(); ++k) {
      const double pi = cand.nonzero_prob[k];
      cand.slab_mean[k] = pi > 0 ? cand.beta_hat[k] / std::max(pi, 1e-300) : cd(0);
    }
    J = bfe_surrogate(cand, prior_);
    if (J <= J_ + opt_.accept_slack || tries >= opt_.max_retries || !std::isfinite(J_)) break;
    rho_ = std::max(rho_ / 2, opt_.rho_min);
  }
  const bool ok = J <= J_ + opt_.accept_slack || !std::isfinite(J_);
  st_ = std::move(cand);
  if (!st_.beta_hat.allFinite()) throw DivergenceError("hmp: non-finite estimate", trace_);
  if (ok) rho_ = std::min(1.0, rho_ * 1.1);
  // learn from the accepted (damped) beliefs, not the raw proposal
  if (opt_.learn) prior_ = update_hyperparams(st_, prior_);
  J_ = bfe_surrogate(st_, prior_);
  return ok;
}

void HmpSolver::run(int max_iter, double tol) {
  converged_ = false;
  for (int t = 0; t < max_iter; ++t) {
    const CVec old = st_.beta_hat;
    ++iters_;
    step();
    trace_.push_back({iters_, residual(), J_, prior_.lambda, rho_});
    if ((st_.beta_hat - old).norm() <= tol * st_.beta_hat.norm()) {
      converged_ = true;
      break;
    }
  }
}

EstimateReport hmp_estimate(const CVec& y, const CMat& G, const CMat& U, double sigma_z2,
                            const HmpOptions& opts) {
  HmpSolver s(G, y, sigma_z2, opts);
  s.run(opts.max_iter, opts.tol);
  EstimateReport r;
  r.beta_hat = s.state().beta_hat;
  kern::gemv(U, r.beta_hat, r.h_hat);
  r.prior = s.prior();
  r.trace = s.trace();
  for (const auto& t : r.trace) r.bfe_trace.push_back(t.bfe);
  r.iterations_used = s.iterations();
  r.converged = s.converged();
  r.state = s.state();
  return r;
}

void write_hmp_trace_csv(const std::vector<HmpTraceRow>& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f.precision(10);
  f << "iteration,residual,bfe,lambda\n";
  for (const auto& t : trace) f << t.iteration << ',' << t.residual << ',' << t.bfe << ',' << t.lambda << '\n';
}

}  // namespace bdce
