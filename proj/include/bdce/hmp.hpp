#pragma once

#include <string>
#include <vector>

#include "bdce/types.hpp"

namespace bdce {

struct BGPrior {
  double lambda = 0.1;
  RVec chi;  // per-index slab power
};

struct BgMoments {
  cd mean;
  double var = 0;
  double pi = 0;      // P(beta != 0 | mu)
  cd slab_mean;       // g*mu, g = chi/(chi+v)
  double slab_var = 0;  // g*v
  double log_lr = 0;  // log[(1-lam) N(mu;0,v) / (lam N(mu;0,chi+v))]
};

// moments of [(1-lam) delta + lam CN(0,chi)] x CN(mu, v); throws on v <= 0
BgMoments bg_denoiser(cd mu, double v, double lambda, double chi);

// Multipliers are stored as positive effective variances: an entry v here
// stands for a Lagrange multiplier varsigma = -1/v.
struct MessageState {
  // s side, length M*Np
  CVec xi_s_bs;    // xi^{s,b_s}
  RVec v_s_bs;     // -1/varsigma^{s,b_s}
  CVec mu_s_bs;
  RVec v_s_bsb;    // -1/varsigma^{s,b_sβ}
  CVec mu_s_bsb;
  RVec pi_s_bs;
  CVec s_hat;
  RVec sigma_s2;
  // beta side, length K
  RVec v_b_bsb;    // -1/varsigma^{β,b_sβ}
  RVec pi_b_bb;
  RVec v_b_bb;     // pseudo-variance fed to the denoiser
  CVec mu_b;       // pseudo-mean fed to the denoiser
  CVec beta_hat;
  RVec sigma_beta2;
  RVec nonzero_prob;
  CVec slab_mean;
  RVec slab_var;
};

struct HmpOptions {
  int max_iter = 200;
  double tol = 1e-6;
  double rho0 = 0.8;
  double rho_min = 0.05;
  int max_retries = 5;
  double accept_slack = 1e-8;
  double lambda_init = 0.1;
  double lambda_min = 1e-6;
  bool learn = true;
  // noise variance used by the estimator is at least this times |y|^2/(M Np)
  double noise_floor_rel = 3e-6;
};

struct HmpTraceRow {
  int iteration;
  double residual;  // |y - G beta| / |y|
  double bfe;
  double lambda;
  double rho;
};

struct EstimateReport {
  CVec beta_hat;
  CVec h_hat;
  BGPrior prior;
  std::vector<HmpTraceRow> trace;
  std::vector<double> bfe_trace;
  int iterations_used = 0;
  bool converged = false;
  MessageState state;
};

struct DivergenceError : Error {
  std::vector<HmpTraceRow> trace;
  DivergenceError(const std::string& w, std::vector<HmpTraceRow> t) : Error(w), trace(std::move(t)) {}
};

// Stateful solver for one problem; reused by the two-stage estimator.
class HmpSolver {
 public:
  HmpSolver(CMat G, CVec y, double sigma_z2, const HmpOptions& opts = {});

  // replace the measurement matrix (dimensions must stay the same)
  void set_matrix(CMat G);
  const CMat& matrix() const { return G_; }

  // one application of lines 3-17 to the given state; does not touch *this
  MessageState iterate(const MessageState& st, const BGPrior& prior) const;
  BGPrior update_hyperparams(const MessageState& state, const BGPrior& prior) const;
  double bfe_surrogate(const MessageState& st, const BGPrior& prior) const;

  // damped iteration + learning; returns false if the step was forced after
  // exhausting retries
  bool step();
  // iterate until convergence or max_iter; throws DivergenceError
  void run(int max_iter, double tol);

  void recompute_bfe() { J_ = bfe_surrogate(st_, prior_); }
  // restart from beta = 0 under a caller-chosen prior
  void reset_prior(const BGPrior& p);

  MessageState& state() { return st_; }
  const MessageState& state() const { return st_; }
  BGPrior& prior() { return prior_; }
  const BGPrior& prior() const { return prior_; }
  double rho() const { return rho_; }
  void set_rho(double r) { rho_ = r; }
  double sigma2() const { return sz2_; }
  const std::vector<HmpTraceRow>& trace() const { return trace_; }
  int iterations() const { return iters_; }
  bool converged() const { return converged_; }
  double residual() const;

 private:
  CMat G_;
  RMat G2_;
  CVec y_;
  double sz2_;
  double MN_;
  HmpOptions opt_;
  MessageState st_;
  BGPrior prior_;
  double rho_;
  double J_;
  int iters_ = 0;
  bool converged_ = false;
  std::vector<HmpTraceRow> trace_;
};

EstimateReport hmp_estimate(const CVec& y, const CMat& G, const CMat& U, double sigma_z2,
                            const HmpOptions& opts = {});

void write_hmp_trace_csv(const std::vector<HmpTraceRow>& trace, const std::string& path);

}  // namespace bdce
