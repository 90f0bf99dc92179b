#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bdce/dictionary.hpp"
#include "bdce/hmp.hpp"
#include "bdce/measurement.hpp"
#include "bdce/types.hpp"

namespace bdce {

struct Perturbations {
  RVec d_psi, d_eta, d_tau;
  double half_psi = 0, half_eta = 0, half_tau = 0;  // box half-widths
  bool inside() const;
};

struct QPProblem {
  RMat P;
  RVec u;
  double bound = 0;  // box half-width
};

std::vector<int> prune(const CVec& beta_ini, double E_th);

// U + U_psi diag(dpsi) + U_eta diag(deta) + U_tau diag(dtau)
CMat assemble_perturbed(const CMat& U, const CMat& U_psi, const CMat& U_eta, const CMat& U_tau,
                        const Perturbations& pert);

// QP for one perturbation family; GD is the measured derivative matrix of that
// family, G_rest the measured dictionary with the other two families applied
QPProblem build_qp(const CMat& GD, const CMat& G_rest, const CVec& target, const CVec& beta_hat,
                   const RVec& sigma_beta2, double bound);
double qp_objective(const QPProblem& qp, const RVec& x);  // x'Px - 2u'x
RVec solve_qp_box(const QPProblem& qp, int n_sweeps, std::vector<double>* objective_trace = nullptr);

enum class Family { Psi, Eta, Tau };

struct MdgppOptions {
  double E_th = 0.05;
  int T_ini = 100;
  int T_ref = 30;
  int n_sweeps = 3;
  std::array<Family, 3> order{Family::Psi, Family::Eta, Family::Tau};
  // QP data term: measured y (true) or the HMP posterior mean s_hat (false)
  bool target_y = true;
  // remove the carrier's common phase from the delay derivative
  bool carrier_compensated_delay = true;
  double stage2_rho = 0.8;
  HmpOptions hmp;
};

struct MdgppTraceRow {
  int iteration;
  double nmse_proxy;  // |y - G~ beta|^2 / |y|^2
  double max_dpsi, max_deta, max_dtau;
};

struct MdgppReport {
  CVec beta_hat;  // full index space
  CVec h_hat;
  std::vector<int> support;
  Perturbations pert;
  EstimateReport stage1;
  std::vector<MdgppTraceRow> trace;
  bool stage2_failed = false;
  std::uint64_t refine_flops = 0;  // counted inside the T_ref loop only
};

struct MdgppProblem {
  const CVec& y;
  const Dictionary& dict;
  const SamplingGrid& grid;
  const ScenarioConfig& cfg;
  const HybridPrecoder& F;
  double sigma_z2;
};

// G is F^H U for the full dictionary (the caller usually has it already)
MdgppReport two_stage_estimate(const MdgppProblem& pb, const CMat& G, const MdgppOptions& opts = {});

// stage 2 alone on a given support; stage-1 state is optional
MdgppReport refine_on_support(const MdgppProblem& pb, const std::vector<int>& support,
                              const HmpSolver* stage1, const MdgppOptions& opts = {});

void write_mdgpp_trace_csv(const std::vector<MdgppTraceRow>& trace, const std::string& path);

}  // namespace bdce
