#pragma once

#include <vector>

#include "bdce/types.hpp"

namespace bdce {

struct SompResult {
  std::vector<int> support;
  CVec beta_ls;                  // gains on support, same order
  CVec h_hat;                    // filled when a dictionary is given
  std::vector<double> residual_norms;  // |r| after each accepted atom, starting with |y|
};

// greedy selection by normalized correlation, LS refit per step; stops at
// max_atoms atoms or once |r| <= residual_tol
SompResult somp_estimate(const CVec& y, const CMat& G, int max_atoms, double residual_tol);
SompResult somp_estimate(const CVec& y, const CMat& G, const CMat& U, int max_atoms, double residual_tol);

// LS gains on a known support; throws on rank deficiency
CVec ls_gains(const CVec& y, const CMat& G, const std::vector<int>& support);
CVec ls_oracle(const CVec& y, const CMat& G, const CMat& U, const std::vector<int>& true_support);

}  // namespace bdce
