#pragma once

// Oracle and property checks shared by `bdce selftest` and the acceptance
// binary. Each returns a verdict plus the measured numbers.

#include <cstdint>
#include <string>
#include <vector>

#include "bdce/types.hpp"

namespace bdce::checks {

struct Result {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

// exact posterior mean of a BG linear model by enumerating all 2^K supports
CVec exact_bg_mmse(const CMat& G, const CVec& y, double sigma2, double lambda, double chi);

Result kernel_equivalence(std::uint64_t seed);
Result denoiser_quadrature(int n, std::uint64_t seed);
Result toy_mmse(int n, std::uint64_t seed);
Result on_grid_recovery(int trials, std::uint64_t seed);
Result qp_oracle(int n, std::uint64_t seed);
Result degeneration(int draws, std::uint64_t seed);
Result derivatives(int cols, std::uint64_t seed);
Result flop_scaling(std::uint64_t seed);
Result determinism(int trials, std::uint64_t seed);

std::vector<Result> fast_suite();

}  // namespace bdce::checks
