#pragma once

// Dense column-major matvecs used in the estimator inner loops.
// A scalar reference table is always present; an AVX2+FMA table is chosen at
// runtime when the CPU has it (BDCE_KERNELS=scalar forces the reference).

#include <cstddef>
#include <cstdint>

#include "bdce/types.hpp"

namespace bdce::kern {

struct Table {
  const char* name;
  // y = A x, A is m x n complex
  void (*cmv)(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y);
  // y = A^H x
  void (*cmv_h)(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y);
  // y = A x, A is m x n real
  void (*rmv)(const double* A, std::size_t m, std::size_t n, const double* x, double* y);
  // y = A^T x
  void (*rmv_t)(const double* A, std::size_t m, std::size_t n, const double* x, double* y);
  // out = |A|^2 elementwise, len entries
  void (*abs2)(const cd* A, std::size_t len, double* out);
};

const Table& scalar_table();
const Table* avx2_table();  // nullptr when not compiled in or not supported
const Table& active();

// flop accounting (complex MAC = 8, real MAC = 2); per thread
std::uint64_t flops();
void reset_flops();
void add_flops(std::uint64_t f);

// thin wrappers over the active table that also count flops
void gemv(const CMat& A, const CVec& x, CVec& y);
void gemv_h(const CMat& A, const CVec& x, CVec& y);
void gemv(const RMat& A, const RVec& x, RVec& y);
void gemv_t(const RMat& A, const RVec& x, RVec& y);
RMat abs2(const CMat& A);

}  // namespace bdce::kern
