#include "bdce/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace bdce::kern {

namespace {
thread_local std::uint64_t g_flops = 0;

const Table& pick() {
  const char* env = std::getenv("BDCE_KERNELS");
  if (env && std::strcmp(env, "scalar") == 0) return scalar_table();
  if (const Table* t = avx2_table()) return *t;
  return scalar_table();
}
}  // namespace

const Table& active() {
  static const Table& t = pick();
  return t;
}

std::uint64_t flops() { return g_flops; }
void reset_flops() { g_flops = 0; }
void add_flops(std::uint64_t f) { g_flops += f; }

void gemv(const CMat& A, const CVec& x, CVec& y) {
  y.resize(A.rows());
  active().cmv(A.data(), A.rows(), A.cols(), x.data(), y.data());
  g_flops += 8ull * A.rows() * A.cols();
}

void gemv_h(const CMat& A, const CVec& x, CVec& y) {
  y.resize(A.cols());
  active().cmv_h(A.data(), A.rows(), A.cols(), x.data(), y.data());
  g_flops += 8ull * A.rows() * A.cols();
}

void gemv(const RMat& A, const RVec& x, RVec& y) {
  y.resize(A.rows());
  active().rmv(A.data(), A.rows(), A.cols(), x.data(), y.data());
  g_flops += 2ull * A.rows() * A.cols();
}

void gemv_t(const RMat& A, const RVec& x, RVec& y) {
  y.resize(A.cols());
  active().rmv_t(A.data(), A.rows(), A.cols(), x.data(), y.data());
  g_flops += 2ull * A.rows() * A.cols();
}

RMat abs2(const CMat& A) {
  RMat out(A.rows(), A.cols());
  active().abs2(A.data(), A.size(), out.data());
  g_flops += 3ull * A.size();
  return out;
}

}  // namespace bdce::kern
