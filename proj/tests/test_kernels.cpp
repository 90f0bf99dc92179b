#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "bdce/kernels.hpp"

using namespace bdce;

namespace {

CMat rand_c(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::normal_distribution<double> g;
  CMat A(m, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = cd(g(rng), g(rng));
  return A;
}

RMat rand_r(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::normal_distribution<double> g;
  RMat A(m, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = g(rng);
  return A;
}

void check_table(const kern::Table& t) {
  std::mt19937_64 rng(3);
  for (auto [m, n] : {std::pair{1, 1}, {2, 3}, {7, 5}, {64, 33}, {129, 17}}) {
    const CMat A = rand_c(rng, m, n);
    const CVec x = rand_c(rng, n, 1), z = rand_c(rng, m, 1);
    CVec y(m), w(n);
    t.cmv(A.data(), m, n, x.data(), y.data());
    t.cmv_h(A.data(), m, n, z.data(), w.data());
    CHECK((y - A * x).norm() <= 1e-12 * (1 + y.norm()));
    CHECK((w - A.adjoint() * z).norm() <= 1e-12 * (1 + w.norm()));

    const RMat R = rand_r(rng, m, n);
    const RVec xr = rand_r(rng, n, 1), zr = rand_r(rng, m, 1);
    RVec yr(m), wr(n);
    t.rmv(R.data(), m, n, xr.data(), yr.data());
    t.rmv_t(R.data(), m, n, zr.data(), wr.data());
    CHECK((yr - R * xr).norm() <= 1e-12 * (1 + yr.norm()));
    CHECK((wr - R.transpose() * zr).norm() <= 1e-12 * (1 + wr.norm()));

    RMat a2(m, n);
    t.abs2(A.data(), std::size_t(A.size()), a2.data());
    CHECK((a2 - A.cwiseAbs2()).norm() == doctest::Approx(0).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("scalar table matches Eigen") { check_table(kern::scalar_table()); }

TEST_CASE("avx2 table matches Eigen when available") {
  if (const kern::Table* t = kern::avx2_table()) check_table(*t);
}

TEST_CASE("avx2 and scalar agree to rounding") {
  const kern::Table* v = kern::avx2_table();
  if (!v) return;
  const kern::Table& s = kern::scalar_table();
  std::mt19937_64 rng(9);
  const CMat A = rand_c(rng, 513, 37);
  const CVec x = rand_c(rng, 37, 1);
  CVec y1(513), y2(513);
  s.cmv(A.data(), 513, 37, x.data(), y1.data());
  v->cmv(A.data(), 513, 37, x.data(), y2.data());
  CHECK((y1 - y2).norm() / y1.norm() < 1e-13);
}

TEST_CASE("flop counter counts complex and real MACs") {
  std::mt19937_64 rng(1);
  const CMat A = rand_c(rng, 10, 4);
  const CVec x = rand_c(rng, 4, 1);
  const RMat R = rand_r(rng, 10, 4);
  const RVec xr = rand_r(rng, 4, 1);
  CVec y;
  RVec yr;
  kern::reset_flops();
  kern::gemv(A, x, y);
  CHECK(kern::flops() == 8u * 40);
  kern::reset_flops();
  kern::gemv_t(R, RVec::Ones(10), yr);
  CHECK(kern::flops() == 2u * 40);
  kern::reset_flops();
  kern::gemv(R, xr, yr);
  kern::gemv_h(A, CVec::Ones(10), y);
  CHECK(kern::flops() == 2u * 40 + 8u * 40);
}

TEST_CASE("wrappers size their outputs") {
  CMat A = CMat::Zero(3, 2);
  CVec y;
  kern::gemv(A, CVec::Ones(2), y);
  CHECK(y.size() == 3);
  kern::gemv_h(A, CVec::Ones(3), y);
  CHECK(y.size() == 2);
}
