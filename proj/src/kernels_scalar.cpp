#include "bdce/kernels.hpp"

namespace bdce::kern {
namespace {

void cmv(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const cd* a = A + j * m;
    const double xr = x[j].real(), xi = x[j].imag();
    for (std::size_t i = 0; i < m; ++i) {
      const double ar = a[i].real(), ai = a[i].imag();
      y[i] = cd(y[i].real() + ar * xr - ai * xi, y[i].imag() + ai * xr + ar * xi);
    }
  }
}

void cmv_h(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y) {
  for (std::size_t j = 0; j < n; ++j) {
    const cd* a = A + j * m;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      re += a[i].real() * x[i].real() + a[i].imag() * x[i].imag();
      im += a[i].real() * x[i].imag() - a[i].imag() * x[i].real();
    }
    y[j] = cd(re, im);
  }
}

void rmv(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = A + j * m;
    const double xj = x[j];
    for (std::size_t i = 0; i < m; ++i) y[i] += a[i] * xj;
  }
}

void rmv_t(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = A + j * m;
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i] * x[i];
    y[j] = s;
  }
}

void abs2(const cd* A, std::size_t len, double* out) {
  for (std::size_t i = 0; i < len; ++i)
    out[i] = A[i].real() * A[i].real() + A[i].imag() * A[i].imag();
}

}  // namespace

const Table& scalar_table() {
  static const Table t{"scalar", cmv, cmv_h, rmv, rmv_t, abs2};
  return t;
}

}  // namespace bdce::kern
