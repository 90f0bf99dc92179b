#include "bdce/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace bdce::kern {
namespace {

// a __m256d holds two complex doubles: [re0 im0 re1 im1]

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v), hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void cmv(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y) {
  double* yd = reinterpret_cast<double*>(y);
  for (std::size_t i = 0; i < 2 * m; ++i) yd[i] = 0.0;
  const std::size_t m2 = m & ~std::size_t(1);
  std::size_t j = 0;
  // two columns per pass, y stays in L1 at the sizes we run
  for (; j + 2 <= n; j += 2) {
    const double* a0 = reinterpret_cast<const double*>(A + j * m);
    const double* a1 = reinterpret_cast<const double*>(A + (j + 1) * m);
    const __m256d xr0 = _mm256_set1_pd(x[j].real()), xi0 = _mm256_set1_pd(x[j].imag());
    const __m256d xr1 = _mm256_set1_pd(x[j + 1].real()), xi1 = _mm256_set1_pd(x[j + 1].imag());
    for (std::size_t i = 0; i < m2; i += 2) {
      __m256d acc = _mm256_loadu_pd(yd + 2 * i);
      __m256d v0 = _mm256_loadu_pd(a0 + 2 * i);
      __m256d v1 = _mm256_loadu_pd(a1 + 2 * i);
      __m256d t0 = _mm256_fmaddsub_pd(v0, xr0, _mm256_mul_pd(_mm256_permute_pd(v0, 0x5), xi0));
      __m256d t1 = _mm256_fmaddsub_pd(v1, xr1, _mm256_mul_pd(_mm256_permute_pd(v1, 0x5), xi1));
      acc = _mm256_add_pd(acc, _mm256_add_pd(t0, t1));
      _mm256_storeu_pd(yd + 2 * i, acc);
    }
    for (std::size_t i = m2; i < m; ++i) y[i] += A[j * m + i] * x[j] + A[(j + 1) * m + i] * x[j + 1];
  }
  for (; j < n; ++j) {
    const double* a0 = reinterpret_cast<const double*>(A + j * m);
    const __m256d xr0 = _mm256_set1_pd(x[j].real()), xi0 = _mm256_set1_pd(x[j].imag());
    for (std::size_t i = 0; i < m2; i += 2) {
      __m256d v0 = _mm256_loadu_pd(a0 + 2 * i);
      __m256d t0 = _mm256_fmaddsub_pd(v0, xr0, _mm256_mul_pd(_mm256_permute_pd(v0, 0x5), xi0));
      _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), t0));
    }
    for (std::size_t i = m2; i < m; ++i) y[i] += A[j * m + i] * x[j];
  }
}

void cmv_h(const cd* A, std::size_t m, std::size_t n, const cd* x, cd* y) {
  const double* xd = reinterpret_cast<const double*>(x);
  const std::size_t m2 = m & ~std::size_t(1);
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = reinterpret_cast<const double*>(A + j * m);
    __m256d s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd();
    for (std::size_t i = 0; i < m2; i += 2) {
      __m256d va = _mm256_loadu_pd(a + 2 * i);
      __m256d vx = _mm256_loadu_pd(xd + 2 * i);
      s1 = _mm256_fmadd_pd(va, vx, s1);                              // ar*xr, ai*xi
      s2 = _mm256_fmadd_pd(va, _mm256_permute_pd(vx, 0x5), s2);      // ar*xi, ai*xr
    }
    alignas(32) double b[4];
    _mm256_store_pd(b, s2);
    double re = hsum(s1);
    double im = (b[0] + b[2]) - (b[1] + b[3]);
    for (std::size_t i = m2; i < m; ++i) {
      const cd v = std::conj(A[j * m + i]) * x[i];
      re += v.real();
      im += v.imag();
    }
    y[j] = cd(re, im);
  }
}

void rmv(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = 0.0;
  const std::size_t m4 = m & ~std::size_t(3);
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = A + j * m;
    const __m256d xj = _mm256_set1_pd(x[j]);
    for (std::size_t i = 0; i < m4; i += 4)
      _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), xj, _mm256_loadu_pd(y + i)));
    for (std::size_t i = m4; i < m; ++i) y[i] += a[i] * x[j];
  }
}

void rmv_t(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
  const std::size_t m4 = m & ~std::size_t(3);
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = A + j * m;
    __m256d s = _mm256_setzero_pd();
    for (std::size_t i = 0; i < m4; i += 4)
      s = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i), s);
    double t = hsum(s);
    for (std::size_t i = m4; i < m; ++i) t += a[i] * x[i];
    y[j] = t;
  }
}

void abs2(const cd* A, std::size_t len, double* out) {
  const double* a = reinterpret_cast<const double*>(A);
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    __m256d v = _mm256_loadu_pd(a + 2 * i);
    v = _mm256_mul_pd(v, v);
    __m128d s = _mm_hadd_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    _mm_storeu_pd(out + i, s);
  }
  for (; i < len; ++i) out[i] = std::norm(A[i]);
}

}  // namespace

const Table* avx2_table() {
  static const Table t{"avx2", cmv, cmv_h, rmv, rmv_t, abs2};
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &t : nullptr;
}

}  // namespace bdce::kern

#else

namespace bdce::kern {
const Table* avx2_table() { return nullptr; }
}  // namespace bdce::kern

#endif
