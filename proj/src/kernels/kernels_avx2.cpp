// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace rlsfi::kernels::avx2 {

namespace {
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}
}  // namespace

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0));
  }
  // Same rounding as the vector body, so results do not depend on alignment.
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

std::complex<double> cdot(const std::complex<double>* a, const std::complex<double>* b,
                          std::size_t n) {
  // Interleaved (re, im) pairs, two complex values per register.
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc_rr = _mm256_setzero_pd();  // [ar*br, ai*bi, ...]
  __m256d acc_ri = _mm256_setzero_pd();  // [ar*bi, ai*br, ...]
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    const __m256d vb_sw = _mm256_permute_pd(vb, 0b0101);
    acc_rr = _mm256_fmadd_pd(va, vb, acc_rr);
    acc_ri = _mm256_fmadd_pd(va, vb_sw, acc_ri);
  }
  alignas(32) double rr[4];
  alignas(32) double ri[4];
  _mm256_store_pd(rr, acc_rr);
  _mm256_store_pd(ri, acc_ri);
  double re = (rr[0] + rr[2]) - (rr[1] + rr[3]);
  double im = (ri[0] + ri[2]) + (ri[1] + ri[3]);
  for (; i < n; ++i) {
    re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
  }
  return {re, im};
}

std::complex<double> rcdot(const double* a, const std::complex<double>* b, std::size_t n) {
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // [a0, a0, a1, a1] and [a2, a2, a3, a3]
    const __m256d a01 = _mm256_permute4x64_pd(_mm256_castpd128_pd256(_mm_loadu_pd(a + i)),
                                              0b01010000);
    const __m256d a23 = _mm256_permute4x64_pd(_mm256_castpd128_pd256(_mm_loadu_pd(a + i + 2)),
                                              0b01010000);
    acc0 = _mm256_fmadd_pd(a01, _mm256_loadu_pd(pb + 2 * i), acc0);
    acc1 = _mm256_fmadd_pd(a23, _mm256_loadu_pd(pb + 2 * i + 4), acc1);
  }
  alignas(32) double s[4];
  _mm256_store_pd(s, _mm256_add_pd(acc0, acc1));
  double re = s[0] + s[2];
  double im = s[1] + s[3];
  for (; i < n; ++i) {
    re += a[i] * b[i].real();
    im += a[i] * b[i].imag();
  }
  return {re, im};
}

}  // namespace rlsfi::kernels::avx2
