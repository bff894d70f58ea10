#include <immintrin.h>

#include <cmath>
#include <numbers>

#include "branchlab/simd.hpp"

namespace branchlab::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Four lanes advance by a rotation of 4 wavenumbers; lanes are reseeded
// from exactly reduced phases every kBlock wavenumbers to bound drift.
void accumulate_phasor_avx2(double* re, double* im, std::size_t n, std::size_t k0, double x,
                            double m) {
  constexpr std::size_t kBlock = 64;
  const double tau = 2.0 * std::numbers::pi;
  const double rot = tau * frac_product(4.0, x);
  const __m256d rc = _mm256_set1_pd(std::cos(rot));
  const __m256d rs = _mm256_set1_pd(std::sin(rot));
  const __m256d mv = _mm256_set1_pd(m);
  std::size_t i = 0;
  const std::size_t nv = n & ~std::size_t{3};
  while (i < nv) {
    alignas(32) double c0[4], s0[4];
    for (int l = 0; l < 4; ++l) {
      double ph = tau * frac_product(static_cast<double>(k0 + i + l), x);
      c0[l] = std::cos(ph);
      s0[l] = std::sin(ph);
    }
    __m256d c = _mm256_load_pd(c0);
    __m256d s = _mm256_load_pd(s0);
    const std::size_t stop = std::min(nv, i + kBlock);
    for (; i < stop; i += 4) {
      __m256d r = _mm256_loadu_pd(re + i);
      __m256d q = _mm256_loadu_pd(im + i);
      _mm256_storeu_pd(re + i, _mm256_fmadd_pd(mv, c, r));
      _mm256_storeu_pd(im + i, _mm256_fmadd_pd(mv, s, q));
      __m256d c2 = _mm256_fmsub_pd(c, rc, _mm256_mul_pd(s, rs));
      s = _mm256_fmadd_pd(s, rc, _mm256_mul_pd(c, rs));
      c = c2;
    }
  }
  if (i < n) scalar_kernels().accumulate_phasor(re + i, im + i, n - i, k0 + i, x, m);
}

double weighted_power_sum_avx2(const double* w, const double* re, const double* im,
                               std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d r0 = _mm256_loadu_pd(re + i), q0 = _mm256_loadu_pd(im + i);
    __m256d r1 = _mm256_loadu_pd(re + i + 4), q1 = _mm256_loadu_pd(im + i + 4);
    __m256d p0 = _mm256_fmadd_pd(r0, r0, _mm256_mul_pd(q0, q0));
    __m256d p1 = _mm256_fmadd_pd(r1, r1, _mm256_mul_pd(q1, q1));
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), p0, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i + 4), p1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  if (i < n) s += scalar_kernels().weighted_power_sum(w + i, re + i, im + i, n - i);
  return s;
}

double weighted_dot_avx2(const double* w, const double* a1, const double* a2, const double* b1,
                         const double* b2, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + i), _mm256_loadu_pd(b1 + i),
                                _mm256_mul_pd(_mm256_loadu_pd(a2 + i), _mm256_loadu_pd(b2 + i)));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), t, acc);
  }
  double s = hsum(acc);
  if (i < n) s += scalar_kernels().weighted_dot(w + i, a1 + i, a2 + i, b1 + i, b2 + i, n - i);
  return s;
}

double weighted_wedge_avx2(const double* w, const double* a1, const double* a2, const double* b1,
                           const double* b2, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_fmsub_pd(_mm256_loadu_pd(a1 + i), _mm256_loadu_pd(b2 + i),
                                _mm256_mul_pd(_mm256_loadu_pd(a2 + i), _mm256_loadu_pd(b1 + i)));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), t, acc);
  }
  double s = hsum(acc);
  if (i < n) s += scalar_kernels().weighted_wedge(w + i, a1 + i, a2 + i, b1 + i, b2 + i, n - i);
  return s;
}

}  // namespace

const Kernels* avx2_kernels_impl() {
  static const Kernels k{"avx2", accumulate_phasor_avx2, weighted_power_sum_avx2,
                         weighted_dot_avx2, weighted_wedge_avx2};
  return &k;
}

}  // namespace branchlab::simd
