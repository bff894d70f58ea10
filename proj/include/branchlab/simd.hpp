#pragma once

#include <cstddef>

namespace branchlab::simd {

// Inner loops of the spectral module. Every kernel has a scalar reference
// implementation; vector variants must agree with it to rounding.
struct Kernels {
  const char* name;
  // re[i] += m cos(2 pi (k0+i) x), im[i] += m sin(2 pi (k0+i) x), i < n.
  void (*accumulate_phasor)(double* re, double* im, std::size_t n, std::size_t k0, double x,
                            double m);
  // sum w[i] (re[i]^2 + im[i]^2)
  double (*weighted_power_sum)(const double* w, const double* re, const double* im,
                               std::size_t n);
  // sum w[i] (a1[i] b1[i] + a2[i] b2[i])
  double (*weighted_dot)(const double* w, const double* a1, const double* a2, const double* b1,
                         const double* b2, std::size_t n);
  // sum w[i] (a1[i] b2[i] - a2[i] b1[i])
  double (*weighted_wedge)(const double* w, const double* a1, const double* a2, const double* b1,
                           const double* b2, std::size_t n);
};

const Kernels& scalar_kernels();
// nullptr when the CPU or the build lacks AVX2+FMA.
const Kernels* avx2_kernels();
// Selected once: AVX2 when available unless BRANCHLAB_SIMD=scalar is set.
const Kernels& active();

// Exact-ish fractional part of k*x using an FMA error term.
double frac_product(double k, double x);

}  // namespace branchlab::simd
