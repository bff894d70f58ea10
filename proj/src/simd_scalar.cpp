#include <cmath>
#include <numbers>

#include "branchlab/simd.hpp"

namespace branchlab::simd {

double frac_product(double k, double x) {
  double hi = k * x;
  double lo = std::fma(k, x, -hi);
  double f = hi - std::floor(hi);
  f += lo;
  return f - std::floor(f);
}

namespace {

void accumulate_phasor_ref(double* re, double* im, std::size_t n, std::size_t k0, double x,
                           double m) {
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    double phase = tau * frac_product(static_cast<double>(k0 + i), x);
    re[i] += m * std::cos(phase);
    im[i] += m * std::sin(phase);
  }
}

double weighted_power_sum_ref(const double* w, const double* re, const double* im,
                              std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * (re[i] * re[i] + im[i] * im[i]);
  return s;
}

double weighted_dot_ref(const double* w, const double* a1, const double* a2, const double* b1,
                        const double* b2, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * (a1[i] * b1[i] + a2[i] * b2[i]);
  return s;
}

double weighted_wedge_ref(const double* w, const double* a1, const double* a2, const double* b1,
                          const double* b2, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * (a1[i] * b2[i] - a2[i] * b1[i]);
  return s;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", accumulate_phasor_ref, weighted_power_sum_ref,
                         weighted_dot_ref, weighted_wedge_ref};
  return k;
}

}  // namespace branchlab::simd
