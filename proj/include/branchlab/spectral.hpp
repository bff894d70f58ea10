#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "branchlab/measure.hpp"

namespace branchlab {

enum class SourceKind { Atomic, Block, Mollified, Combined };

// Fourier coefficients sigma_k = integral of exp(2 pi i k x) d sigma for k = 0..K.
// Negative k follow from Hermitian symmetry and are not stored.
struct Spectrum {
  int K = 0;
  SourceKind kind = SourceKind::Atomic;
  bool centered = false;
  std::vector<double> re;
  std::vector<double> im;

  // Tail model for |k| > K.
  double mass_abs = 0.0;      // sum |m_j|, bounds |sigma_k| for atomic parts
  double sum_sq_mass = 0.0;   // sum m_j^2, mean of |sigma_k|^2 for generic atom positions
  double block_slope = 0.0;   // sum m_j / (pi w_j), |sigma_k| <= block_slope / k
  double block_sq = 0.0;      // sum m_j^2 / (2 pi^2 w_j^2), mean of k^2 |sigma_k|^2
  double mollifier_eps = 0.0; // > 0 when coefficients carry a bump factor

  std::complex<double> coeff(int k) const;
};

Spectrum spectrum_of(const AtomicMeasure& mu, int K, bool centered = true);
Spectrum spectrum_of(const BlockMeasure& mu, int K, bool centered = true);
Spectrum spectrum_of(const MollifiedMeasure& mu, int K, bool centered = true);
Spectrum spectrum_of(const AnyMeasure& mu, int K, bool centered = true);

// a - b and a + b, coefficientwise; tail data combined conservatively.
Spectrum spectrum_difference(const Spectrum& a, const Spectrum& b);
Spectrum spectrum_sum(const Spectrum& a, const Spectrum& b);

struct NormReport {
  double value = 0.0;      // truncated sum plus tail estimate
  double truncated = 0.0;  // sum over 0 < |k| <= K only
  double tail_bound = 0.0; // rigorous bound on the omitted tail
  int K = 0;
  bool infinite = false;
};

// Sum over 0 < |k| <= K of |k|^{-2s} |sigma_k|^2, with tail handling.
NormReport hs_norm_sq(const Spectrum& sigma, double s);
// Real part of sum over k != 0 of |k|^{-2s} sigma1_k conj(sigma2_k), truncated.
double hs_inner(const Spectrum& a, const Spectrum& b, double s);

// sum_{k > K} k^{-a}, a > 1.
double zeta_tail(long long K, double a);

// d/dx_j of the truncated sum over 0 < |k| <= K of |k|^{-2s}|sigma_k|^2 for
// sigma = sum_j m_j delta_{x_j} - 1. Atoms are used as given (no merging).
std::vector<double> hs_gradient(const std::vector<Atom>& atoms, double s, int K);
// Truncated norm of the same raw atom list, without canonicalization.
double hs_truncated_raw(const std::vector<Atom>& atoms, double s, int K);

struct MollificationRatio {
  double eps;
  double ratio;
};
std::vector<MollificationRatio> mollification_error_ratio(const AnyMeasure& mu, double s,
                                                          double gamma,
                                                          const std::vector<double>& eps_list,
                                                          int K);

// lhs = truncated spectral norm, rhs = integral over eps of eps^{2s} ||rho_eps * sigma||_{L2}^2 deps/eps.
std::pair<double, double> characterization2_lhs_rhs(const AnyMeasure& mu, double s, int K,
                                                    int quad_nodes);

}  // namespace branchlab
