#pragma once

#include <vector>

#include "branchlab/measure.hpp"

namespace branchlab {

enum class AhlforsDirection { Upper, Lower };

struct AhlforsEstimate {
  AhlforsDirection direction = AhlforsDirection::Upper;
  double alpha = 0.0;    // slope of log extremal ball mass against log r
  double M_upper = 0.0;  // max over support and radii of mass / r^alpha
  double M_lower = 0.0;  // min over support and radii of mass / r^alpha
  double r_min = 0.0;
  std::vector<double> radii_used;
  std::vector<double> extremal_mass;  // sup (upper) or inf (lower) per radius
  // M(alpha) over the requested grid: max (upper) or min (lower) of mass / r^alpha.
  std::vector<double> alpha_grid;
  std::vector<double> M_of_alpha;
};

// Support points: atom positions, or block endpoints and centers.
std::vector<double> support_points(const AnyMeasure& mu);

AhlforsEstimate ahlfors_fit(const AnyMeasure& mu, AhlforsDirection dir,
                            const std::vector<double>& radii,
                            const std::vector<double>& alpha_grid = {});

struct BoxDimension {
  double value = 0.0;
  std::vector<int> depths;
  std::vector<long long> counts;
  double r_min = 0.0;
};

// Regression slope of log #(occupied cells of side base^{-j}) against j log(base).
BoxDimension box_dimension(const AnyMeasure& mu, const std::vector<int>& depths, int base = 2);

struct FrostmanEntry {
  double gamma;
  double norm;      // partial sum plus geometric tail, or +inf
  double ratio;     // growth of the estimate across the last doubling
  bool divergent;
};

struct FrostmanResult {
  std::vector<FrostmanEntry> entries;
  double gamma_star = 0.0;  // largest divergent gamma, 0 if none
  double estimate = 1.0;    // max(0, d - 2 gamma_star)
  int K = 0;
  double threshold = 1.5;
  double min_decay = 0.05;
};

// Divergence of the H^{-gamma} norm by K-doubling on dyadic shell sums of the
// spectrum up to K (rounded up to a power of two). The norm is the partial
// sum plus a geometric tail fitted on the last shells; it is infinite when the
// shells shrink by less than 2^{-min_decay} per doubling, and flagged
// divergent when it is infinite or grew by more than `threshold` over the
// last doubling.
FrostmanResult frostman_proxy(const AnyMeasure& mu, const std::vector<double>& gamma_grid, int K,
                              double threshold = 1.5, double min_decay = 0.05);

// Middle-thirds Cantor approximations of total mass one.
AtomicMeasure cantor_atoms(int depth);  // centers of the 2^depth intervals
BlockMeasure cantor_blocks(int depth);

}  // namespace branchlab
