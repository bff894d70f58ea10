#pragma once

#include <utility>
#include <vector>

#include "branchlab/measure.hpp"

namespace branchlab {

struct PlanEntry {
  double x;  // source position
  double y;  // target position, unwrapped so that y - x is the displacement
  double m;
};

struct MonotonePlan {
  std::vector<PlanEntry> pairs;
  double total_mass() const;
  double cost_sq() const;
  bool is_monotone(double tol = 1e-12) const;
};

struct WassersteinResult {
  double cost_sq = 0.0;
  MonotonePlan plan;
  double cut = 0.0;        // torus only: offset of the target quantile, as a fraction of mass in [0,1)
  bool antipodal = false;  // torus only: some pair is displaced by exactly 1/2
};

enum class Metric { Line, Torus };

WassersteinResult w2_line(const AtomicMeasure& mu, const AtomicMeasure& nu);
WassersteinResult w2_torus(const AtomicMeasure& mu, const AtomicMeasure& nu);

// Quadratic cost of the quantile coupling where the target quantile is
// shifted by theta (in mass units) and continued periodically.
double torus_cut_cost(const AtomicMeasure& mu, const AtomicMeasure& nu, double theta);

AtomicMeasure mccann(const AtomicMeasure& mu, const AtomicMeasure& nu, double lambda,
                     Metric metric);
// Pushforward of the plan by (1 - lambda) x + lambda y.
AtomicMeasure interpolate(const MonotonePlan& plan, double lambda, bool periodic);

struct DisplacementAhlfors {
  double M_lambda;
  double M0;
};
// Upper Ahlfors constants of the source and of the interpolant at lambda,
// measured with line balls centered on support points. M0 is taken over the
// given radii and over the enlarged radii 2r/(1-lambda) the comparison uses.
DisplacementAhlfors displacement_ahlfors(const MonotonePlan& plan, double lambda, double alpha,
                                         const std::vector<double>& radii);

// max over support points x and radii r of mass(B_r(x)) / r^alpha, line balls.
double upper_ahlfors_line(const std::vector<Atom>& atoms, double alpha,
                          const std::vector<double>& radii);

// lhs = gradient-normalized H^{-1} distance of the two mollified measures,
// rhs = sup density^{1/2} times the periodic Wasserstein distance of their
// grid discretizations.
std::pair<double, double> loeper_check(const MollifiedMeasure& mu, const MollifiedMeasure& nu,
                                       int grid);

}  // namespace branchlab
