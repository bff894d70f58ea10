#pragma once

#include <string>
#include <vector>

#include "branchlab/irrigation.hpp"

namespace branchlab {

// A piece of a terminal measure: an atom (width 0) or a uniform block.
struct TargetPiece {
  double x;  // position or block center, unwrapped
  double m;
  double width = 0.0;
};

struct DyadicOptions {
  double delta = 0.4;  // must lie in (1/4, 1/2)
  int depth = 10;
  double min_width = 1e-6;
};

// Appends to `p` a branching fragment on [t0, t0 + eps] starting at node
// `start` (position x_minus, mass phi) and ending at `target`. The first half
// is a single edge; on the second half the target hull is refined in nested
// dyadic cells at times t0 + eps (1 - delta^k / 2), each cell node sitting
// on the displacement interpolant of its cell barycenter.
void append_dyadic(IrrigationPattern& p, int start, double t0, double eps, double x_minus,
                   std::vector<TargetPiece> target, const DyadicOptions& opt);

// Squared Wasserstein cost of moving all of `target` from one atom at x.
double w2_from_atom(double x, const std::vector<TargetPiece>& target);

struct DyadicResult {
  IrrigationPattern pattern;  // on [0, eps], not symmetric
  double I = 0.0;             // measured P + Ekin
  double w2 = 0.0;            // W^2(source atom, target)
  double radius = 0.0;        // half-width of the target hull
  double bound_rhs = 0.0;     // W^2/eps + r^2 phi/eps + eps
};

DyadicResult dyadic_branch(double x_minus, const std::vector<TargetPiece>& target, double eps,
                           const DyadicOptions& opt = {});
// Uniform target of mass phi on [center - r, center + r].
DyadicResult dyadic_branch_uniform(double x_minus, double phi, double center, double r, double eps,
                                   const DyadicOptions& opt = {});

struct UniformGridOptions {
  double eps_b = -1.0;  // refinement layer thickness; <= 0 means the whole height T
  DyadicOptions dyadic{};
};

// N cells centered at (i + 1/2)/N, each a trunk followed by a dyadic fragment
// onto a block of width r. Tips are blocks.
IrrigationPattern uniform_grid(int N, double r, double T, const UniformGridOptions& opt = {});
// The three terms T N, r^2/T and 1/(N r^{1-2s}) of the global bound (d = 1).
struct GlobalBoundTerms {
  double perimeter;
  double kinetic;
  double boundary;
  double sum() const { return perimeter + kinetic + boundary; }
};
GlobalBoundTerms uniform_grid_prediction(int N, double r, double T, double s);
// Full energy of uniform_grid(N, r, T) computed from one cell (the cells are
// translates). The boundary norm sums the first K harmonics k = N, 2N, ...
// of the tip comb (frequency cutoff K N) plus the averaged sinc^2 tail.
EnergyBreakdown uniform_grid_energy(int N, double r, double T, double s, int K,
                                    const UniformGridOptions& opt = {});

// N static branches of mass 1/N at (i + 1/2)/N with atomic tips.
IrrigationPattern dirac_grid(int N, double T);

struct CoveringResult {
  IrrigationPattern pattern;
  double r = 0.0;
  int intervals = 0;
  int fragments = 0;
  double I = 0.0;   // I(new, (T - eps, T))
  double w2 = 0.0;  // W^2(mu_{T-eps}, mu_T)
  double bound_rhs = 0.0;  // W^2/eps + r^2/eps + r^{-alpha} eps
  double excess() const;   // I - W^2/eps
  double eps = 0.0;
};

// Replaces p on [T - eps, T] by per-interval dyadic fragments over a Vitali
// cover of supp mu_T with radius eps^{2/(2+alpha)}. M is the lower Ahlfors
// constant; it only enters the reported bound.
CoveringResult covering_competitor(const IrrigationPattern& p, double eps, double alpha,
                                   double M = 1.0);

// Greedy Vitali centers and the enlarged disjoint intervals for a support
// given as sorted closed intervals (atoms are degenerate intervals).
struct Cover {
  std::vector<double> centers;
  std::vector<std::pair<double, double>> intervals;
};
Cover vitali_cover(const std::vector<std::pair<double, double>>& support, double r);

// Copy of p with a node inserted wherever an edge crosses time t.
IrrigationPattern split_edges_at(const IrrigationPattern& p, double t);

// After T - eps every position becomes the midpoint between itself and its
// ancestor at T - eps; block tips are halved.
IrrigationPattern shrink_competitor(const IrrigationPattern& p, double eps);
// After T - eps every subtree is replaced by two half-mass copies drifting
// by +-(eta/eps)(t - (T - eps)).
IrrigationPattern shift_competitor(const IrrigationPattern& p, double eps, double eta);

enum class ConstructionKind { UniformGrid, DiracGrid, DyadicBranch, Covering, Shrink, Shift };
const char* construction_name(ConstructionKind k);
// Throws ConfigError on an unknown name.
ConstructionKind parse_construction(const std::string& name);

// Deterministic recipe for one construction. Covering, shrink and shift are
// applied to a base grid (uniform_grid when r > 0, dirac_grid otherwise).
struct ConstructionSpec {
  ConstructionKind kind = ConstructionKind::UniformGrid;
  int N = 1;
  double r = 1.0;       // block half-width for dyadic_branch, full width for grids
  double eps = 0.1;     // fragment height or competitor layer
  double eta = 0.05;
  double alpha = 1.0;
  double eps_b = -1.0;
  DyadicOptions dyadic{};
};

IrrigationPattern build_construction(const ConstructionSpec& spec, double T);

}  // namespace branchlab
