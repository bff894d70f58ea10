#pragma once

#include <optional>
#include <string>
#include <vector>

#include "branchlab/measure.hpp"
#include "branchlab/spectral.hpp"

namespace branchlab {

struct Node {
  int id;
  double t;
  double x;  // unwrapped line coordinate
};

struct Edge {
  int from;
  int to;
  double mass;
};

enum class TipKind { Atom, Block };

struct Tip {
  int node;
  TipKind kind;
  double width = 0.0;  // blocks only
};

// A forest of affine mass-carrying segments on [0, T]. Node ids are indices
// into `nodes`. Positions are stored unwrapped; boundary spectra re-wrap.
struct IrrigationPattern {
  double T = 1.0;
  bool symmetric = true;
  double total_mass = 1.0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Tip> tips;

  int add_node(double t, double x);
  void add_edge(int from, int to, double mass);
  void add_tip(int node, TipKind kind, double width = 0.0);

  double edge_pos(const Edge& e, double t) const;
  double edge_velocity(const Edge& e) const;
};

// Adjacency derived from a pattern. parent[v] is the incoming edge index or -1.
struct Topology {
  std::vector<int> parent;
  std::vector<std::vector<int>> children;  // outgoing edge indices
  std::vector<int> tip_of;                 // tip index per node or -1
  std::vector<double> node_mass;           // inflow, or outflow for roots
  std::vector<int> roots;
  std::vector<int> order;                  // nodes in nondecreasing time, parents first

  explicit Topology(const IrrigationPattern& p);
  bool is_leaf(int v) const { return children[v].empty(); }
};

// Throws on broken structure: backwards edges, multiple parents, Kirchhoff
// violations, leaves away from T, tips without a leaf.
void check_structure(const IrrigationPattern& p, double tol = 1e-9);

struct SliceResult {
  double t;
  AtomicMeasure measure;  // unwrapped coordinates
  std::vector<std::vector<int>> branch_ids;
};

SliceResult slice(const IrrigationPattern& p, double t);

struct InternalEnergy {
  double P = 0.0;
  double Ekin = 0.0;
  double total() const { return P + Ekin; }
};
InternalEnergy internal_energy(const IrrigationPattern& p, double a, double b);

enum class BoundaryMode { Atomic, Block, Mollified };

struct BoundaryOptions {
  BoundaryMode mode = BoundaryMode::Block;
  int K = 4096;
  double mollifier_eps = 0.01;
};

struct EnergyBreakdown {
  double perimeter = 0.0;
  double kinetic = 0.0;
  double boundary_penalty = 0.0;
  double total = 0.0;
  NormReport boundary;
};

// Terminal measure at time T in the chosen representation, as a spectrum
// of mu_T - 1.
Spectrum boundary_spectrum(const IrrigationPattern& p, const BoundaryOptions& opt);
// Terminal atoms at T (block tips collapsed to their centers), unwrapped.
std::vector<Atom> tip_atoms(const IrrigationPattern& p);
EnergyBreakdown full_energy(const IrrigationPattern& p, double s, const BoundaryOptions& opt);

// Ancestor path restricted to the subtree mass of `node`, plus the subtree.
IrrigationPattern subsystem(const IrrigationPattern& p, int node);

enum class Check { NoLoop, MonotoneCoupling, Cone, Barycenter, ThreeIntervals, Equipartition };
const char* check_name(Check c);
std::vector<Check> all_checks();

struct CheckResult {
  Check check;
  bool passed = true;
  double measure = 0.0;  // largest violation or residual found
  std::string witness = {};
};

struct ValidationOptions {
  double cone_tol = 1e-9;
  double barycenter_tol = 1e-8;
  double equipartition_tol = 0.05;
  double position_tol = 1e-12;
};

struct ValidationReport {
  std::vector<CheckResult> results;
  bool all_passed() const;
  const CheckResult* find(Check c) const;
};

ValidationReport validate(const IrrigationPattern& p, const std::vector<Check>& checks,
                          const ValidationOptions& opt = {});

// Piecewise values of P'(t) - Ekin'(t) between consecutive node times,
// together with the residual max|Lambda - mean| / (I / T).
struct Equipartition {
  std::vector<double> times;   // breakpoints, size n+1
  std::vector<double> lambda;  // size n
  double mean = 0.0;
  double residual = 0.0;
};
Equipartition equipartition(const IrrigationPattern& p);

}  // namespace branchlab
