#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "branchlab/constructions.hpp"
#include "branchlab/irrigation.hpp"

namespace branchlab {

enum class Move { MergeSiblings, SplitEdge, RetimeNode, PruneZero };
const char* move_name(Move m);

struct OptimizerConfig {
  double s = 0.6;
  double T = 1.0;
  BoundaryOptions boundary{BoundaryMode::Atomic, 1024, 0.01};
  int max_outer_iters = 20;
  double position_tol = 1e-10;  // relative energy decrease
  std::set<Move> moves{Move::MergeSiblings, Move::SplitEdge, Move::RetimeNode, Move::PruneZero};
  std::vector<ConstructionSpec> restarts;
  std::uint64_t rng_seed = 1;
  int max_gradient_steps = 500;
};

struct TraceStep {
  EnergyBreakdown energy;
  std::string move;
};

struct OptimizationTrace {
  std::vector<TraceStep> iterations;
  IrrigationPattern final_pattern;
  double equipartition_residual = 0.0;
  double wall_seconds = 0.0;
  int seed_index = -1;
  double seed_energy = 0.0;
  bool converged = false;  // outer loop ended without an accepted move
};

double pattern_energy(const IrrigationPattern& p, const OptimizerConfig& cfg);

// Interior positions minimizing the kinetic energy for fixed tips and times,
// by leaf-to-root elimination on each tree.
IrrigationPattern relax_interior(const IrrigationPattern& p);

// relax_interior, plus (atomic boundary) gradient steps with backtracking on
// tip positions. Never increases the energy.
IrrigationPattern relax_positions(const IrrigationPattern& p, const OptimizerConfig& cfg);

// Gradient of the total energy in the tip positions, interior positions at
// their optimum. Entries follow p.tips.
std::vector<double> tip_gradient(const IrrigationPattern& p, const OptimizerConfig& cfg);

// Golden-section sweep over interior node times. Never increases the energy.
IrrigationPattern retime_nodes(const IrrigationPattern& p, const OptimizerConfig& cfg);

// Runs every seed, keeps the lowest final energy (ties: lower seed index).
OptimizationTrace topology_search(const OptimizerConfig& cfg);
OptimizationTrace optimize_from(const IrrigationPattern& seed, const OptimizerConfig& cfg);

// Drops nodes that no edge or tip references and renumbers.
IrrigationPattern compact(const IrrigationPattern& p);

}  // namespace branchlab
