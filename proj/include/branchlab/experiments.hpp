#pragma once

#include <string>
#include <utility>
#include <vector>

#include "branchlab/config.hpp"
#include "branchlab/exponents.hpp"
#include "branchlab/json_io.hpp"

namespace branchlab {

inline constexpr const char* kModuleVersions =
    "measure-core=1.0;spectral-sobolev=1.0;transport-1d=1.0;irrigation=1.0;"
    "constructions=1.0;optimizer=1.0;dimension-lab=1.0;cli-experiments=1.1";

struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (x, y), not logged
  bool flagged = false;                           // r_squared below the threshold
};

// Least squares of log y on log x. InvalidScale with fewer than 4 points or
// nonpositive values.
ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points,
                         double flag_below = 0.95);

enum class Regime { Thick, Lebesgue, GlobalLocal, Delta };
const char* regime_name(Regime r);
Regime global_regime(double s, double T);
// 1, 1/3, beta_c(s, 1) and 2s/(2s + 1) respectively.
Rational regime_exponent(Regime r, const Rational& s);

struct ConstructionPoint {
  double T = 0.0;
  double energy = 0.0;
  std::string kind;  // uniform_grid or dirac_grid
  int N = 0;
  double r = 0.0;
  double eps_b = 0.0;
};

// Best uniform_grid over N near the predicted optimum, a few refinement
// layer thicknesses, and a golden search in r.
ConstructionPoint best_uniform_grid(double s, double T, const DyadicOptions& dyadic, int K = 4096);
// Best dirac_grid over N = 1 .. 4 N0 + 4 (atomic boundary, K harmonics).
ConstructionPoint best_dirac_grid(double s, double T, int K = 4096);
// uniform_grid with N = 1, r = 1 and the refinement spread over all of T.
ConstructionPoint thick_construction(double s, double T, const DyadicOptions& dyadic, int K = 4096);
// Minimum of the above that apply: dirac grids only for s > 1/2.
ConstructionPoint best_construction(double s, double T, const DyadicOptions& dyadic, int K = 4096);
// The family that certifies the regime's upper bound.
ConstructionPoint regime_construction(double s, double T, const DyadicOptions& dyadic, int K = 4096);

struct GlobalScalingResult {
  double s = 0.0;
  Regime regime = Regime::Thick;
  Rational predicted;
  std::vector<ConstructionPoint> best;     // per T, best-of
  std::vector<ConstructionPoint> certified;  // per T, regime construction
  ScalingFit fit;
  ScalingFit certified_fit;
  bool optimizer_used = false;
};
std::vector<GlobalScalingResult> run_global_scaling(const ExperimentConfig& cfg);

struct LocalScalingResult {
  std::string pattern;  // seed name or "optimized"
  double s = 0.0;
  double T = 0.0;
  double alpha_est = 0.0;  // upper Ahlfors fit of mu_T
  std::optional<double> beta_reg;
  double beta_con = 0.0;
  ScalingFit fit;                       // I(mu, (T - eps, T)) against eps
  std::optional<ScalingFit> covering;   // excess of the covering competitor
  bool slope_ok = false;                // fit.exponent >= 1/3 - 0.05
};
// StaleInput when the optimizer stops before converging.
std::vector<LocalScalingResult> run_local_scaling(const ExperimentConfig& cfg);

struct DimensionRow {
  std::string pattern;
  double s = 0.0;
  double T = 0.0;
  double alpha_bar = 0.0;
  double ahlfors = 0.0;
  double box = 0.0;
  double frostman = 0.0;
  double discrepancy = 0.0;  // ahlfors - alpha_bar
  double r_min = 0.0;
  int tips = 0;
};
std::vector<DimensionRow> run_dimension_sweep(const ExperimentConfig& cfg);

struct ValidationRow {
  std::string pattern;  // seed name, "optimized" or fixture name
  std::string source;   // seed | optimized | fixture
  double s = 0.0;
  double T = 0.0;
  std::string check;
  bool passed = false;
  double measure = 0.0;
  std::string witness;
  bool hard = false;  // failing rows with hard = true make the suite fail
};
struct ValidationSuite {
  std::vector<ValidationRow> rows;
  bool hard_failure() const;
};
ValidationSuite run_validator_suite(const ExperimentConfig& cfg);

struct BenchRow {
  std::string seed;
  double s = 0.0;
  double T = 0.0;
  EnergyBreakdown energy;
  double predicted = 0.0;  // sum of the uniform-grid bound terms, 0 if not a grid
  int nodes = 0;
  bool structural_ok = false;
};
std::vector<BenchRow> construction_bench(const ExperimentConfig& cfg);

// The optimized pattern, or with source = seed the first seed.
IrrigationPattern experiment_pattern(const ExperimentConfig& cfg, double s, double T);
// Patterns an experiment iterates over: every seed by name with source = seed,
// otherwise the single optimized pattern (seed index -1).
std::vector<std::pair<std::string, int>> pattern_choices(const ExperimentConfig& cfg);
// Terminal measure of a pattern, wrapped onto the torus.
AnyMeasure terminal_measure(const IrrigationPattern& p);

// Result of one CLI run: JSON document plus the rendered files.
struct ExperimentOutput {
  Json results;
  std::string csv;
  std::vector<std::pair<std::string, std::string>> plotdata;  // file name, contents
  int exit_code = 0;
  bool cache_hit = false;
};

// Runs the experiment (or reuses the cache) and writes results.csv,
// results.json and plotdata/ under cfg.output_dir.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);
// Renders CSV and plot data from a results document; used for fresh and
// cached runs alike.
ExperimentOutput render(const Json& results);

}  // namespace branchlab
