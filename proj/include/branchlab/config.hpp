#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "branchlab/constructions.hpp"
#include "branchlab/irrigation.hpp"

namespace branchlab {

enum class ExperimentKind {
  GlobalScaling,
  LocalScaling,
  DimensionSweep,
  ValidatorSuite,
  ConstructionBench,
};
const char* experiment_name(ExperimentKind k);
ExperimentKind parse_experiment(const std::string& name);

// Where local-scaling and dimension sweeps take their pattern from.
enum class PatternSource { Optimized, Seed };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::GlobalScaling;
  std::vector<double> s_values;
  std::vector<double> T_values;
  std::vector<double> eps_values;  // local scaling only
  std::vector<ConstructionSpec> seeds;
  std::vector<std::string> seed_names;
  int K = 4096;
  BoundaryMode boundary_mode = BoundaryMode::Block;
  double mollifier_eps = 0.01;
  std::string output_dir = "out";
  bool cache = true;
  int workers = 0;  // 0: hardware concurrency

  // construction search used by global scaling
  DyadicOptions search_dyadic{0.4, 10, 1e-6};
  bool optimize = false;  // also run the optimizer and keep the better energy

  // optimizer
  int max_outer_iters = 20;
  int max_gradient_steps = 500;
  std::uint64_t rng_seed = 1;

  PatternSource source = PatternSource::Optimized;
  bool covering = true;  // local scaling: also fit the covering competitor

  std::vector<std::string> warnings;

  BoundaryOptions boundary() const { return {boundary_mode, K, mollifier_eps}; }
};

// n points per decade between lo and hi inclusive (both positive, lo < hi).
std::vector<double> log_grid(double lo, double hi, int per_decade = 8);

// INI text with sections; overrides are "section.key=value" (a leading "--"
// is stripped). Throws ConfigError with "<origin>:<line>:" prefixes.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Canonical rendering of everything that affects results (not output_dir or
// cache) and its SHA-256.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);
std::string sha256_hex(const std::string& data);

}  // namespace branchlab
