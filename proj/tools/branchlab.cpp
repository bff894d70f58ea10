// branchlab: batch driver for the scaling, dimension and validation experiments.
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "branchlab/errors.hpp"
#include "branchlab/experiments.hpp"

using namespace branchlab;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    // bad parameters that made it through parsing, e.g. a seed with r > 1/N
    case ErrorCode::ConfigError:
    case ErrorCode::NoSeeds:
    case ErrorCode::InvalidScale:
    case ErrorCode::InvalidDelta:
    case ErrorCode::OverlappingBlocks:
    case ErrorCode::OutOfValidity:
      return 1;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, ExperimentKind> verbs{
      {"global-scaling", ExperimentKind::GlobalScaling},
      {"local-scaling", ExperimentKind::LocalScaling},
      {"dimension", ExperimentKind::DimensionSweep},
      {"validate", ExperimentKind::ValidatorSuite},
      {"construct", ExperimentKind::ConstructionBench},
  };
  CLI::App app{"branchlab experiment driver"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  for (const auto& [verb, kind] : verbs) {
    (void)kind;
    CLI::App* sub = app.add_subcommand(verb, std::string("run the ") + experiment_name(kind) + " experiment");
    sub->add_option("--config", config_path, "INI experiment file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides experiment.output_dir)");
    sub->allow_extras();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  CLI::App* sub = app.get_subcommands().front();
  const ExperimentKind want = verbs.at(sub->get_name());
  try {
    std::vector<std::string> overrides;
    for (const std::string& extra : sub->remaining()) {
      if (extra.rfind("--", 0) != 0 || extra.find('=') == std::string::npos)
        throw Error(ErrorCode::ConfigError, "unexpected argument " + extra + " (overrides look like --section.key=value)");
      overrides.push_back(extra);
    }
    if (!out_dir.empty()) overrides.push_back("experiment.output_dir=" + out_dir);
    ExperimentConfig cfg = load_config(config_path, overrides);
    if (cfg.experiment != want)
      throw Error(ErrorCode::ConfigError, fmt::format("{}: experiment.kind is {} but the verb asks for {}",
                                                      config_path, experiment_name(cfg.experiment),
                                                      experiment_name(want)));
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
    ExperimentOutput out = run_experiment(cfg);
    std::cout << fmt::format("{} {} -> {}{}\n", experiment_name(cfg.experiment), config_hash(cfg).substr(0, 12),
                             cfg.output_dir, out.cache_hit ? " (cached)" : "");
    if (out.exit_code != 0) std::cerr << "hard check failed; see results.csv\n";
    return out.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
