#pragma once

#include <string>

#include <json.hpp>

#include "branchlab/irrigation.hpp"
#include "branchlab/optimizer.hpp"

namespace branchlab {

using Json = nlohmann::json;

Json to_json(const IrrigationPattern& p);
// Throws ConfigError on missing or mistyped fields.
IrrigationPattern pattern_from_json(const Json& j);

Json to_json(const NormReport& r);
Json to_json(const EnergyBreakdown& e);
Json to_json(const ValidationReport& rep);

// One JSON object per line: iteration index, move, energy terms.
std::string trace_to_jsonl(const OptimizationTrace& trace);

}  // namespace branchlab
