#include "branchlab/json_io.hpp"

#include <fmt/format.h>

#include "branchlab/errors.hpp"

namespace branchlab {

Json to_json(const IrrigationPattern& p) {
  Json j;
  j["T"] = p.T;
  j["symmetric"] = p.symmetric;
  j["total_mass"] = p.total_mass;
  Json nodes = Json::array();
  for (const Node& n : p.nodes) nodes.push_back({n.id, n.t, n.x});
  Json edges = Json::array();
  for (const Edge& e : p.edges) edges.push_back({e.from, e.to, e.mass});
  Json tips = Json::array();
  for (const Tip& t : p.tips)
    tips.push_back({t.node, t.kind == TipKind::Atom ? "atom" : "block", t.width});
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["tips"] = std::move(tips);
  return j;
}

IrrigationPattern pattern_from_json(const Json& j) {
  try {
    IrrigationPattern p;
    p.T = j.at("T").get<double>();
    p.symmetric = j.value("symmetric", true);
    p.total_mass = j.value("total_mass", 1.0);
    for (const Json& n : j.at("nodes")) {
      int id = p.add_node(n.at(1).get<double>(), n.at(2).get<double>());
      if (id != n.at(0).get<int>())
        throw Error(ErrorCode::ConfigError, fmt::format("node ids must be 0..n-1, got {}", n.at(0).dump()));
    }
    for (const Json& e : j.at("edges"))
      p.add_edge(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
    for (const Json& t : j.at("tips")) {
      std::string kind = t.at(1).get<std::string>();
      if (kind != "atom" && kind != "block")
        throw Error(ErrorCode::ConfigError, "tip kind " + kind);
      p.add_tip(t.at(0).get<int>(), kind == "atom" ? TipKind::Atom : TipKind::Block,
                t.at(2).get<double>());
    }
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigError, std::string("pattern json: ") + ex.what());
  }
}

Json to_json(const NormReport& r) {
  return {{"value", r.value}, {"truncated", r.truncated}, {"tail_bound", r.tail_bound},
          {"K", r.K}, {"infinite", r.infinite}};
}

Json to_json(const EnergyBreakdown& e) {
  return {{"perimeter", e.perimeter}, {"kinetic", e.kinetic},
          {"boundary_penalty", e.boundary_penalty}, {"total", e.total},
          {"boundary", to_json(e.boundary)}};
}

Json to_json(const ValidationReport& rep) {
  Json arr = Json::array();
  for (const CheckResult& r : rep.results)
    arr.push_back({{"check", check_name(r.check)}, {"passed", r.passed},
                   {"measure", r.measure}, {"witness", r.witness}});
  return arr;
}

std::string trace_to_jsonl(const OptimizationTrace& trace) {
  std::string out;
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const TraceStep& st = trace.iterations[i];
    Json j{{"iter", i}, {"move", st.move}, {"perimeter", st.energy.perimeter},
           {"kinetic", st.energy.kinetic}, {"boundary", st.energy.boundary_penalty},
           {"total", st.energy.total}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace branchlab
