#include "branchlab/irrigation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "branchlab/errors.hpp"

namespace branchlab {

int IrrigationPattern::add_node(double t, double x) {
  int id = static_cast<int>(nodes.size());
  nodes.push_back({id, t, x});
  return id;
}

void IrrigationPattern::add_edge(int from, int to, double mass) { edges.push_back({from, to, mass}); }

void IrrigationPattern::add_tip(int node, TipKind kind, double width) {
  tips.push_back({node, kind, width});
}

double IrrigationPattern::edge_pos(const Edge& e, double t) const {
  const Node& a = nodes[e.from];
  const Node& b = nodes[e.to];
  if (t <= a.t) return a.x;
  if (t >= b.t) return b.x;
  return a.x + (b.x - a.x) * ((t - a.t) / (b.t - a.t));
}

double IrrigationPattern::edge_velocity(const Edge& e) const {
  const Node& a = nodes[e.from];
  const Node& b = nodes[e.to];
  return (b.x - a.x) / (b.t - a.t);
}

Topology::Topology(const IrrigationPattern& p) {
  const std::size_t n = p.nodes.size();
  parent.assign(n, -1);
  children.assign(n, {});
  tip_of.assign(n, -1);
  node_mass.assign(n, 0.0);
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Edge& ed = p.edges[e];
    if (ed.from < 0 || ed.to < 0 || static_cast<std::size_t>(ed.from) >= n ||
        static_cast<std::size_t>(ed.to) >= n)
      throw Error(ErrorCode::NodeNotFound, fmt::format("edge {} references a missing node", e));
    parent[ed.to] = static_cast<int>(e);
    children[ed.from].push_back(static_cast<int>(e));
  }
  for (std::size_t i = 0; i < p.tips.size(); ++i) {
    int v = p.tips[i].node;
    if (v < 0 || static_cast<std::size_t>(v) >= n)
      throw Error(ErrorCode::NodeNotFound, fmt::format("tip {} references a missing node", i));
    tip_of[v] = static_cast<int>(i);
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (parent[v] >= 0) {
      node_mass[v] = p.edges[parent[v]].mass;
    } else {
      roots.push_back(static_cast<int>(v));
      for (int e : children[v]) node_mass[v] += p.edges[e].mass;
    }
  }
  order.resize(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p.nodes[a].t < p.nodes[b].t; });
}

void check_structure(const IrrigationPattern& p, double tol) {
  if (!(p.T > 0.0)) throw Error(ErrorCode::TimeOutOfRange, "T must be positive");
  std::vector<int> indeg(p.nodes.size(), 0);
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Edge& ed = p.edges[e];
    if (ed.from < 0 || ed.to < 0 || static_cast<std::size_t>(ed.from) >= p.nodes.size() ||
        static_cast<std::size_t>(ed.to) >= p.nodes.size())
      throw Error(ErrorCode::NodeNotFound, fmt::format("edge {} references a missing node", e));
    if (!(ed.mass > 0.0)) throw Error(ErrorCode::InvalidMass, fmt::format("edge {} mass", e));
    if (!(p.nodes[ed.to].t > p.nodes[ed.from].t))
      throw Error(ErrorCode::TimeOutOfRange, fmt::format("edge {} does not go forward in time", e));
    if (++indeg[ed.to] > 1)
      throw Error(ErrorCode::InvalidMass, fmt::format("node {} has two parents", ed.to));
  }
  Topology topo(p);
  double total = 0.0;
  for (std::size_t v = 0; v < p.nodes.size(); ++v) {
    const Node& nd = p.nodes[v];
    if (nd.t < -tol || nd.t > p.T + tol)
      throw Error(ErrorCode::TimeOutOfRange, fmt::format("node {} at t={}", v, nd.t));
    double out = 0.0;
    for (int e : topo.children[v]) out += p.edges[e].mass;
    if (topo.parent[v] < 0) {
      if (std::fabs(nd.t) > tol) throw Error(ErrorCode::TimeOutOfRange, fmt::format("root {} not at t=0", v));
      total += out;
      continue;
    }
    if (topo.is_leaf(static_cast<int>(v))) {
      if (std::fabs(nd.t - p.T) > tol)
        throw Error(ErrorCode::TimeOutOfRange, fmt::format("leaf {} ends before T", v));
      if (topo.tip_of[v] < 0) throw Error(ErrorCode::NodeNotFound, fmt::format("leaf {} has no tip", v));
      continue;
    }
    double in = p.edges[topo.parent[v]].mass;
    if (std::fabs(in - out) > tol * std::max(1.0, in))
      throw Error(ErrorCode::InvalidMass, fmt::format("Kirchhoff violated at node {}", v));
  }
  for (const Tip& tp : p.tips)
    if (!topo.is_leaf(tp.node) || topo.parent[tp.node] < 0)
      throw Error(ErrorCode::NodeNotFound, fmt::format("tip at node {} is not a leaf", tp.node));
  if (std::fabs(total - p.total_mass) > tol * std::max(1.0, p.total_mass))
    throw Error(ErrorCode::InvalidMass, fmt::format("slice mass {} != {}", total, p.total_mass));
}

namespace {

// Edges carrying mass at time t: t_from <= t < t_to, plus edges that end in a leaf at t.
std::vector<int> alive_edges(const IrrigationPattern& p, const Topology& topo, double t) {
  std::vector<int> out;
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Edge& ed = p.edges[e];
    double a = p.nodes[ed.from].t, b = p.nodes[ed.to].t;
    if ((a <= t && t < b) || (t == b && topo.is_leaf(ed.to))) out.push_back(static_cast<int>(e));
  }
  return out;
}

using Geometry = std::tuple<double, double, double, double>;

Geometry geometry(const IrrigationPattern& p, const Edge& e) {
  return {p.nodes[e.from].t, p.nodes[e.from].x, p.nodes[e.to].t, p.nodes[e.to].x};
}

void check_interval(const IrrigationPattern& p, double a, double b) {
  const double tol = 1e-12 * std::max(1.0, p.T);
  if (!(a >= -tol && b <= p.T + tol && a < b))
    throw Error(ErrorCode::TimeOutOfRange, fmt::format("interval ({}, {}) not in [0, {}]", a, b, p.T));
}

}  // namespace

SliceResult slice(const IrrigationPattern& p, double t) {
  const double tol = 1e-12 * std::max(1.0, p.T);
  if (t < -tol || t > p.T + tol)
    throw Error(ErrorCode::TimeOutOfRange, fmt::format("t={} outside [0, {}]", t, p.T));
  t = std::clamp(t, 0.0, p.T);
  Topology topo(p);
  auto alive = alive_edges(p, topo, t);
  std::vector<std::pair<double, int>> pos;
  pos.reserve(alive.size());
  for (int e : alive) pos.push_back({p.edge_pos(p.edges[e], t), e});
  std::sort(pos.begin(), pos.end());
  std::vector<Atom> atoms;
  SliceResult r{t, {}, {}};
  for (const auto& [x, e] : pos) {
    if (!atoms.empty() && x - atoms.back().x <= kMergeTol) {
      atoms.back().m += p.edges[e].mass;
      r.branch_ids.back().push_back(e);
    } else {
      atoms.push_back({x, p.edges[e].mass});
      r.branch_ids.push_back({e});
    }
  }
  r.measure = AtomicMeasure::on_line(std::move(atoms));
  return r;
}

InternalEnergy internal_energy(const IrrigationPattern& p, double a, double b) {
  check_interval(p, a, b);
  InternalEnergy out;
  // Identical trajectories are one branch for the perimeter.
  std::set<Geometry> seen;
  for (const Edge& e : p.edges) {
    double ta = p.nodes[e.from].t, tb = p.nodes[e.to].t;
    double lo = std::max(a, ta), hi = std::min(b, tb);
    if (hi <= lo) continue;
    double v = p.edge_velocity(e);
    out.Ekin += e.mass * v * v * (hi - lo);
    if (seen.insert(geometry(p, e)).second) out.P += hi - lo;
  }
  return out;
}

std::vector<Atom> tip_atoms(const IrrigationPattern& p) {
  Topology topo(p);
  std::vector<Atom> out;
  out.reserve(p.tips.size());
  for (const Tip& tp : p.tips) out.push_back({p.nodes[tp.node].x, topo.node_mass[tp.node]});
  return out;
}

Spectrum boundary_spectrum(const IrrigationPattern& p, const BoundaryOptions& opt) {
  Topology topo(p);
  std::vector<Atom> atoms;
  std::vector<Block> blocks;
  for (const Tip& tp : p.tips) {
    double x = p.nodes[tp.node].x, m = topo.node_mass[tp.node];
    if (tp.kind == TipKind::Block && opt.mode != BoundaryMode::Atomic)
      blocks.push_back({wrap01(x), tp.width, m});
    else
      atoms.push_back({x, m});
  }
  auto part = [&](const AnyMeasure& m) {
    if (opt.mode == BoundaryMode::Mollified)
      return spectrum_of(MollifiedMeasure::make(m, opt.mollifier_eps), opt.K, false);
    return spectrum_of(m, opt.K, false);
  };
  std::optional<Spectrum> sp;
  if (!atoms.empty()) sp = part(AtomicMeasure::canonicalize(atoms));
  if (!blocks.empty()) {
    Spectrum b = part(BlockMeasure::superpose(blocks));
    sp = sp ? spectrum_sum(*sp, b) : b;
  }
  if (!sp) throw Error(ErrorCode::EmptyMeasure, "pattern has no tips");
  sp->re[0] -= 1.0;
  sp->centered = std::fabs(sp->re[0]) <= 1e-12;
  return *sp;
}

EnergyBreakdown full_energy(const IrrigationPattern& p, double s, const BoundaryOptions& opt) {
  bool has_atom_tips = opt.mode == BoundaryMode::Atomic;
  for (const Tip& tp : p.tips) has_atom_tips = has_atom_tips || tp.kind == TipKind::Atom;
  if (opt.mode != BoundaryMode::Mollified && has_atom_tips && s <= 0.5)
    throw Error(ErrorCode::DivergentBoundaryNorm,
                fmt::format("atomic boundary measure has infinite norm at s={}", s));
  EnergyBreakdown out;
  const double f = p.symmetric ? 2.0 : 1.0;
  InternalEnergy ie = internal_energy(p, 0.0, p.T);
  out.perimeter = f * ie.P;
  out.kinetic = f * ie.Ekin;
  out.boundary = hs_norm_sq(boundary_spectrum(p, opt), s);
  out.boundary_penalty = f * out.boundary.value;
  out.total = out.perimeter + out.kinetic + out.boundary_penalty;
  return out;
}

IrrigationPattern subsystem(const IrrigationPattern& p, int node) {
  if (node < 0 || static_cast<std::size_t>(node) >= p.nodes.size())
    throw Error(ErrorCode::NodeNotFound, fmt::format("node {}", node));
  Topology topo(p);
  const double phi = topo.node_mass[node];
  IrrigationPattern out;
  out.T = p.T;
  out.symmetric = p.symmetric;
  out.total_mass = phi;
  std::vector<int> path{node};
  while (topo.parent[path.back()] >= 0) path.push_back(p.edges[topo.parent[path.back()]].from);
  std::reverse(path.begin(), path.end());
  std::map<int, int> remap;
  auto copy_node = [&](int v) {
    int id = out.add_node(p.nodes[v].t, p.nodes[v].x);
    remap[v] = id;
    if (topo.tip_of[v] >= 0) {
      const Tip& tp = p.tips[topo.tip_of[v]];
      out.add_tip(id, tp.kind, tp.width);
    }
    return id;
  };
  for (std::size_t i = 0; i < path.size(); ++i) {
    copy_node(path[i]);
    if (i > 0) out.add_edge(remap[path[i - 1]], remap[path[i]], phi);
  }
  std::vector<int> stack{node};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int e : topo.children[v]) {
      int c = p.edges[e].to;
      copy_node(c);
      out.add_edge(remap[v], remap[c], p.edges[e].mass);
      stack.push_back(c);
    }
  }
  return out;
}

const char* check_name(Check c) {
  switch (c) {
    case Check::NoLoop: return "no_loop";
    case Check::MonotoneCoupling: return "monotone_coupling";
    case Check::Cone: return "cone";
    case Check::Barycenter: return "barycenter";
    case Check::ThreeIntervals: return "three_intervals";
    case Check::Equipartition: return "equipartition";
  }
  return "unknown";
}

std::vector<Check> all_checks() {
  return {Check::NoLoop, Check::MonotoneCoupling, Check::Cone,
          Check::Barycenter, Check::ThreeIntervals, Check::Equipartition};
}

bool ValidationReport::all_passed() const {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

const CheckResult* ValidationReport::find(Check c) const {
  for (const auto& r : results)
    if (r.check == c) return &r;
  return nullptr;
}

namespace {

struct Hull {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
};

// Extent of the tips irrigated from each node.
std::vector<Hull> tip_hulls(const IrrigationPattern& p, const Topology& topo) {
  std::vector<Hull> h(p.nodes.size());
  for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
    int v = *it;
    if (topo.tip_of[v] >= 0) {
      const Tip& tp = p.tips[topo.tip_of[v]];
      double half = tp.kind == TipKind::Block ? 0.5 * tp.width : 0.0;
      h[v].lo = std::min(h[v].lo, p.nodes[v].x - half);
      h[v].hi = std::max(h[v].hi, p.nodes[v].x + half);
    }
    for (int e : topo.children[v]) {
      const Hull& c = h[p.edges[e].to];
      h[v].lo = std::min(h[v].lo, c.lo);
      h[v].hi = std::max(h[v].hi, c.hi);
    }
  }
  return h;
}

// Node times plus midpoints between consecutive ones.
std::vector<double> probe_times(const IrrigationPattern& p) {
  std::vector<double> ts;
  for (const Node& n : p.nodes) ts.push_back(n.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<double> out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out.push_back(ts[i]);
    if (i + 1 < ts.size()) out.push_back(0.5 * (ts[i] + ts[i + 1]));
  }
  return out;
}

CheckResult check_no_loop(const IrrigationPattern& p, const Topology& topo,
                          const ValidationOptions& opt) {
  CheckResult r{Check::NoLoop};
  std::vector<int> indeg(p.nodes.size(), 0);
  for (const Edge& e : p.edges) {
    if (++indeg[e.to] > 1) {
      r.passed = false;
      r.witness = fmt::format("node {} has two incoming edges", e.to);
      return r;
    }
    if (!(p.nodes[e.to].t > p.nodes[e.from].t)) {
      r.passed = false;
      r.witness = fmt::format("edge {}->{} does not advance in time", e.from, e.to);
      return r;
    }
  }
  // Distinct branches must not meet again once separated.
  for (double t : probe_times(p)) {
    auto alive = alive_edges(p, topo, t);
    std::vector<std::pair<double, int>> pos;
    for (int e : alive) pos.push_back({p.edge_pos(p.edges[e], t), e});
    std::sort(pos.begin(), pos.end());
    for (std::size_t i = 1; i < pos.size(); ++i) {
      if (pos[i].first - pos[i - 1].first > opt.position_tol) continue;
      const Edge& a = p.edges[pos[i - 1].second];
      const Edge& b = p.edges[pos[i].second];
      if (a.from == b.from) continue;
      r.passed = false;
      r.measure = std::max(r.measure, 1.0);
      r.witness = fmt::format("edges {} and {} meet at t={} x={}", pos[i - 1].second,
                              pos[i].second, t, pos[i].first);
      return r;
    }
  }
  return r;
}

CheckResult check_monotone(const IrrigationPattern& p, const Topology& topo,
                           const std::vector<Hull>& hull, const ValidationOptions& opt) {
  CheckResult r{Check::MonotoneCoupling};
  for (double t : probe_times(p)) {
    auto alive = alive_edges(p, topo, t);
    std::sort(alive.begin(), alive.end(), [&](int a, int b) {
      return hull[p.edges[a].to].lo < hull[p.edges[b].to].lo;
    });
    for (std::size_t i = 1; i < alive.size(); ++i) {
      const Hull& h0 = hull[p.edges[alive[i - 1]].to];
      const Hull& h1 = hull[p.edges[alive[i]].to];
      double x0 = p.edge_pos(p.edges[alive[i - 1]], t), x1 = p.edge_pos(p.edges[alive[i]], t);
      double overlap = h0.hi - h1.lo;
      double cross = x0 - x1;
      double v = std::max(overlap, cross);
      if (v > opt.position_tol) {
        r.passed = false;
        if (v > r.measure) {
          r.measure = v;
          r.witness = fmt::format("edges {} and {} at t={}: positions {} {} tips [{},{}] [{},{}]",
                                  alive[i - 1], alive[i], t, x0, x1, h0.lo, h0.hi, h1.lo, h1.hi);
        }
      }
    }
  }
  return r;
}

CheckResult check_cone(const IrrigationPattern& p, const Topology& topo,
                       const std::vector<Hull>& hull, const ValidationOptions& opt) {
  CheckResult r{Check::Cone};
  // Cones nest, so comparing every node with its parent's cone covers all
  // descendants of every node.
  for (const Edge& e : p.edges) {
    const Node& a = p.nodes[e.from];
    const Node& b = p.nodes[e.to];
    const Hull& h = hull[e.from];
    double f = (b.t - a.t) / (p.T - a.t);
    double lo = a.x + (h.lo - a.x) * f, hi = a.x + (h.hi - a.x) * f;
    double v = std::max({lo - b.x, b.x - hi, 0.0});
    // a leaf's own extent must also sit inside the parent's base
    if (topo.tip_of[e.to] >= 0) v = std::max({v, h.lo - hull[e.to].lo, hull[e.to].hi - h.hi});
    if (v > r.measure) {
      r.measure = v;
      r.witness = fmt::format("node {} at (t={}, x={}) leaves the cone of node {}", e.to, b.t,
                              b.x, e.from);
    }
  }
  r.passed = r.measure <= opt.cone_tol;
  if (r.passed) r.witness.clear();
  return r;
}

CheckResult check_barycenter(const IrrigationPattern& p, const Topology& topo,
                             const ValidationOptions& opt) {
  CheckResult r{Check::Barycenter};
  std::vector<double> moment(p.nodes.size(), 0.0);
  for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
    int v = *it;
    if (topo.tip_of[v] >= 0) moment[v] += topo.node_mass[v] * p.nodes[v].x;
    for (int e : topo.children[v]) moment[v] += moment[p.edges[e].to];
  }
  for (int root : topo.roots) {
    double dev = std::fabs(topo.node_mass[root] * p.nodes[root].x - moment[root]);
    if (dev > r.measure) {
      r.measure = dev;
      r.witness = fmt::format("root {} at x={} vs tip barycenter {}", root, p.nodes[root].x,
                              moment[root] / topo.node_mass[root]);
    }
  }
  r.passed = r.measure <= opt.barycenter_tol;
  if (r.passed) r.witness.clear();
  return r;
}

CheckResult check_three_intervals(const IrrigationPattern& p, const Topology& topo,
                                  const std::vector<Hull>& hull, const ValidationOptions& opt) {
  CheckResult r{Check::ThreeIntervals};
  std::vector<Hull> leaves;
  for (const Tip& tp : p.tips) leaves.push_back(hull[tp.node]);
  std::sort(leaves.begin(), leaves.end(), [](const Hull& a, const Hull& b) { return a.lo < b.lo; });
  const std::size_t L = leaves.size();
  if (L == 0) return r;
  // Test intervals: runs of consecutive tips of dyadic lengths, at most ~64.
  std::vector<Hull> windows;
  for (std::size_t w = 1; w <= L; w *= 2) {
    std::size_t step = std::max<std::size_t>(1, L / 8);
    for (std::size_t i = 0; i + w <= L; i += step) windows.push_back({leaves[i].lo, leaves[i + w - 1].hi});
  }
  std::vector<double> times = probe_times(p);
  if (times.size() > 32) {
    std::vector<double> pick;
    for (std::size_t i = 0; i < 32; ++i) pick.push_back(times[i * (times.size() - 1) / 31]);
    times = pick;
  }
  const double tol = opt.position_tol + 1e-12;
  for (double t : times) {
    auto alive = alive_edges(p, topo, t);
    std::vector<std::pair<double, int>> pos;
    for (int e : alive) pos.push_back({p.edge_pos(p.edges[e], t), e});
    std::sort(pos.begin(), pos.end());
    for (const Hull& J : windows) {
      // positions at time t of every branch carrying mass that ends in J
      std::vector<double> img;
      for (const auto& [x, e] : pos) {
        const Hull& h = hull[p.edges[e].to];
        if (h.hi >= J.lo - tol && h.lo <= J.hi + tol) img.push_back(x);
      }
      if (img.empty()) continue;
      // greedy cover by intervals of length |J|
      const double len = J.hi - J.lo + tol;
      int count = 0;
      for (std::size_t i = 0; i < img.size();) {
        double start = img[i];
        ++count;
        while (i < img.size() && img[i] <= start + len) ++i;
      }
      if (count > 3) {
        r.passed = false;
        r.measure = std::max(r.measure, static_cast<double>(count - 3));
        if (r.witness.empty())
          r.witness = fmt::format("interval [{},{}] at t={} needs {} intervals of length {}", J.lo,
                                  J.hi, t, count, J.hi - J.lo);
      }
    }
  }
  return r;
}

}  // namespace

Equipartition equipartition(const IrrigationPattern& p) {
  Equipartition eq;
  std::vector<double> ts{0.0, p.T};
  for (const Node& n : p.nodes)
    if (n.t > 0.0 && n.t < p.T) ts.push_back(n.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  eq.times = ts;
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    double a = ts[i], b = ts[i + 1];
    InternalEnergy ie = internal_energy(p, a, b);
    double lam = (ie.P - ie.Ekin) / (b - a);
    eq.lambda.push_back(lam);
    integral += lam * (b - a);
  }
  eq.mean = integral / p.T;
  InternalEnergy total = internal_energy(p, 0.0, p.T);
  double scale = total.total() / p.T;
  double dev = 0.0;
  for (double lam : eq.lambda) dev = std::max(dev, std::fabs(lam - eq.mean));
  eq.residual = scale > 0.0 ? dev / scale : 0.0;
  return eq;
}

ValidationReport validate(const IrrigationPattern& p, const std::vector<Check>& checks,
                          const ValidationOptions& opt) {
  Topology topo(p);
  auto hull = tip_hulls(p, topo);
  ValidationReport rep;
  for (Check c : checks) {
    switch (c) {
      case Check::NoLoop: rep.results.push_back(check_no_loop(p, topo, opt)); break;
      case Check::MonotoneCoupling: rep.results.push_back(check_monotone(p, topo, hull, opt)); break;
      case Check::Cone: rep.results.push_back(check_cone(p, topo, hull, opt)); break;
      case Check::Barycenter: rep.results.push_back(check_barycenter(p, topo, opt)); break;
      case Check::ThreeIntervals:
        rep.results.push_back(check_three_intervals(p, topo, hull, opt));
        break;
      case Check::Equipartition: {
        CheckResult r{Check::Equipartition};
        Equipartition eq = equipartition(p);
        r.measure = eq.residual;
        r.passed = eq.residual <= opt.equipartition_tol;
        if (!r.passed) r.witness = fmt::format("Lambda deviates by {} of I/T", eq.residual);
        rep.results.push_back(r);
        break;
      }
    }
  }
  return rep;
}

}  // namespace branchlab
