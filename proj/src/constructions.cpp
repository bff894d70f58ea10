#include "branchlab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <climits>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "branchlab/errors.hpp"

namespace branchlab {
namespace {

constexpr double kSplitTol = 1e-12;

double piece_lo(const TargetPiece& q) { return q.x - 0.5 * q.width; }
double piece_hi(const TargetPiece& q) { return q.x + 0.5 * q.width; }

double mass_of(const std::vector<TargetPiece>& v) {
  double s = 0.0;
  for (const auto& q : v) s += q.m;
  return s;
}

double barycenter_of(const std::vector<TargetPiece>& v) {
  double s = 0.0, m = 0.0;
  for (const auto& q : v) {
    s += q.m * q.x;
    m += q.m;
  }
  return s / m;
}

// Splits pieces at `mid`; atoms on the cut go left, blocks are cut with
// masses proportional to length.
void split_pieces(const std::vector<TargetPiece>& in, double mid, std::vector<TargetPiece>& left,
                  std::vector<TargetPiece>& right) {
  for (const auto& q : in) {
    if (q.width <= 0.0) {
      (q.x <= mid ? left : right).push_back(q);
      continue;
    }
    double lo = piece_lo(q), hi = piece_hi(q);
    if (hi <= mid + kSplitTol) {
      left.push_back(q);
    } else if (lo >= mid - kSplitTol) {
      right.push_back(q);
    } else {
      double ml = q.m * (mid - lo) / (hi - lo);
      left.push_back({0.5 * (lo + mid), ml, mid - lo});
      right.push_back({0.5 * (mid + hi), q.m - ml, hi - mid});
    }
  }
}

void add_leaf(IrrigationPattern& p, int from, double t, const TargetPiece& q) {
  int leaf = p.add_node(t, q.x);
  p.add_edge(from, leaf, q.m);
  if (q.width > 0.0)
    p.add_tip(leaf, TipKind::Block, q.width);
  else
    p.add_tip(leaf, TipKind::Atom);
}

struct Refiner {
  IrrigationPattern& p;
  double t0, eps, x_minus;
  const DyadicOptions& opt;

  double level_time(int k) const { return t0 + eps * (1.0 - 0.5 * std::pow(opt.delta, k)); }
  double level_pos(int k, double bary) const {
    double f = 1.0 - 0.5 * std::pow(opt.delta, k);
    return (1.0 - f) * x_minus + f * bary;
  }

  void refine(int node, int k, double a, double b, const std::vector<TargetPiece>& cell) {
    const double tend = t0 + eps;
    if (cell.size() == 1 && cell[0].width <= 0.0) {
      add_leaf(p, node, tend, cell[0]);
      return;
    }
    if (k >= opt.depth || (b - a) < opt.min_width) {
      for (const auto& q : cell) add_leaf(p, node, tend, q);
      return;
    }
    const double mid = 0.5 * (a + b);
    std::vector<TargetPiece> halves[2];
    split_pieces(cell, mid, halves[0], halves[1]);
    const double bounds[2][2] = {{a, mid}, {mid, b}};
    for (int h = 0; h < 2; ++h) {
      if (halves[h].empty()) continue;
      double m = mass_of(halves[h]);
      if (!(m > 0.0)) continue;
      int child = p.add_node(level_time(k + 1), level_pos(k + 1, barycenter_of(halves[h])));
      p.add_edge(node, child, m);
      refine(child, k + 1, bounds[h][0], bounds[h][1], halves[h]);
    }
  }
};

}  // namespace

double w2_from_atom(double x, const std::vector<TargetPiece>& target) {
  double s = 0.0;
  for (const auto& q : target) s += q.m * ((q.x - x) * (q.x - x) + q.width * q.width / 12.0);
  return s;
}

void append_dyadic(IrrigationPattern& p, int start, double t0, double eps, double x_minus,
                   std::vector<TargetPiece> target, const DyadicOptions& opt) {
  if (!(opt.delta > 0.25 && opt.delta < 0.5))
    throw Error(ErrorCode::InvalidDelta, fmt::format("delta={} outside (1/4, 1/2)", opt.delta));
  if (opt.depth < 1) throw Error(ErrorCode::InvalidScale, "depth must be positive");
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidScale, "eps must be positive");
  if (target.empty()) throw Error(ErrorCode::EmptyMeasure, "empty target");
  std::sort(target.begin(), target.end(),
            [](const TargetPiece& a, const TargetPiece& b) { return a.x < b.x; });
  if (target.size() == 1 && target[0].width <= 0.0) {
    add_leaf(p, start, t0 + eps, target[0]);
    return;
  }
  double lo = piece_lo(target.front()), hi = piece_hi(target.front());
  for (const auto& q : target) {
    lo = std::min(lo, piece_lo(q));
    hi = std::max(hi, piece_hi(q));
  }
  Refiner ref{p, t0, eps, x_minus, opt};
  int root = p.add_node(ref.level_time(0), ref.level_pos(0, barycenter_of(target)));
  p.add_edge(start, root, mass_of(target));
  ref.refine(root, 0, lo, hi, target);
}

DyadicResult dyadic_branch(double x_minus, const std::vector<TargetPiece>& target, double eps,
                           const DyadicOptions& opt) {
  DyadicResult r;
  const double phi = mass_of(target);
  r.pattern.T = eps;
  r.pattern.symmetric = false;
  r.pattern.total_mass = phi;
  int start = r.pattern.add_node(0.0, x_minus);
  append_dyadic(r.pattern, start, 0.0, eps, x_minus, target, opt);
  r.I = internal_energy(r.pattern, 0.0, eps).total();
  r.w2 = w2_from_atom(x_minus, target);
  double lo = piece_lo(target.front()), hi = piece_hi(target.front());
  for (const auto& q : target) {
    lo = std::min(lo, piece_lo(q));
    hi = std::max(hi, piece_hi(q));
  }
  r.radius = 0.5 * (hi - lo);
  r.bound_rhs = r.w2 / eps + r.radius * r.radius * phi / eps + eps;
  return r;
}

DyadicResult dyadic_branch_uniform(double x_minus, double phi, double center, double r, double eps,
                                   const DyadicOptions& opt) {
  if (r <= 0.0) return dyadic_branch(x_minus, {{center, phi, 0.0}}, eps, opt);
  return dyadic_branch(x_minus, {{center, phi, 2.0 * r}}, eps, opt);
}

namespace {

void check_grid(int N, double r) {
  if (N < 1) throw Error(ErrorCode::InvalidScale, "N must be positive");
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidScale, "r must be positive");
  if (r > 1.0 / N * (1.0 + 1e-12))
    throw Error(ErrorCode::OverlappingBlocks, fmt::format("r={} exceeds 1/N={}", r, 1.0 / N));
}

// One cell of the uniform grid, appended to p.
void append_cell(IrrigationPattern& p, int i, int N, double r, double T,
                 const UniformGridOptions& opt) {
  const double c = (i + 0.5) / N;
  const double eb = (opt.eps_b <= 0.0 || opt.eps_b >= T) ? T : opt.eps_b;
  int start = p.add_node(0.0, c);
  if (eb < T) {
    int trunk = p.add_node(T - eb, c);
    p.add_edge(start, trunk, 1.0 / N);
    start = trunk;
  }
  append_dyadic(p, start, T - eb, eb, c, {{c, 1.0 / N, std::min(r, 1.0 / N)}}, opt.dyadic);
}

}  // namespace

IrrigationPattern uniform_grid(int N, double r, double T, const UniformGridOptions& opt) {
  check_grid(N, r);
  IrrigationPattern p;
  p.T = T;
  for (int i = 0; i < N; ++i) append_cell(p, i, N, r, T, opt);
  return p;
}

GlobalBoundTerms uniform_grid_prediction(int N, double r, double T, double s) {
  return {T * N, r * r / T, 1.0 / (N * std::pow(r, 1.0 - 2.0 * s))};
}

EnergyBreakdown uniform_grid_energy(int N, double r, double T, double s, int K,
                                    const UniformGridOptions& opt) {
  check_grid(N, r);
  IrrigationPattern cell;
  cell.T = T;
  cell.total_mass = 1.0 / N;
  append_cell(cell, 0, N, r, T, opt);
  InternalEnergy ie = internal_energy(cell, 0.0, T);
  // The tip measure is a comb: only k = nN survive, with |sigma_k| = sinc(pi k w).
  const double w = std::min(r, 1.0 / N);
  const double Nw = N * w;
  EnergyBreakdown e;
  e.perimeter = 2.0 * N * ie.P;
  e.kinetic = 2.0 * N * ie.Ekin;
  const double Npow = std::pow(static_cast<double>(N), -2.0 * s);
  e.boundary.K = static_cast<int>(std::min<long long>(static_cast<long long>(K) * N, INT_MAX));
  if (std::fabs(Nw - 1.0) > 1e-15) {
    double sum = 0.0;
    for (int n = K; n >= 1; --n) {
      double a = std::numbers::pi * n * Nw;
      double sc = std::sin(a) / a;
      sum += std::pow(static_cast<double>(n), -2.0 * s) * sc * sc;
    }
    e.boundary.truncated = 2.0 * Npow * sum;
    double tail = Npow / (std::numbers::pi * std::numbers::pi * Nw * Nw) * zeta_tail(K, 2.0 * s + 2.0);
    e.boundary.tail_bound = 2.0 * tail;
    e.boundary.value = e.boundary.truncated + tail;
  }
  e.boundary_penalty = 2.0 * e.boundary.value;
  e.total = e.perimeter + e.kinetic + e.boundary_penalty;
  return e;
}

IrrigationPattern dirac_grid(int N, double T) {
  if (N < 1) throw Error(ErrorCode::InvalidScale, "N must be positive");
  IrrigationPattern p;
  p.T = T;
  for (int i = 0; i < N; ++i) {
    double c = (i + 0.5) / N;
    int a = p.add_node(0.0, c);
    int b = p.add_node(T, c);
    p.add_edge(a, b, 1.0 / N);
    p.add_tip(b, TipKind::Atom);
  }
  return p;
}

double CoveringResult::excess() const { return I - w2 / eps; }

Cover vitali_cover(const std::vector<std::pair<double, double>>& support, double r) {
  Cover cv;
  if (support.empty()) return cv;
  // Leftmost point first; the next center is the first support point at
  // distance >= 2r, so the r-balls are disjoint and the 2r-balls cover.
  double next = support.front().first;
  for (const auto& [lo, hi] : support) {
    if (hi < next) continue;
    double c = std::max(lo, next);
    while (c <= hi) {
      cv.centers.push_back(c);
      next = c + 2.0 * r;
      c = next;
    }
  }
  const std::size_t n = cv.centers.size();
  for (std::size_t i = 0; i < n; ++i) {
    double c = cv.centers[i];
    double lo = c - 5.0 * r, hi = c + 5.0 * r;
    if (i > 0) lo = std::max(lo, 0.5 * (cv.centers[i - 1] + c));
    if (i + 1 < n) hi = std::min(hi, 0.5 * (c + cv.centers[i + 1]));
    cv.intervals.push_back({lo, hi});
  }
  return cv;
}

IrrigationPattern split_edges_at(const IrrigationPattern& p, double t) {
  IrrigationPattern out = p;
  out.edges.clear();
  for (const Edge& e : p.edges) {
    double a = p.nodes[e.from].t, b = p.nodes[e.to].t;
    if (a < t && t < b) {
      int mid = out.add_node(t, p.edge_pos(e, t));
      out.add_edge(e.from, mid, e.mass);
      out.add_edge(mid, e.to, e.mass);
    } else {
      out.add_edge(e.from, e.to, e.mass);
    }
  }
  return out;
}

namespace {

// Tip pieces of each node's subtree, sorted by position.
std::vector<TargetPiece> subtree_pieces(const IrrigationPattern& p, const Topology& topo, int v) {
  std::vector<TargetPiece> out;
  std::vector<int> stack{v};
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    if (topo.tip_of[u] >= 0) {
      const Tip& tp = p.tips[topo.tip_of[u]];
      out.push_back({p.nodes[u].x, topo.node_mass[u], tp.kind == TipKind::Block ? tp.width : 0.0});
    }
    for (int e : topo.children[u]) stack.push_back(p.edges[e].to);
  }
  std::sort(out.begin(), out.end(),
            [](const TargetPiece& a, const TargetPiece& b) { return a.x < b.x; });
  return out;
}

// Restriction of pieces to [lo, hi); blocks are cut.
std::vector<TargetPiece> restrict_pieces(const std::vector<TargetPiece>& in, double lo, double hi,
                                         bool last) {
  std::vector<TargetPiece> a, b, c, d;
  split_pieces(in, lo, a, b);  // a: <= lo
  // atoms exactly at lo belong to this interval
  for (const auto& q : a)
    if (q.width <= 0.0 && q.x == lo) c.push_back(q);
  std::vector<TargetPiece> keep;
  split_pieces(b, hi, keep, d);
  for (const auto& q : keep)
    if (!(q.width <= 0.0 && q.x == hi && !last)) c.push_back(q);
  for (const auto& q : d)
    if (last && q.width <= 0.0 && q.x == hi) c.push_back(q);
  return c;
}

}  // namespace

CoveringResult covering_competitor(const IrrigationPattern& p_in, double eps, double alpha,
                                   double M) {
  if (!(eps > 0.0 && eps <= p_in.T)) throw Error(ErrorCode::TimeOutOfRange, "eps outside (0, T]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidScale, "alpha outside (0, 1]");
  auto mono = validate(p_in, {Check::MonotoneCoupling});
  if (!mono.all_passed()) throw Error(ErrorCode::NotMonotone, mono.results[0].witness);

  const double tc = p_in.T - eps;
  IrrigationPattern p = split_edges_at(p_in, tc);
  Topology topo(p);

  CoveringResult res;
  res.eps = eps;
  res.r = std::pow(eps, 2.0 / (2.0 + alpha));

  // support of mu_T as sorted intervals
  std::vector<TargetPiece> all;
  for (int root : topo.roots) {
    auto v = subtree_pieces(p, topo, root);
    all.insert(all.end(), v.begin(), v.end());
  }
  std::sort(all.begin(), all.end(),
            [](const TargetPiece& a, const TargetPiece& b) { return a.x < b.x; });
  std::vector<std::pair<double, double>> support;
  for (const auto& q : all) support.push_back({piece_lo(q), piece_hi(q)});
  Cover cover = vitali_cover(support, res.r);
  res.intervals = static_cast<int>(cover.intervals.size());

  IrrigationPattern out;
  out.T = p.T;
  out.symmetric = p.symmetric;
  out.total_mass = p.total_mass;
  std::map<int, int> remap;
  auto copy_node = [&](int v) {
    auto it = remap.find(v);
    if (it != remap.end()) return it->second;
    int id = out.add_node(p.nodes[v].t, p.nodes[v].x);
    remap[v] = id;
    return id;
  };
  // keep everything up to T - eps
  for (std::size_t v = 0; v < p.nodes.size(); ++v)
    if (p.nodes[v].t <= tc) copy_node(static_cast<int>(v));
  for (const Edge& e : p.edges)
    if (p.nodes[e.to].t <= tc) out.add_edge(remap.at(e.from), remap.at(e.to), e.mass);

  for (const Edge& e : p.edges) {
    // after splitting, every edge alive after tc starts at or before tc
    if (!(p.nodes[e.from].t <= tc && p.nodes[e.to].t > tc)) continue;
    const int start = remap.at(e.from);
    const double x = p.nodes[e.from].x;
    auto pieces = subtree_pieces(p, topo, e.to);
    for (std::size_t i = 0; i < cover.intervals.size(); ++i) {
      auto [lo, hi] = cover.intervals[i];
      if (i == 0) lo = -std::numeric_limits<double>::infinity();
      if (i + 1 == cover.intervals.size()) hi = std::numeric_limits<double>::infinity();
      auto part = restrict_pieces(pieces, lo, hi, i + 1 == cover.intervals.size());
      if (part.empty() || !(mass_of(part) > 0.0)) continue;
      res.w2 += w2_from_atom(x, part);
      append_dyadic(out, start, tc, eps, x, part, DyadicOptions{});
      ++res.fragments;
    }
  }
  res.I = internal_energy(out, tc, out.T).total();
  res.bound_rhs = res.w2 / eps + res.r * res.r / eps + std::pow(res.r, -alpha) * eps / M;
  res.pattern = std::move(out);
  return res;
}

IrrigationPattern shrink_competitor(const IrrigationPattern& p_in, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidScale, "eps must be positive");
  const double tc = std::max(0.0, p_in.T - eps);
  IrrigationPattern p = split_edges_at(p_in, tc);
  Topology topo(p);
  // anchor[v] = position at tc of the line through v
  std::vector<double> anchor(p.nodes.size(), 0.0);
  for (int v : topo.order) {
    if (p.nodes[v].t <= tc)
      anchor[v] = p.nodes[v].x;
    else
      anchor[v] = anchor[p.edges[topo.parent[v]].from];
  }
  IrrigationPattern out = p;
  for (std::size_t v = 0; v < p.nodes.size(); ++v)
    if (p.nodes[v].t > tc) out.nodes[v].x = 0.5 * (anchor[v] + p.nodes[v].x);
  for (Tip& tp : out.tips)
    if (tp.kind == TipKind::Block) tp.width *= 0.5;
  return out;
}

IrrigationPattern shift_competitor(const IrrigationPattern& p_in, double eps, double eta) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidScale, "eps must be positive");
  if (!(eta >= 0.0 && eta < 0.5)) throw Error(ErrorCode::InvalidScale, "eta outside [0, 1/2)");
  if (eta == 0.0) return p_in;
  const double tc = std::max(0.0, p_in.T - eps);
  IrrigationPattern p = split_edges_at(p_in, tc);
  Topology topo(p);
  IrrigationPattern out;
  out.T = p.T;
  out.symmetric = p.symmetric;
  out.total_mass = p.total_mass;
  std::vector<int> keep(p.nodes.size(), -1);
  for (std::size_t v = 0; v < p.nodes.size(); ++v)
    if (p.nodes[v].t <= tc) keep[v] = out.add_node(p.nodes[v].t, p.nodes[v].x);
  for (const Edge& e : p.edges)
    if (p.nodes[e.to].t <= tc) out.add_edge(keep[e.from], keep[e.to], e.mass);
  const double speed = eta / eps;
  // copy the forward subtree below edge e with drift sign*speed and half mass
  auto copy_subtree = [&](int e0, double sign) {
    std::vector<std::pair<int, int>> stack{{e0, keep[p.edges[e0].from]}};
    while (!stack.empty()) {
      auto [e, from] = stack.back();
      stack.pop_back();
      int v = p.edges[e].to;
      int nv = out.add_node(p.nodes[v].t, p.nodes[v].x + sign * speed * (p.nodes[v].t - tc));
      out.add_edge(from, nv, 0.5 * p.edges[e].mass);
      if (topo.tip_of[v] >= 0) {
        const Tip& tp = p.tips[topo.tip_of[v]];
        out.add_tip(nv, tp.kind, tp.width);
      }
      for (int c : topo.children[v]) stack.push_back({c, nv});
    }
  };
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const Edge& ed = p.edges[e];
    if (p.nodes[ed.from].t <= tc && p.nodes[ed.to].t > tc) {
      copy_subtree(static_cast<int>(e), -1.0);
      copy_subtree(static_cast<int>(e), 1.0);
    }
  }
  return out;
}

const char* construction_name(ConstructionKind k) {
  switch (k) {
    case ConstructionKind::UniformGrid: return "uniform_grid";
    case ConstructionKind::DiracGrid: return "dirac_grid";
    case ConstructionKind::DyadicBranch: return "dyadic_branch";
    case ConstructionKind::Covering: return "covering";
    case ConstructionKind::Shrink: return "shrink";
    case ConstructionKind::Shift: return "shift";
  }
  return "?";
}

ConstructionKind parse_construction(const std::string& name) {
  for (auto k : {ConstructionKind::UniformGrid, ConstructionKind::DiracGrid,
                 ConstructionKind::DyadicBranch, ConstructionKind::Covering,
                 ConstructionKind::Shrink, ConstructionKind::Shift})
    if (name == construction_name(k)) return k;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown construction '{}'", name));
}

IrrigationPattern build_construction(const ConstructionSpec& spec, double T) {
  auto base = [&] {
    if (spec.r > 0.0) {
      UniformGridOptions o;
      o.eps_b = spec.eps_b;
      o.dyadic = spec.dyadic;
      return uniform_grid(spec.N, spec.r, T, o);
    }
    return dirac_grid(spec.N, T);
  };
  switch (spec.kind) {
    case ConstructionKind::UniformGrid: {
      UniformGridOptions o;
      o.eps_b = spec.eps_b;
      o.dyadic = spec.dyadic;
      return uniform_grid(spec.N, spec.r, T, o);
    }
    case ConstructionKind::DiracGrid:
      return dirac_grid(spec.N, T);
    case ConstructionKind::DyadicBranch:
      return dyadic_branch_uniform(0.5, 1.0, 0.5, spec.r, spec.eps, spec.dyadic).pattern;
    case ConstructionKind::Covering:
      return covering_competitor(base(), spec.eps, spec.alpha).pattern;
    case ConstructionKind::Shrink:
      return shrink_competitor(base(), spec.eps);
    case ConstructionKind::Shift:
      return shift_competitor(base(), spec.eps, spec.eta);
  }
  throw Error(ErrorCode::ConfigError, "unhandled construction");
}

}  // namespace branchlab
