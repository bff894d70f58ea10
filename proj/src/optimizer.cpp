#include "branchlab/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "branchlab/errors.hpp"

namespace branchlab {

const char* move_name(Move m) {
  switch (m) {
    case Move::MergeSiblings: return "merge_siblings";
    case Move::SplitEdge: return "split_edge";
    case Move::RetimeNode: return "retime_node";
    case Move::PruneZero: return "prune_zero";
  }
  return "?";
}

double pattern_energy(const IrrigationPattern& p, const OptimizerConfig& cfg) {
  return full_energy(p, cfg.s, cfg.boundary).total;
}

namespace {

double edge_weight(const IrrigationPattern& p, const Edge& e) {
  double dt = p.nodes[e.to].t - p.nodes[e.from].t;
  if (!(dt > 0.0))
    throw Error(ErrorCode::TimeOutOfRange,
                fmt::format("edge {}->{} has nonpositive duration", e.from, e.to));
  return e.mass / dt;
}

bool atomic_tips(const IrrigationPattern& p, const OptimizerConfig& cfg) {
  if (cfg.boundary.mode == BoundaryMode::Atomic) return true;
  if (cfg.boundary.mode == BoundaryMode::Mollified) return false;
  return std::all_of(p.tips.begin(), p.tips.end(),
                     [](const Tip& t) { return t.kind == TipKind::Atom; });
}

}  // namespace

IrrigationPattern relax_interior(const IrrigationPattern& p) {
  Topology topo(p);
  const std::size_t n = p.nodes.size();
  std::vector<double> A(n, 0.0), B(n, 0.0);
  // Eliminate subtrees bottom-up: each free node carries A x^2 - 2 B x.
  for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
    int v = *it;
    if (topo.tip_of[v] >= 0) continue;
    for (int e : topo.children[v]) {
      const Edge& ed = p.edges[e];
      double w = edge_weight(p, ed);
      int c = ed.to;
      if (topo.tip_of[c] >= 0) {
        A[v] += w;
        B[v] += w * p.nodes[c].x;
      } else if (w + A[c] > 0.0) {
        A[v] += w * A[c] / (w + A[c]);
        B[v] += w * B[c] / (w + A[c]);
      }
    }
  }
  IrrigationPattern out = p;
  for (int v : topo.order) {
    if (topo.tip_of[v] >= 0) continue;
    if (topo.parent[v] < 0) {
      if (A[v] > 0.0) out.nodes[v].x = B[v] / A[v];
      continue;
    }
    const Edge& pe = p.edges[topo.parent[v]];
    double w = edge_weight(p, pe);
    if (w + A[v] > 0.0) out.nodes[v].x = (w * out.nodes[pe.from].x + B[v]) / (w + A[v]);
  }
  return out;
}

std::vector<double> tip_gradient(const IrrigationPattern& p_in, const OptimizerConfig& cfg) {
  IrrigationPattern p = relax_interior(p_in);
  Topology topo(p);
  const double f = p.symmetric ? 2.0 : 1.0;
  std::vector<Atom> atoms;
  atoms.reserve(p.tips.size());
  for (const Tip& tp : p.tips) atoms.push_back({p.nodes[tp.node].x, topo.node_mass[tp.node]});
  std::vector<double> g = hs_gradient(atoms, cfg.s, cfg.boundary.K);
  for (std::size_t j = 0; j < p.tips.size(); ++j) {
    int v = p.tips[j].node;
    g[j] *= f;
    if (topo.parent[v] >= 0) {
      const Edge& e = p.edges[topo.parent[v]];
      g[j] += f * 2.0 * edge_weight(p, e) * (p.nodes[v].x - p.nodes[e.from].x);
    }
  }
  return g;
}

namespace {

// Tip descent with Barzilai-Borwein trial steps and Armijo backtracking.
IrrigationPattern relax_positions_n(const IrrigationPattern& p, const OptimizerConfig& cfg,
                                    int max_steps) {
  double E = pattern_energy(p, cfg);
  IrrigationPattern cur = relax_interior(p);
  double Ec = pattern_energy(cur, cfg);
  if (!(Ec <= E)) {
    cur = p;
    Ec = E;
  }
  if (!atomic_tips(cur, cfg) || cur.tips.empty()) return cur;
  double step = 1e-3;
  std::vector<double> g = tip_gradient(cur, cfg), g_prev, y_prev;
  int stalled = 0;  // consecutive steps gaining at most position_tol
  for (int it = 0; it < max_steps && stalled < 3; ++it) {
    double gn2 = 0.0, gmax = 0.0;
    for (double v : g) {
      gn2 += v * v;
      gmax = std::max(gmax, std::fabs(v));
    }
    if (gmax <= 1e-11) break;
    bool accepted = false;
    while (step > 1e-16) {
      IrrigationPattern trial = cur;
      for (std::size_t j = 0; j < g.size(); ++j) trial.nodes[trial.tips[j].node].x -= step * g[j];
      trial = relax_interior(trial);
      double Et = pattern_energy(trial, cfg);
      if (Et <= Ec - 1e-4 * step * gn2) {
        std::vector<double> g_new = tip_gradient(trial, cfg);
        double sy = 0.0, ss = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          double sj = -step * g[j], yj = g_new[j] - g[j];
          sy += sj * yj;
          ss += sj * sj;
        }
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-3 * step, 1e3 * step) : 2.0 * step;
        stalled = Ec - Et <= cfg.position_tol * std::fabs(Ec) ? stalled + 1 : 0;
        cur = std::move(trial);
        Ec = Et;
        g = std::move(g_new);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return cur;
}

}  // namespace

IrrigationPattern relax_positions(const IrrigationPattern& p, const OptimizerConfig& cfg) {
  return relax_positions_n(p, cfg, cfg.max_gradient_steps);
}

namespace {

// Local energy of node v as a function of its time; convex in t.
struct LocalTime {
  double t_parent, d_parent, m_parent;
  std::vector<double> t_child, d_child, m_child;

  double operator()(double t) const {
    double f = (t - t_parent) + m_parent * d_parent * d_parent / (t - t_parent);
    for (std::size_t i = 0; i < t_child.size(); ++i) {
      double h = t_child[i] - t;
      f += h + m_child[i] * d_child[i] * d_child[i] / h;
    }
    return f;
  }
  double derivative(double t) const {
    double u = t - t_parent;
    double g = 1.0 - m_parent * d_parent * d_parent / (u * u);
    for (std::size_t i = 0; i < t_child.size(); ++i) {
      double h = t_child[i] - t;
      g += -1.0 + m_child[i] * d_child[i] * d_child[i] / (h * h);
    }
    return g;
  }
};

// Bisection on the sign of the derivative; f is convex so this reaches the
// minimizer to rounding, where comparing values would stall near sqrt(eps).
double convex_argmin(const LocalTime& f, double a, double b) {
  for (int i = 0; i < 200 && b - a > 0.0; ++i) {
    double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (f.derivative(m) < 0.0 ? a : b) = m;
  }
  return 0.5 * (a + b);
}

IrrigationPattern retime_sweep(const IrrigationPattern& p) {
  Topology topo(p);
  IrrigationPattern out = p;
  for (int v : topo.order) {
    if (topo.parent[v] < 0 || topo.children[v].empty()) continue;
    const Edge& pe = out.edges[topo.parent[v]];
    LocalTime lt;
    lt.t_parent = out.nodes[pe.from].t;
    lt.d_parent = out.nodes[v].x - out.nodes[pe.from].x;
    lt.m_parent = pe.mass;
    double hi = std::numeric_limits<double>::infinity();
    for (int e : topo.children[v]) {
      const Edge& ce = out.edges[e];
      lt.t_child.push_back(out.nodes[ce.to].t);
      lt.d_child.push_back(out.nodes[ce.to].x - out.nodes[v].x);
      lt.m_child.push_back(ce.mass);
      hi = std::min(hi, out.nodes[ce.to].t);
    }
    double lo = lt.t_parent;
    double margin = 1e-9 * (hi - lo);
    if (!(hi - lo > 4.0 * margin)) continue;
    double t = convex_argmin(lt, lo + margin, hi - margin);
    if (lt(t) < lt(out.nodes[v].t)) out.nodes[v].t = t;
  }
  return out;
}

}  // namespace

IrrigationPattern retime_nodes(const IrrigationPattern& p, const OptimizerConfig& cfg) {
  double E = pattern_energy(p, cfg);
  IrrigationPattern cur = p;
  for (int sweep = 0; sweep < 8; ++sweep) cur = retime_sweep(cur);
  double Ec = pattern_energy(cur, cfg);
  return Ec <= E ? cur : p;
}

IrrigationPattern compact(const IrrigationPattern& p) {
  std::vector<int> used(p.nodes.size(), 0);
  for (const Edge& e : p.edges) used[e.from] = used[e.to] = 1;
  for (const Tip& t : p.tips) used[t.node] = 1;
  std::vector<int> remap(p.nodes.size(), -1);
  IrrigationPattern out;
  out.T = p.T;
  out.symmetric = p.symmetric;
  out.total_mass = p.total_mass;
  for (std::size_t v = 0; v < p.nodes.size(); ++v)
    if (used[v]) remap[v] = out.add_node(p.nodes[v].t, p.nodes[v].x);
  for (const Edge& e : p.edges) out.add_edge(remap[e.from], remap[e.to], e.mass);
  for (const Tip& t : p.tips) out.add_tip(remap[t.node], t.kind, t.width);
  return out;
}

namespace {

struct Candidate {
  Move move;
  std::function<IrrigationPattern(const IrrigationPattern&)> apply;
};

IrrigationPattern merge_children(const IrrigationPattern& p, int e1, int e2) {
  IrrigationPattern q = p;
  Edge a = q.edges[e1], b = q.edges[e2];
  double t_end = std::min(q.nodes[a.to].t, q.nodes[b.to].t);
  double t0 = q.nodes[a.from].t;
  double m = a.mass + b.mass;
  double x = (a.mass * q.nodes[a.to].x + b.mass * q.nodes[b.to].x) / m;
  int z = q.add_node(t0 + 0.5 * (t_end - t0), x);
  q.edges[e1] = {a.from, z, m};
  q.edges[e2] = {z, b.to, b.mass};
  q.add_edge(z, a.to, a.mass);
  return q;
}

IrrigationPattern merge_roots(const IrrigationPattern& p, const Topology& topo, int r1, int r2) {
  IrrigationPattern q = p;
  double m1 = topo.node_mass[r1], m2 = topo.node_mass[r2];
  double x = (m1 * p.nodes[r1].x + m2 * p.nodes[r2].x) / (m1 + m2);
  double t_end = p.T;
  for (int r : {r1, r2})
    for (int e : topo.children[r]) t_end = std::min(t_end, p.nodes[p.edges[e].to].t);
  int root = q.add_node(0.0, x);
  int fork = q.add_node(0.5 * t_end, x);
  q.add_edge(root, fork, m1 + m2);
  for (int r : {r1, r2})
    for (int e : topo.children[r]) q.edges[e].from = fork;
  return compact(q);
}

IrrigationPattern detach_child(const IrrigationPattern& p, const Topology& topo, int z, int e) {
  IrrigationPattern q = p;
  const double m = q.edges[e].mass;
  if (topo.parent[z] < 0) {
    int root = q.add_node(0.0, q.nodes[q.edges[e].to].x);
    q.edges[e].from = root;
    return q;
  }
  // walk the mass of edge e up one level: it now leaves from z's parent
  int pe = topo.parent[z];
  q.edges[pe].mass -= m;
  q.edges[e].from = q.edges[pe].from;
  return q;
}

IrrigationPattern prune_zero(const IrrigationPattern& p, double tol) {
  Topology topo(p);
  std::vector<char> dead_node(p.nodes.size(), 0);
  std::vector<char> dead_edge(p.edges.size(), 0);
  for (int v : topo.order) {
    int pe = topo.parent[v];
    if (pe >= 0 && (dead_node[p.edges[pe].from] || p.edges[pe].mass <= tol)) {
      dead_node[v] = 1;
      dead_edge[pe] = 1;
    }
  }
  IrrigationPattern q = p;
  q.edges.clear();
  q.tips.clear();
  for (std::size_t e = 0; e < p.edges.size(); ++e)
    if (!dead_edge[e]) q.edges.push_back(p.edges[e]);
  for (const Tip& t : p.tips)
    if (!dead_node[t.node]) q.tips.push_back(t);
  return compact(q);
}

std::vector<Candidate> candidates(const IrrigationPattern& p, const OptimizerConfig& cfg) {
  std::vector<Candidate> out;
  Topology topo(p);
  if (cfg.moves.count(Move::MergeSiblings)) {
    for (std::size_t v = 0; v < p.nodes.size(); ++v) {
      auto ch = topo.children[v];
      if (ch.size() < 2) continue;
      std::sort(ch.begin(), ch.end(), [&](int a, int b) {
        return p.nodes[p.edges[a].to].x < p.nodes[p.edges[b].to].x;
      });
      for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
        int a = ch[i], b = ch[i + 1];
        out.push_back({Move::MergeSiblings,
                       [a, b](const IrrigationPattern& q) { return merge_children(q, a, b); }});
      }
    }
    auto roots = topo.roots;
    std::sort(roots.begin(), roots.end(),
              [&](int a, int b) { return p.nodes[a].x < p.nodes[b].x; });
    for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
      int a = roots[i], b = roots[i + 1];
      out.push_back({Move::MergeSiblings, [a, b](const IrrigationPattern& q) {
                       return merge_roots(q, Topology(q), a, b);
                     }});
    }
  }
  if (cfg.moves.count(Move::SplitEdge)) {
    for (std::size_t v = 0; v < p.nodes.size(); ++v) {
      if (topo.children[v].size() < 2) continue;
      for (int e : topo.children[v]) {
        int z = static_cast<int>(v);
        out.push_back({Move::SplitEdge, [z, e](const IrrigationPattern& q) {
                         return detach_child(q, Topology(q), z, e);
                       }});
      }
    }
  }
  if (cfg.moves.count(Move::PruneZero)) {
    bool any = std::any_of(p.edges.begin(), p.edges.end(),
                           [&](const Edge& e) { return e.mass <= 1e-14 * p.total_mass; });
    if (any)
      out.push_back({Move::PruneZero, [](const IrrigationPattern& q) {
                       return prune_zero(q, 1e-14 * q.total_mass);
                     }});
  }
  return out;
}

// Removes interior nodes with exactly one incoming and one outgoing edge;
// the joined straight edge is never worse kinetically and P is unchanged.
IrrigationPattern collapse_passthrough(const IrrigationPattern& p) {
  Topology topo(p);
  IrrigationPattern q = p;
  std::vector<char> drop(p.edges.size(), 0);
  bool any = false;
  for (int v : topo.order) {
    if (topo.parent[v] < 0 || topo.tip_of[v] >= 0 || topo.children[v].size() != 1) continue;
    int in = topo.parent[v], out = topo.children[v][0];
    // the incoming edge may already have been re-sourced by an earlier collapse
    q.edges[out].from = q.edges[in].from;
    drop[in] = 1;
    any = true;
  }
  if (!any) return p;
  IrrigationPattern r = q;
  r.edges.clear();
  for (std::size_t e = 0; e < q.edges.size(); ++e)
    if (!drop[e]) r.edges.push_back(q.edges[e]);
  return compact(r);
}

// Alternating position and time relaxation until the relative decrease
// stalls. Returns the pattern and its energy.
std::pair<IrrigationPattern, double> polish(IrrigationPattern p, const OptimizerConfig& cfg,
                                            int rounds, bool retime, int steps) {
  double E = pattern_energy(p, cfg);
  {
    IrrigationPattern c = relax_interior(collapse_passthrough(p));
    double Ecl = pattern_energy(c, cfg);
    if (Ecl <= E) {
      p = std::move(c);
      E = Ecl;
    }
  }
  for (int i = 0; i < rounds; ++i) {
    IrrigationPattern q = relax_positions_n(p, cfg, steps);
    if (retime) q = retime_nodes(q, cfg);
    double Eq = pattern_energy(q, cfg);
    if (!(Eq <= E)) break;
    bool stalled = E - Eq <= 1e-15 * std::fabs(E);
    p = std::move(q);
    E = Eq;
    if (stalled) break;
  }
  return {std::move(p), E};
}

}  // namespace

OptimizationTrace optimize_from(const IrrigationPattern& seed, const OptimizerConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  if (!(cfg.position_tol > 0.0)) throw Error(ErrorCode::InvalidScale, "position_tol must be positive");
  check_structure(seed);
  OptimizationTrace tr;
  const bool retime = cfg.moves.count(Move::RetimeNode) > 0;
  IrrigationPattern cur = seed;
  double E = pattern_energy(cur, cfg);
  tr.seed_energy = E;
  tr.iterations.push_back({full_energy(cur, cfg.s, cfg.boundary), "seed"});
  auto record = [&](const std::string& what) {
    tr.iterations.push_back({full_energy(cur, cfg.s, cfg.boundary), what});
  };
  {
    auto [q, Eq] = polish(cur, cfg, 200, retime, cfg.max_gradient_steps);
    if (Eq < E) {
      cur = std::move(q);
      E = Eq;
      record(retime ? "relax+retime" : "relax");
    }
  }
  std::mt19937_64 rng(cfg.rng_seed);
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    auto cands = candidates(cur, cfg);
    std::shuffle(cands.begin(), cands.end(), rng);
    bool improved = false;
    for (const auto& c : cands) {
      IrrigationPattern q;
      try {
        q = c.apply(cur);
        check_structure(q);
      } catch (const Error&) {
        continue;
      }
      auto [r, Er] = polish(std::move(q), cfg, 6, retime, 40);
      if (Er < E - cfg.position_tol * std::fabs(E)) {
        cur = std::move(r);
        E = Er;
        record(move_name(c.move));
        improved = true;
        break;
      }
    }
    if (!improved) {
      tr.converged = true;
      break;
    }
  }
  {
    auto [q, Eq] = polish(cur, cfg, 2000, retime, cfg.max_gradient_steps);
    if (Eq < E) {
      cur = std::move(q);
      E = Eq;
      record("final_polish");
    }
  }
  tr.final_pattern = cur;
  tr.equipartition_residual = equipartition(cur).residual;
  tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return tr;
}

OptimizationTrace topology_search(const OptimizerConfig& cfg) {
  if (cfg.restarts.empty()) throw Error(ErrorCode::NoSeeds, "no seed constructions");
  std::vector<std::future<OptimizationTrace>> jobs;
  for (std::size_t i = 0; i < cfg.restarts.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&cfg, i] {
      auto tr = optimize_from(build_construction(cfg.restarts[i], cfg.T), cfg);
      tr.seed_index = static_cast<int>(i);
      return tr;
    }));
  }
  OptimizationTrace best;
  double bestE = std::numeric_limits<double>::infinity();
  for (auto& j : jobs) {
    OptimizationTrace tr = j.get();
    double e = tr.iterations.back().energy.total;
    if (e < bestE) {
      bestE = e;
      best = std::move(tr);
    }
  }
  return best;
}

}  // namespace branchlab
