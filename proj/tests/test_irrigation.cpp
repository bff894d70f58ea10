#include <doctest.h>

#include <cmath>

#include "branchlab/errors.hpp"
#include "branchlab/irrigation.hpp"
#include "branchlab/json_io.hpp"
#include "branchlab/transport.hpp"
#include "oracles.hpp"

using namespace branchlab;

namespace {

IrrigationPattern static_branch(double x = 0.5, double T = 1.0) {
  IrrigationPattern p;
  p.T = T;
  int a = p.add_node(0.0, x), b = p.add_node(T, x);
  p.add_edge(a, b, 1.0);
  p.add_tip(b, TipKind::Atom);
  return p;
}

IrrigationPattern v_pattern() {
  IrrigationPattern p;
  p.T = 1.0;
  int r = p.add_node(0.0, 0.5), l = p.add_node(1.0, 0.4), q = p.add_node(1.0, 0.6);
  p.add_edge(r, l, 0.5);
  p.add_edge(r, q, 0.5);
  p.add_tip(l, TipKind::Atom);
  p.add_tip(q, TipKind::Atom);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

double two_zeta(double a) { return oracle::equispaced_atoms_norm(1, a / 2.0); }

}  // namespace

TEST_CASE("slice examples") {
  auto p = static_branch();
  for (double t : {0.0, 0.3, 1.0}) {
    SliceResult s = slice(p, t);
    REQUIRE(s.measure.size() == 1);
    CHECK(s.measure.atoms()[0].x == 0.5);
  }
  SliceResult v = slice(v_pattern(), 0.5);
  REQUIRE(v.measure.size() == 2);
  CHECK(v.measure.atoms()[0].x == doctest::Approx(0.45));
  CHECK(v.measure.atoms()[0].m == 0.5);
  CHECK(v.measure.atoms()[1].x == doctest::Approx(0.55));
  SliceResult root = slice(v_pattern(), 0.0);
  REQUIRE(root.measure.size() == 1);
  CHECK(root.measure.atoms()[0].m == 1.0);
  CHECK(code_of([] { slice(static_branch(), 1.5); }) == ErrorCode::TimeOutOfRange);
  CHECK(code_of([] { slice(static_branch(), -0.1); }) == ErrorCode::TimeOutOfRange);
}

TEST_CASE("slice mass is one on random forests") {
  oracle::Gen g(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = g.forest(g.integer(1, 3), g.uniform(0.1, 2.0), 4);
    CHECK_NOTHROW(check_structure(p));
    for (int i = 0; i < 100; ++i) {
      SliceResult s = slice(p, g.uniform(0.0, p.T));
      CHECK(s.measure.total_mass() == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("internal energy examples") {
  auto s = internal_energy(static_branch(), 0.0, 1.0);
  CHECK(s.P == 1.0);
  CHECK(s.Ekin == 0.0);
  auto v = internal_energy(v_pattern(), 0.0, 1.0);
  CHECK(v.P == doctest::Approx(2.0));
  CHECK(v.Ekin == doctest::Approx(0.01).epsilon(1e-12));
  IrrigationPattern two;
  for (double x : {0.25, 0.75}) {
    int a = two.add_node(0.0, x), b = two.add_node(1.0, x);
    two.add_edge(a, b, 0.5);
    two.add_tip(b, TipKind::Atom);
  }
  auto t = internal_energy(two, 0.0, 1.0);
  CHECK(t.P == 2.0);
  CHECK(t.Ekin == 0.0);
  CHECK(code_of([] { internal_energy(static_branch(), 0.5, 0.2); }) == ErrorCode::TimeOutOfRange);
  CHECK(code_of([] { internal_energy(static_branch(), 0.0, 2.0); }) == ErrorCode::TimeOutOfRange);
}

TEST_CASE("internal energy additivity and Benamou-Brenier") {
  oracle::Gen g(17);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = g.forest(g.integer(1, 3), 1.0, 4);
    for (int i = 0; i < 10; ++i) {
      double a = g.uniform(0, 0.5), b = g.uniform(0.5, 0.8), c = g.uniform(0.8, 1.0);
      auto ac = internal_energy(p, a, c), ab = internal_energy(p, a, b), bc = internal_energy(p, b, c);
      CHECK(ac.P == doctest::Approx(ab.P + bc.P).epsilon(1e-12));
      CHECK(ac.Ekin == doctest::Approx(ab.Ekin + bc.Ekin).epsilon(1e-12));
      double w2 = w2_line(slice(p, a).measure, slice(p, b).measure).cost_sq;
      CHECK(ab.Ekin >= w2 / (b - a) - 1e-9);
    }
  }
}

TEST_CASE("full energy examples") {
  BoundaryOptions atomic{BoundaryMode::Atomic, 100000, 0.01};
  auto e = full_energy(static_branch(), 0.75, atomic);
  CHECK(e.perimeter == doctest::Approx(2.0));
  CHECK(e.kinetic == 0.0);
  CHECK(e.boundary_penalty == doctest::Approx(2.0 * two_zeta(1.5)).epsilon(1e-6));
  CHECK(e.total == e.perimeter + e.kinetic + e.boundary_penalty);

  for (int N : {2, 3, 5}) {
    IrrigationPattern p;
    p.T = 0.3;
    for (int i = 0; i < N; ++i) {
      int a = p.add_node(0.0, (i + 0.5) / N), b = p.add_node(0.3, (i + 0.5) / N);
      p.add_edge(a, b, 1.0 / N);
      p.add_tip(b, TipKind::Atom);
    }
    auto f = full_energy(p, 0.8, atomic);
    CHECK(f.total == doctest::Approx(2 * 0.3 * N + 2 * oracle::equispaced_atoms_norm(N, 0.8)).epsilon(1e-6));
  }

  IrrigationPattern blocks;
  for (int i = 0; i < 4; ++i) {
    int a = blocks.add_node(0.0, (i + 0.5) / 4), b = blocks.add_node(1.0, (i + 0.5) / 4);
    blocks.add_edge(a, b, 0.25);
    blocks.add_tip(b, TipKind::Block, 0.25);
  }
  CHECK(full_energy(blocks, 0.4, BoundaryOptions{BoundaryMode::Block, 4096, 0.01}).boundary_penalty
        == doctest::Approx(0.0).scale(1.0));
  CHECK(code_of([] { full_energy(static_branch(), 0.5, BoundaryOptions{BoundaryMode::Atomic, 1024, 0.01}); })
        == ErrorCode::DivergentBoundaryNorm);
  // mollified boundary is finite for any s
  auto m = full_energy(static_branch(), 0.3, BoundaryOptions{BoundaryMode::Mollified, 4096, 0.05});
  CHECK(std::isfinite(m.total));
}

TEST_CASE("subsystem examples") {
  auto v = v_pattern();
  auto whole = subsystem(v, 0);
  CHECK(whole.edges.size() == 2);
  CHECK(internal_energy(whole, 0, 1).Ekin == doctest::Approx(internal_energy(v, 0, 1).Ekin));
  auto left = subsystem(v, 1);
  REQUIRE(left.edges.size() == 1);
  CHECK(left.edges[0].mass == 0.5);
  CHECK(left.total_mass == 0.5);
  CHECK(left.tips.size() == 1);
  CHECK(code_of([&] { subsystem(v, 7); }) == ErrorCode::NodeNotFound);

  // disjoint roots split the energy exactly
  oracle::Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = g.forest(2, 1.0, 3);
    Topology topo(p);
    REQUIRE(topo.roots.size() == 2);
    auto a = internal_energy(subsystem(p, topo.roots[0]), 0, 1);
    auto b = internal_energy(subsystem(p, topo.roots[1]), 0, 1);
    auto all = internal_energy(p, 0, 1);
    CHECK(a.P + b.P == doctest::Approx(all.P).epsilon(1e-12));
    CHECK(a.Ekin + b.Ekin == doctest::Approx(all.Ekin).epsilon(1e-12));
  }
}

TEST_CASE("structure checks") {
  IrrigationPattern back;
  int a = back.add_node(0.5, 0.5), b = back.add_node(0.2, 0.5);
  back.add_edge(a, b, 1.0);
  CHECK_THROWS_AS(check_structure(back), Error);

  IrrigationPattern kirchhoff = v_pattern();
  kirchhoff.edges[1].mass = 0.4;
  CHECK_THROWS_AS(check_structure(kirchhoff), Error);
  CHECK_NOTHROW(check_structure(v_pattern()));
}

TEST_CASE("validators") {
  auto st = validate(static_branch(), all_checks());
  CHECK(st.all_passed());
  auto eq = equipartition(static_branch());
  for (double l : eq.lambda) CHECK(l == doctest::Approx(1.0));
  CHECK(eq.residual == doctest::Approx(0.0).scale(1.0));

  IrrigationPattern cross;
  cross.T = 1.0;
  int r1 = cross.add_node(0.0, 0.3), r2 = cross.add_node(0.0, 0.7);
  int t1 = cross.add_node(1.0, 0.8), t2 = cross.add_node(1.0, 0.2);
  cross.add_edge(r1, t1, 0.5);
  cross.add_edge(r2, t2, 0.5);
  cross.add_tip(t1, TipKind::Atom);
  cross.add_tip(t2, TipKind::Atom);
  auto rep = validate(cross, {Check::MonotoneCoupling});
  const CheckResult* mc = rep.find(Check::MonotoneCoupling);
  REQUIRE(mc != nullptr);
  CHECK_FALSE(mc->passed);
  CHECK_FALSE(mc->witness.empty());

  auto bar = validate(v_pattern(), {Check::Barycenter, Check::Cone, Check::NoLoop, Check::ThreeIntervals});
  CHECK(bar.all_passed());
  // moving the root breaks the barycenter and the cone
  auto off = v_pattern();
  off.nodes[0].x = 0.52;
  CHECK_FALSE(validate(off, {Check::Barycenter}).all_passed());
}

TEST_CASE("pattern json round trip") {
  oracle::Gen g(8);
  auto p = g.forest(2, 0.7, 3);
  auto q = pattern_from_json(to_json(p));
  REQUIRE(q.nodes.size() == p.nodes.size());
  REQUIRE(q.edges.size() == p.edges.size());
  REQUIRE(q.tips.size() == p.tips.size());
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    CHECK(q.nodes[i].x == p.nodes[i].x);
    CHECK(q.nodes[i].t == p.nodes[i].t);
  }
  CHECK(q.T == p.T);
  CHECK_THROWS_AS(pattern_from_json(Json::parse(R"({"T": 1})")), Error);
}
