#include <doctest.h>

#include <cmath>

#include "branchlab/constructions.hpp"
#include "branchlab/errors.hpp"
#include "branchlab/spectral.hpp"
#include "branchlab/transport.hpp"
#include "oracles.hpp"

using namespace branchlab;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
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

const BoundaryOptions kBlock{BoundaryMode::Block, 4096, 0.01};

}  // namespace

TEST_CASE("uniform grid degenerate case is Lebesgue") {
  auto p = uniform_grid(1, 1.0, 0.5);
  CHECK_NOTHROW(check_structure(p));
  auto e = full_energy(p, 0.4, kBlock);
  CHECK(e.boundary_penalty == doctest::Approx(0.0).scale(1.0));
  CHECK(validate(p, {Check::NoLoop}).all_passed());
  CHECK(code_of([] { uniform_grid(4, 0.3, 0.1); }) == ErrorCode::OverlappingBlocks);
}

TEST_CASE("uniform grid energy within 10x of the prediction") {
  auto p = uniform_grid(4, 0.125, 0.01);
  auto e = full_energy(p, 0.4, kBlock);
  double pred = uniform_grid_prediction(4, 0.125, 0.01, 0.4).sum();
  CHECK(e.total <= 10.0 * pred);
  CHECK(e.total >= pred / 10.0);
}

TEST_CASE("uniform_grid_energy agrees with full_energy on the built pattern") {
  for (auto [N, r, T, s] : std::vector<std::tuple<int, double, double, double>>{
           {4, 0.125, 0.01, 0.4}, {3, 0.2, 0.05, 0.3}, {8, 0.05, 0.002, 0.6}}) {
    UniformGridOptions opt;
    opt.eps_b = T / 2;
    opt.dyadic.depth = 5;
    const int K = 512;
    auto direct = full_energy(uniform_grid(N, r, T, opt), s, BoundaryOptions{BoundaryMode::Block, N * K, 0.01});
    auto fast = uniform_grid_energy(N, r, T, s, K, opt);
    CHECK(fast.perimeter == doctest::Approx(direct.perimeter).epsilon(1e-9));
    CHECK(fast.kinetic == doctest::Approx(direct.kinetic).epsilon(1e-9));
    CHECK(fast.boundary.truncated == doctest::Approx(direct.boundary.truncated).epsilon(1e-9));
    CHECK(std::fabs(fast.boundary.value - direct.boundary.value)
          <= fast.boundary.tail_bound + direct.boundary.tail_bound + 1e-12);
  }
}

TEST_CASE("comb series equals the block spectrum norm") {
  const int N = 5, K = 300;
  const double r = 0.07, s = 0.35;
  std::vector<Block> blocks;
  for (int i = 0; i < N; ++i) blocks.push_back({(i + 0.5) / N, r, 1.0 / N});
  auto direct = hs_norm_sq(spectrum_of(BlockMeasure::make(blocks), N * K, true), s);
  auto comb = uniform_grid_energy(N, r, 0.1, s, K).boundary;
  CHECK(comb.K == N * K);
  CHECK(comb.truncated == doctest::Approx(direct.truncated).epsilon(1e-10));
  // exact tiling gives zero boundary
  CHECK(uniform_grid_energy(N, 1.0 / N, 0.1, s, K).boundary.value == 0.0);
}

TEST_CASE("dirac grid") {
  auto one = dirac_grid(1, 0.5);
  CHECK(one.edges.size() == 1);
  CHECK(one.nodes[one.edges[0].from].x == one.nodes[one.edges[0].to].x);
  auto e = full_energy(dirac_grid(4, 0.01), 0.75, BoundaryOptions{BoundaryMode::Atomic, 100000, 0.01});
  CHECK(e.total == doctest::Approx(0.08 + 2.0 * oracle::equispaced_atoms_norm(4, 0.75)).epsilon(1e-6));
}

TEST_CASE("dyadic branch") {
  DyadicOptions bad;
  bad.delta = 0.25;
  CHECK(code_of([&] { dyadic_branch_uniform(0.5, 1.0, 0.5, 0.1, 0.1, bad); }) == ErrorCode::InvalidDelta);
  bad.delta = 0.5;
  CHECK(code_of([&] { dyadic_branch_uniform(0.5, 1.0, 0.5, 0.1, 0.1, bad); }) == ErrorCode::InvalidDelta);

  // atom target: one straight edge
  auto line = dyadic_branch(0.3, {{0.45, 1.0, 0.0}}, 0.2);
  CHECK(line.pattern.edges.size() <= 2);
  CHECK(line.I - 0.2 == doctest::Approx(line.w2 / 0.2).epsilon(1e-12));
  CHECK(line.w2 == doctest::Approx(0.15 * 0.15));

  DyadicOptions opt;
  opt.delta = 0.4;
  opt.depth = 8;
  auto c = dyadic_branch_uniform(0.5, 1.0, 0.5, 0.1, 0.1, opt);
  CHECK_NOTHROW(check_structure(c.pattern));
  double C_centered = (c.I - c.w2 / 0.1) / (0.01 / 0.1 + 0.1);
  CHECK(C_centered > 0.0);
  CHECK(C_centered < 10.0);
  // support containment between the source atom and the target interval
  for (int i = 0; i <= 100; ++i) {
    double t = 0.1 * i / 100.0;
    double lo = 0.5 - 0.1 * t / 0.1, hi = 0.5 + 0.1 * t / 0.1;
    SliceResult sl = slice(c.pattern, t);
    for (const Atom& a : sl.measure.atoms()) {
      CHECK(a.x >= lo - 1e-12);
      CHECK(a.x <= hi + 1e-12);
    }
  }
  // displaced source: same constant up to 50%
  auto d = dyadic_branch_uniform(0.3, 1.0, 0.5, 0.1, 0.1, opt);
  double C_disp = (d.I - d.w2 / 0.1) / (0.01 / 0.1 + 0.1);
  CHECK(C_disp <= 1.5 * C_centered);
  CHECK(C_disp >= 0.5 * C_centered);
}

TEST_CASE("shrink competitor") {
  auto st = dirac_grid(3, 1.0);
  auto sh = shrink_competitor(st, 0.3);
  CHECK(internal_energy(sh, 0, 1).total() == doctest::Approx(internal_energy(st, 0, 1).total()));

  auto v = v_pattern();
  auto h = shrink_competitor(v, 1.0);
  auto before = internal_energy(v, 0, 1), after = internal_energy(h, 0, 1);
  CHECK(after.P == doctest::Approx(before.P).epsilon(1e-12));
  CHECK(after.Ekin == doctest::Approx(before.Ekin / 4).epsilon(1e-12));

  oracle::Gen g(14);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto p = g.forest(g.integer(1, 2), 1.0, 3);
    const double eps = g.uniform(0.05, 0.5);
    auto q = shrink_competitor(p, eps);
    // the induced plan is the optimal one only for monotone patterns
    const bool monotone = validate(p, {Check::MonotoneCoupling}).all_passed();
    auto a = internal_energy(p, 1 - eps, 1), b = internal_energy(q, 1 - eps, 1);
    CHECK(b.P == doctest::Approx(a.P).epsilon(1e-12));
    CHECK(b.Ekin == doctest::Approx(a.Ekin / 4).epsilon(1e-12));
    auto want = mccann(slice(p, 1 - eps).measure, slice(p, 1).measure, 0.5, Metric::Line);
    auto got = slice(q, 1).measure;
    if (monotone) {
      CHECK(std::sqrt(w2_line(want, got).cost_sq) <= 1e-12);
      ++checked;
    }
  }
  CHECK(checked >= 5);
}

TEST_CASE("shift competitor") {
  auto v = v_pattern();
  auto same = shift_competitor(v, 0.5, 0.0);
  CHECK(internal_energy(same, 0, 1).Ekin == doctest::Approx(internal_energy(v, 0, 1).Ekin));

  auto sh = shift_competitor(v, 0.5, 0.05);
  double dE = internal_energy(sh, 0, 1).Ekin - internal_energy(v, 0, 1).Ekin;
  CHECK(dE == doctest::Approx(0.05 * 0.05 / 0.5).epsilon(1e-12));

  IrrigationPattern atom;
  int a = atom.add_node(0.0, 0.3), b = atom.add_node(1.0, 0.3);
  atom.add_edge(a, b, 1.0);
  atom.add_tip(b, TipKind::Atom);
  auto mixed = shift_competitor(atom, 0.4, 0.1);
  BoundaryOptions o{BoundaryMode::Atomic, 64, 0.01};
  auto s0 = boundary_spectrum(atom, o), s1 = boundary_spectrum(mixed, o);
  for (int k = 1; k <= 64; ++k) {
    auto want = std::cos(2 * M_PI * 0.1 * k) * s0.coeff(k);
    CHECK(std::abs(s1.coeff(k) - want) <= 1e-12);
  }
}

TEST_CASE("covering competitor") {
  IrrigationPattern atom;
  int a = atom.add_node(0.0, 0.3), b = atom.add_node(1.0, 0.6);
  atom.add_edge(a, b, 1.0);
  atom.add_tip(b, TipKind::Atom);
  auto c = covering_competitor(atom, 0.25, 1.0);
  CHECK(c.intervals == 1);
  CHECK(c.I - 0.25 == doctest::Approx(c.w2 / 0.25).epsilon(1e-12));

  oracle::Gen g(22);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = g.forest(g.integer(1, 3), 1.0, 3);
    if (!validate(p, {Check::MonotoneCoupling}).all_passed()) continue;
    const double eps = 0.2;
    auto cov = covering_competitor(p, eps, 1.0);
    CHECK_NOTHROW(check_structure(cov.pattern));
    for (double t : {1.0 - eps, 1.0}) {
      auto x = slice(p, t).measure, y = slice(cov.pattern, t).measure;
      REQUIRE(x.size() == y.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y.atoms()[i].x == doctest::Approx(x.atoms()[i].x).epsilon(1e-12));
        CHECK(y.atoms()[i].m == doctest::Approx(x.atoms()[i].m).epsilon(1e-12));
      }
    }
    CHECK(cov.I >= cov.w2 / eps - 1e-9);
  }
}

TEST_CASE("vitali cover") {
  auto c = vitali_cover({{0.1, 0.1}, {0.12, 0.12}, {0.5, 0.5}, {0.9, 0.95}}, 0.05);
  CHECK(c.centers.size() >= 3);
  for (std::size_t i = 1; i < c.intervals.size(); ++i) CHECK(c.intervals[i].first >= c.intervals[i - 1].second);
}

TEST_CASE("construction specs") {
  CHECK(parse_construction("uniform_grid") == ConstructionKind::UniformGrid);
  CHECK(std::string(construction_name(ConstructionKind::Shift)) == "shift");
  CHECK(code_of([] { parse_construction("nope"); }) == ErrorCode::ConfigError);
  for (auto k : {ConstructionKind::UniformGrid, ConstructionKind::DiracGrid, ConstructionKind::Covering,
                 ConstructionKind::Shrink, ConstructionKind::Shift}) {
    ConstructionSpec spec;
    spec.kind = k;
    spec.N = 4;
    spec.r = 0.2;
    spec.dyadic.depth = 4;
    spec.eta = 0.01;  // 2 eta below the 0.05 gap between neighboring tip blocks
    auto p = build_construction(spec, 0.5);
    CHECK_NOTHROW(check_structure(p));
    CHECK(validate(p, {Check::NoLoop}).all_passed());
  }
}
