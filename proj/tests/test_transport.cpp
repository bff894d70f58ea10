#include <doctest.h>

#include <cmath>

#include "branchlab/dimension.hpp"
#include "branchlab/errors.hpp"
#include "branchlab/spectral.hpp"
#include "branchlab/transport.hpp"
#include "oracles.hpp"

using namespace branchlab;

namespace {

AtomicMeasure delta(double x) { return AtomicMeasure::canonicalize({{x, 1.0}}); }

AtomicMeasure lebesgue_atoms(int n) {
  std::vector<Atom> a;
  for (int i = 0; i < n; ++i) a.push_back({(i + 0.5) / n, 1.0 / n});
  return AtomicMeasure::canonicalize(a);
}

}  // namespace

TEST_CASE("w2_line examples") {
  oracle::Gen g(1);
  auto mu = AtomicMeasure::canonicalize(g.atoms(10));
  auto same = w2_line(mu, mu);
  CHECK(same.cost_sq == 0.0);
  for (const auto& e : same.plan.pairs) CHECK(e.x == e.y);
  CHECK(w2_line(delta(0.25), delta(0.75)).cost_sq == doctest::Approx(0.25).epsilon(1e-15));
  // midpoint rule on 2^12 cells: 1/12 - 1/(12 n^2)
  CHECK(w2_line(lebesgue_atoms(4096), delta(0.5)).cost_sq == doctest::Approx(1.0 / 12).epsilon(1e-6));
  try {
    w2_line(delta(0.1), AtomicMeasure::canonicalize({{0.2, 0.5}}));
    FAIL("expected UnbalancedMeasures");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnbalancedMeasures);
  }
}

TEST_CASE("w2_torus examples") {
  CHECK(w2_torus(delta(0.0), delta(0.9)).cost_sq == doctest::Approx(0.01).epsilon(1e-12));
  auto tie = w2_torus(delta(0.25), delta(0.75));
  CHECK(tie.cost_sq == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(tie.antipodal);
  try {
    w2_torus(delta(0.1), AtomicMeasure::canonicalize({{0.2, 0.5}}));
    FAIL("expected UnbalancedMeasures");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnbalancedMeasures);
  }
}

TEST_CASE("w2_torus matches the breakpoint sweep and beats sampled cuts") {
  oracle::Gen g(77);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = g.atoms(64), b = g.atoms(64);
    auto mu = AtomicMeasure::canonicalize(a), nu = AtomicMeasure::canonicalize(b);
    double got = w2_torus(mu, nu).cost_sq;
    CHECK(got == doctest::Approx(oracle::torus_w2_bruteforce(mu.atoms(), nu.atoms())).epsilon(1e-10));
    double sampled = INFINITY;
    for (int i = 0; i < 10000; ++i) sampled = std::min(sampled, torus_cut_cost(mu, nu, i / 10000.0));
    CHECK(got <= sampled + 1e-10);
  }
}

TEST_CASE("plan cost and marginals") {
  oracle::Gen g(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto mu = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 30)));
    auto nu = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 30)));
    for (bool torus : {false, true}) {
      auto r = torus ? w2_torus(mu, nu) : w2_line(mu, nu);
      CHECK(r.plan.is_monotone());
      CHECK(r.plan.cost_sq() == doctest::Approx(r.cost_sq).epsilon(1e-12));
      CHECK(r.plan.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
      std::vector<Atom> src, dst;
      for (const auto& e : r.plan.pairs) {
        src.push_back({e.x, e.m});
        dst.push_back({e.y, e.m});
      }
      auto s = AtomicMeasure::canonicalize(src), d = AtomicMeasure::canonicalize(dst);
      REQUIRE(s.size() == mu.size());
      REQUIRE(d.size() == nu.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.atoms()[i].x == doctest::Approx(mu.atoms()[i].x).epsilon(1e-12));
        CHECK(s.atoms()[i].m == doctest::Approx(mu.atoms()[i].m).epsilon(1e-12));
      }
      for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d.atoms()[i].x == doctest::Approx(nu.atoms()[i].x).epsilon(1e-12));
        CHECK(d.atoms()[i].m == doctest::Approx(nu.atoms()[i].m).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("triangle inequality and torus below line") {
  oracle::Gen g(10);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 12)));
    auto b = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 12)));
    auto c = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 12)));
    double ab = std::sqrt(w2_line(a, b).cost_sq), bc = std::sqrt(w2_line(b, c).cost_sq),
           ac = std::sqrt(w2_line(a, c).cost_sq);
    CHECK(ac <= ab + bc + 1e-10);
    CHECK(w2_torus(a, b).cost_sq <= w2_line(a, b).cost_sq + 1e-15);
  }
}

TEST_CASE("mccann endpoints and midpoint") {
  oracle::Gen g(4);
  auto mu = AtomicMeasure::canonicalize(g.atoms(6)), nu = AtomicMeasure::canonicalize(g.atoms(9));
  for (Metric m : {Metric::Line, Metric::Torus}) {
    auto at0 = mccann(mu, nu, 0.0, m), at1 = mccann(mu, nu, 1.0, m);
    REQUIRE(at0.size() == mu.size());
    REQUIRE(at1.size() == nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(wrap01(at0.atoms()[i].x) == doctest::Approx(mu.atoms()[i].x));
    for (std::size_t i = 0; i < nu.size(); ++i) CHECK(wrap01(at1.atoms()[i].x) == doctest::Approx(nu.atoms()[i].x));
    CHECK(mccann(mu, nu, 0.37, m).total_mass() == doctest::Approx(1.0).epsilon(1e-15));
  }
  auto mid = mccann(delta(0.0), delta(0.5), 0.5, Metric::Line);
  REQUIRE(mid.size() == 1);
  CHECK(mid.atoms()[0].x == doctest::Approx(0.25));
}

TEST_CASE("geodesic identity") {
  oracle::Gen g(40);
  for (int trial = 0; trial < 30; ++trial) {
    auto mu = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 10)));
    auto nu = AtomicMeasure::canonicalize(g.atoms(g.integer(1, 10)));
    double W = std::sqrt(w2_line(mu, nu).cost_sq);
    double l = g.uniform(), s = g.uniform();
    auto a = mccann(mu, nu, l, Metric::Line), b = mccann(mu, nu, s, Metric::Line);
    CHECK(std::sqrt(w2_line(a, b).cost_sq) == doctest::Approx(std::fabs(l - s) * W).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("displacement Ahlfors") {
  std::vector<double> radii;
  for (int k = 2; k <= 8; ++k) radii.push_back(std::ldexp(1.0, -k));
  oracle::Gen g(6);
  auto mu = AtomicMeasure::canonicalize(g.atoms(12));
  auto id = w2_line(mu, mu).plan;
  for (double l : {1e-9, 0.3, 0.8}) {
    auto r = displacement_ahlfors(id, l, 0.5, radii);
    CHECK(r.M_lambda == doctest::Approx(upper_ahlfors_line(mu.atoms(), 0.5, radii)));
  }
  const double alpha = std::log(2.0) / std::log(3.0);
  auto plan = w2_line(cantor_atoms(8), lebesgue_atoms(256)).plan;
  auto r = displacement_ahlfors(plan, 0.5, alpha, radii);
  CHECK(r.M_lambda <= std::pow(2.0, alpha) * std::pow(0.5, -alpha) * r.M0);
  MonotonePlan bad;
  bad.pairs = {{0.1, 0.9, 0.5}, {0.2, 0.3, 0.5}};
  CHECK_FALSE(bad.is_monotone());
  try {
    displacement_ahlfors(bad, 0.5, 1.0, radii);
    FAIL("expected NotMonotone");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotMonotone);
  }
}

TEST_CASE("Loeper inequality") {
  auto a = MollifiedMeasure::make(delta(0.3), 0.05);
  auto z = loeper_check(a, a, 512);
  CHECK(z.first == doctest::Approx(0.0).scale(1.0));
  CHECK(z.second == doctest::Approx(0.0).scale(1.0));
  auto r = loeper_check(MollifiedMeasure::make(delta(0.0), 0.05), MollifiedMeasure::make(delta(0.1), 0.05), 1024);
  CHECK(r.first > 0.0);
  CHECK(r.first <= r.second * (1 + 1e-3));
  auto two = AtomicMeasure::canonicalize({{0.2, 0.5}, {0.6, 0.5}});
  auto four = AtomicMeasure::canonicalize({{0.1, 0.25}, {0.35, 0.25}, {0.55, 0.25}, {0.8, 0.25}});
  auto r2 = loeper_check(MollifiedMeasure::make(two, 0.02), MollifiedMeasure::make(four, 0.02), 2048);
  CHECK(r2.first <= r2.second * (1 + 1e-3));
}
