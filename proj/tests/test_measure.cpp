#include <doctest.h>

#include <cmath>

#include "branchlab/errors.hpp"
#include "branchlab/measure.hpp"
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

}  // namespace

TEST_CASE("canonicalize examples") {
  auto a = AtomicMeasure::canonicalize({{0.5, 1.0}});
  REQUIRE(a.size() == 1);
  CHECK(a.atoms()[0].x == 0.5);
  CHECK(a.total_mass() == 1.0);

  auto b = AtomicMeasure::canonicalize({{1.25, 0.5}, {0.25, 0.5}});
  REQUIRE(b.size() == 1);
  CHECK(b.atoms()[0].x == 0.25);
  CHECK(b.atoms()[0].m == 1.0);

  auto c = AtomicMeasure::canonicalize({{0.75, 0.25}, {0.25, 0.75}});
  REQUIRE(c.size() == 2);
  CHECK(c.atoms()[0].x == 0.25);
  CHECK(c.atoms()[0].m == 0.75);
  CHECK(c.atoms()[1].x == 0.75);
}

TEST_CASE("canonicalize errors") {
  CHECK(code_of([] { AtomicMeasure::canonicalize({}); }) == ErrorCode::EmptyMeasure);
  CHECK(code_of([] { AtomicMeasure::canonicalize({{0.1, 0.0}}); }) == ErrorCode::InvalidMass);
  CHECK(code_of([] { AtomicMeasure::canonicalize({{0.1, -1.0}}); }) == ErrorCode::InvalidMass);
}

TEST_CASE("canonicalize is idempotent and keeps mass") {
  oracle::Gen g(11);
  for (int i = 0; i < 100; ++i) {
    auto raw = g.atoms(g.integer(1, 40), g.uniform(0.1, 3.0));
    for (auto& a : raw) a.x += g.integer(-3, 3);
    double total = 0.0;
    for (auto& a : raw) total += a.m;
    auto m = AtomicMeasure::canonicalize(raw);
    CHECK(std::fabs(m.total_mass() - total) <= 1e-15 * total * 4);
    auto again = AtomicMeasure::canonicalize(m.atoms());
    REQUIRE(again.size() == m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      CHECK(again.atoms()[k].x == m.atoms()[k].x);
      CHECK(again.atoms()[k].m == m.atoms()[k].m);
      CHECK(m.atoms()[k].x >= 0.0);
      CHECK(m.atoms()[k].x < 1.0);
      if (k > 0) CHECK(m.atoms()[k].x > m.atoms()[k - 1].x);
    }
  }
}

TEST_CASE("pushforward examples") {
  oracle::Gen g(3);
  auto mu = AtomicMeasure::canonicalize(g.atoms(7));
  auto id = pushforward(mu, [](double x) { return x; });
  REQUIRE(id.size() == mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) CHECK(id.atoms()[k].x == mu.atoms()[k].x);

  auto t = pushforward(AtomicMeasure::canonicalize({{0.75, 1.0}}), [](double x) { return x + 0.5; });
  REQUIRE(t.size() == 1);
  CHECK(t.atoms()[0].x == doctest::Approx(0.25).epsilon(1e-15));

  auto c = pushforward(AtomicMeasure::canonicalize({{0.1, 0.4}, {0.7, 0.6}}), [](double) { return 0.3; });
  REQUIRE(c.size() == 1);
  CHECK(c.atoms()[0].x == 0.3);
  CHECK(c.atoms()[0].m == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mollify_eval examples") {
  auto delta = MollifiedMeasure::make(AtomicMeasure::canonicalize({{0.5, 1.0}}), 0.1);
  CHECK(mollify_eval(delta, 0.5) == doctest::Approx(bump::value(0.0) / 0.1).epsilon(1e-12));
  CHECK(mollify_eval(delta, 0.75) == 0.0);
  CHECK(mollify_eval(delta, 0.39) == 0.0);
  auto leb = MollifiedMeasure::make(BlockMeasure::lebesgue(), 0.2);
  for (double x : {0.0, 0.13, 0.5, 0.99}) CHECK(mollify_eval(leb, x) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(code_of([] { MollifiedMeasure::make(BlockMeasure::lebesgue(), 0.5); }) == ErrorCode::InvalidScale);
  CHECK(code_of([] { MollifiedMeasure::make(BlockMeasure::lebesgue(), 0.0); }) == ErrorCode::InvalidScale);
}

TEST_CASE("bump kernel is a normalized even profile") {
  CHECK(bump::value(0.3) == doctest::Approx(bump::value(-0.3)).epsilon(1e-15));
  CHECK(bump::value(1.0) == 0.0);
  CHECK(bump::cdf(1.0) == doctest::Approx(1.0).epsilon(1e-12));
  // trapezoid oracle for the normalization
  const int n = 20000;
  double sum = 0.0;
  for (int i = 1; i < n; ++i) sum += bump::value(-1.0 + 2.0 * i / n);
  CHECK(sum * 2.0 / n == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mollify_eval integrates to total mass") {
  oracle::Gen g(8);
  for (double eps : {0.02, 0.1, 0.3}) {
    auto atoms = g.atoms(5, 0.7);
    auto m = MollifiedMeasure::make(AtomicMeasure::canonicalize(atoms), eps);
    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += mollify_eval(m, static_cast<double>(i) / n);
    CHECK(sum / n == doctest::Approx(0.7).epsilon(1e-8));
    auto b = MollifiedMeasure::make(BlockMeasure::make({{0.3, 0.2, 0.5}, {0.7, 0.1, 0.5}}), eps);
    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += mollify_eval(b, static_cast<double>(i) / n);
    CHECK(sum / n == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("ball_mass examples") {
  CHECK(ball_mass(BlockMeasure::lebesgue(), 0.37, 0.1) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(ball_mass(AtomicMeasure::canonicalize({{0.5, 1.0}}), 0.5, 0.01) == 1.0);
  CHECK(ball_mass(AtomicMeasure::canonicalize({{0.1, 0.5}, {0.9, 0.5}}), 0.0, 0.15) == 1.0);
}

TEST_CASE("ball_mass is monotone in r and additive") {
  oracle::Gen g(21);
  for (int i = 0; i < 50; ++i) {
    auto a = g.atoms(g.integer(1, 20), 0.5), b = g.atoms(g.integer(1, 20), 0.5);
    auto both = a;
    both.insert(both.end(), b.begin(), b.end());
    auto ma = AtomicMeasure::canonicalize(a), mb = AtomicMeasure::canonicalize(b),
         mab = AtomicMeasure::canonicalize(both);
    double x = g.uniform(), prev = 0.0;
    for (double r = 0.01; r <= 0.5; r += 0.01) {
      double m = ball_mass(mab, x, r);
      CHECK(m >= prev);
      prev = m;
      CHECK(m == doctest::Approx(ball_mass(ma, x, r) + ball_mass(mb, x, r)).epsilon(1e-14));
    }
  }
}

TEST_CASE("block measures reject overlaps") {
  CHECK(code_of([] { BlockMeasure::make({{0.3, 0.2, 0.5}, {0.4, 0.2, 0.5}}); }) == ErrorCode::OverlappingBlocks);
  CHECK_NOTHROW(BlockMeasure::make({{0.25, 0.5, 0.5}, {0.75, 0.5, 0.5}}));
  CHECK(code_of([] { BlockMeasure::make({{0.95, 0.2, 0.5}, {0.1, 0.2, 0.5}}); }) == ErrorCode::OverlappingBlocks);
}

TEST_CASE("torus distance") {
  CHECK(torus_dist(0.05, 0.95) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(torus_dist(0.25, 0.75) == doctest::Approx(0.5));
  CHECK(wrap01(-0.25) == 0.75);
  CHECK(wrap01(3.5) == 0.5);
}
