#include <doctest.h>

#include <cmath>

#include "branchlab/errors.hpp"
#include "branchlab/json_io.hpp"
#include "branchlab/spectral.hpp"
#include "oracles.hpp"

using namespace branchlab;

namespace {

std::vector<Atom> equispaced(int N, double shift = 0.0) {
  std::vector<Atom> a;
  for (int i = 0; i < N; ++i) a.push_back({shift + static_cast<double>(i) / N, 1.0 / N});
  return a;
}

// 2 * sum_{n <= nmax} n^{-a} plus integral tail, independent of the library
double two_zeta(double a) { return oracle::equispaced_atoms_norm(1, a / 2.0); }

}  // namespace

TEST_CASE("spectrum examples") {
  Spectrum leb = spectrum_of(BlockMeasure::lebesgue(), 64, true);
  for (int k = 0; k <= 64; ++k) {
    CHECK(std::abs(leb.coeff(k)) <= 1e-15);
  }
  Spectrum d = spectrum_of(AtomicMeasure::canonicalize({{0.0, 1.0}}), 32, true);
  CHECK(std::abs(d.coeff(0)) <= 1e-15);
  for (int k = 1; k <= 32; ++k) CHECK(std::abs(d.coeff(k) - 1.0) <= 1e-14);
  Spectrum four = spectrum_of(AtomicMeasure::canonicalize(equispaced(4)), 40, true);
  for (int k = 1; k <= 40; ++k) CHECK(std::abs(four.coeff(k) - (k % 4 == 0 ? 1.0 : 0.0)) <= 1e-14);
}

TEST_CASE("hermitian symmetry") {
  oracle::Gen g(4);
  auto s = spectrum_of(AtomicMeasure::canonicalize(g.atoms(9)), 50, true);
  for (int k = 1; k <= 50; ++k) CHECK(std::abs(s.coeff(-k) - std::conj(s.coeff(k))) == 0.0);
}

TEST_CASE("hs_norm_sq examples against the series oracle") {
  CHECK(hs_norm_sq(spectrum_of(BlockMeasure::lebesgue(), 128, true), 0.4).value == 0.0);
  auto four = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize(equispaced(4)), 100000, true), 0.75);
  CHECK(four.value == doctest::Approx(two_zeta(1.5) / 8.0).epsilon(1e-6));
  CHECK(four.tail_bound >= 0.0);
  for (double x : {0.0, 0.3, 0.77}) {
    auto one = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize({{x, 1.0}}), 100000, true), 0.75);
    CHECK(one.value == doctest::Approx(two_zeta(1.5)).epsilon(1e-6));
    CHECK(one.value == doctest::Approx(5.2247507).epsilon(1e-7));
  }
}

TEST_CASE("atomic spectra diverge for s <= 1/2") {
  auto r = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize({{0.2, 1.0}}), 256, true), 0.5);
  CHECK(r.infinite);
  auto r2 = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize({{0.2, 1.0}}), 256, true), 0.3);
  CHECK(r2.infinite);
}

TEST_CASE("non-centered spectrum is rejected") {
  auto s = spectrum_of(AtomicMeasure::canonicalize({{0.2, 1.0}}), 16, false);
  try {
    hs_norm_sq(s, 0.75);
    FAIL("expected NotCentered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotCentered);
  }
}

TEST_CASE("hs_inner") {
  oracle::Gen g(12);
  auto a = spectrum_of(AtomicMeasure::canonicalize(g.atoms(6)), 512, true);
  auto b = spectrum_of(AtomicMeasure::canonicalize(g.atoms(3)), 512, true);
  CHECK(hs_inner(a, a, 0.75) == doctest::Approx(hs_norm_sq(a, 0.75).truncated).epsilon(1e-12));
  CHECK(hs_inner(a, spectrum_of(BlockMeasure::lebesgue(), 512, true), 0.75) == 0.0);
  // Cauchy-Schwarz at matched truncation
  double ab = hs_inner(a, b, 0.6);
  CHECK(ab * ab <= hs_norm_sq(a, 0.6).truncated * hs_norm_sq(b, 0.6).truncated * (1 + 1e-12));
  // half-period translate of a single atom: direct alternating sum
  auto d0 = spectrum_of(AtomicMeasure::canonicalize({{0.1, 1.0}}), 2000, true);
  auto d1 = spectrum_of(AtomicMeasure::canonicalize({{0.6, 1.0}}), 2000, true);
  double want = 0.0;
  for (int k = 2000; k >= 1; --k) want += 2.0 * std::pow(k, -1.5) * (k % 2 ? -1.0 : 1.0);
  CHECK(hs_inner(d0, d1, 0.75) == doctest::Approx(want).epsilon(1e-10));
  try {
    hs_inner(a, spectrum_of(AtomicMeasure::canonicalize(g.atoms(3)), 256, true), 0.75);
    FAIL("expected TruncationMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncationMismatch);
  }
}

TEST_CASE("rotation invariance of the norm") {
  oracle::Gen g(13);
  for (int i = 0; i < 20; ++i) {
    auto atoms = g.atoms(g.integer(1, 10));
    double theta = g.uniform();
    auto rot = atoms;
    for (auto& a : rot) a.x += theta;
    for (double s : {0.3, 0.75}) {
      auto blocks0 = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize(atoms), 4096, true), s);
      auto blocks1 = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize(rot), 4096, true), s);
      if (blocks0.infinite) {
        CHECK(blocks1.infinite);
      } else {
        CHECK(blocks1.value == doctest::Approx(blocks0.value).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("equispaced scaling in N") {
  for (double s : {0.6, 0.9}) {
    const int K = 4096;
    double base = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize(equispaced(1)), K, true), s).truncated;
    for (int N : {2, 4, 8}) {
      // matched truncation: N atoms at cutoff N K see the same harmonics
      double v = hs_norm_sq(spectrum_of(AtomicMeasure::canonicalize(equispaced(N, 0.013)), N * K, true), s).truncated;
      CHECK(v * std::pow(N, 2 * s) == doctest::Approx(base).epsilon(1e-10));
    }
  }
}

TEST_CASE("block measure norm follows 1/(N r^{1-2s})") {
  const double s = 0.4;
  std::vector<double> C;
  for (int N : {2, 4, 8, 16})
    for (double f : {0.01, 0.02, 0.05}) {
      double r = f / N;
      std::vector<Block> b;
      for (int i = 0; i < N; ++i) b.push_back({(i + 0.5) / N, r, 1.0 / N});
      double v = hs_norm_sq(spectrum_of(BlockMeasure::make(b), 1 << 15, true), s).value;
      C.push_back(v * N * std::pow(r, 1 - 2 * s));
    }
  double lo = *std::min_element(C.begin(), C.end()), hi = *std::max_element(C.begin(), C.end());
  double mid = 0.5 * (lo + hi);
  CHECK(hi <= 1.2 * mid);
  CHECK(lo >= 0.8 * mid);
}

TEST_CASE("block spectrum matches a fine atomic discretization") {
  auto blocks = BlockMeasure::make({{0.3, 0.2, 0.6}, {0.75, 0.1, 0.4}});
  std::vector<Atom> fine;
  const int n = 20000;
  for (const Block& b : blocks.blocks())
    for (int i = 0; i < n; ++i) fine.push_back({b.center - b.width / 2 + b.width * (i + 0.5) / n, b.mass / n});
  auto sb = spectrum_of(blocks, 50, true);
  auto sa = spectrum_of(AtomicMeasure::canonicalize(fine), 50, true);
  for (int k = 1; k <= 50; ++k) CHECK(std::abs(sb.coeff(k) - sa.coeff(k)) <= 1e-6);
}

TEST_CASE("mollification error ratio") {
  std::vector<double> eps;
  for (int k = 3; k <= 10; ++k) eps.push_back(std::ldexp(1.0, -k));
  auto leb = mollification_error_ratio(BlockMeasure::lebesgue(), 0.75, 0.5, eps, 4096);
  for (auto& r : leb) CHECK(r.ratio == 0.0);
  auto blk = mollification_error_ratio(BlockMeasure::make({{0.5, 0.5, 1.0}}), 0.75, 0.5, eps, 100000);
  for (auto& r : blk) CHECK(r.ratio <= 20.0);
  auto same = mollification_error_ratio(BlockMeasure::make({{0.5, 0.5, 1.0}}), 0.6, 0.6, {1e-3, 1e-4}, 100000);
  for (auto& r : same) CHECK(r.ratio <= 2.0 + 1e-6);
  try {
    mollification_error_ratio(AtomicMeasure::canonicalize({{0.5, 1.0}}), 0.75, 0.4, eps, 1024);
    FAIL("expected InfiniteNorm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfiniteNorm);
  }
}

TEST_CASE("second characterization") {
  auto z = characterization2_lhs_rhs(BlockMeasure::lebesgue(), 0.5, 256, 64);
  CHECK(z.first == 0.0);
  CHECK(z.second == 0.0);
  auto two = characterization2_lhs_rhs(AtomicMeasure::canonicalize(equispaced(2)), 0.75, 100000, 200);
  // lhs is the truncated sum: even harmonics up to K
  double trunc = 0.0;
  for (int n = 50000; n >= 1; --n) trunc += 2.0 * std::pow(2.0 * n, -1.5);
  CHECK(two.first == doctest::Approx(trunc).epsilon(1e-10));
  CHECK(two.second > 0.0);
  CHECK(std::isfinite(two.second));
  auto b1 = characterization2_lhs_rhs(BlockMeasure::make({{0.5, 0.25, 1.0}}), 0.5, 2048, 120);
  auto b2 = characterization2_lhs_rhs(BlockMeasure::make({{0.5, 0.25, 1.0}}), 0.5, 4096, 120);
  CHECK(b1.first / b1.second == doctest::Approx(b2.first / b2.second).epsilon(0.05));
}

TEST_CASE("interpolation inequality for mollified measures") {
  oracle::Gen g(31);
  for (int i = 0; i < 10; ++i) {
    auto m = MollifiedMeasure::make(AtomicMeasure::canonicalize(g.atoms(g.integer(1, 6))), g.uniform(0.02, 0.2));
    auto sp = spectrum_of(m, 2048, true);
    double s = g.uniform(0.1, 0.9);
    double hs = hs_norm_sq(sp, s).truncated, l2 = hs_norm_sq(sp, 0.0).truncated, h1 = hs_norm_sq(sp, 1.0).truncated;
    CHECK(std::sqrt(hs) <= std::pow(l2, (1 - s) / 2) * std::pow(h1, s / 2) + 1e-9);
  }
}

TEST_CASE("norm report json") {
  NormReport r{1.5, 1.4, 0.2, 64, false};
  Json j = to_json(r);
  CHECK(j["value"] == 1.5);
  CHECK(j["K"] == 64);
  CHECK(j["infinite"] == false);
}
