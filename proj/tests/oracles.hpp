// Independent reference computations and random generators shared by the
// unit tests and the acceptance gate. Nothing here calls the code under test
// except to build inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "branchlab/irrigation.hpp"
#include "branchlab/measure.hpp"

namespace oracle {

using branchlab::Atom;

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// N^{-2s} * 2 * (sum_{n <= nmax} n^{-2s} + integral tail), summed small terms first.
inline double equispaced_atoms_norm(int N, double s, long nmax = 1000000) {
  long double sum = 0.0L;
  for (long n = nmax; n >= 1; --n) sum += std::pow(static_cast<long double>(n), -2.0L * s);
  double tail = std::pow(static_cast<double>(nmax), 1.0 - 2.0 * s) / (2.0 * s - 1.0);
  return std::pow(static_cast<double>(N), -2.0 * s) * 2.0 * (static_cast<double>(sum) + tail);
}

// Cost of the quantile coupling u -> (X(u), Y(u + theta)) with Y continued by
// Y(v + 1) = Y(v) + 1. Atoms sorted in [0,1), masses summing to 1.
inline double shifted_quantile_cost(const std::vector<Atom>& mu, const std::vector<Atom>& nu, double theta) {
  std::vector<double> cu{0.0};
  for (const Atom& a : mu) cu.push_back(cu.back() + a.m);
  cu.back() = 1.0;
  std::vector<double> cv{0.0};
  for (const Atom& a : nu) cv.push_back(cv.back() + a.m);
  cv.back() = 1.0;
  auto Y = [&](double v) {
    double f = std::floor(v);
    double w = v - f;
    std::size_t j = std::upper_bound(cv.begin(), cv.end(), w) - cv.begin() - 1;
    j = std::min(j, nu.size() - 1);
    return nu[j].x + f;
  };
  std::vector<double> br(cu.begin(), cu.end());
  for (int n = -2; n <= 2; ++n)
    for (double c : cv) {
      double u = c - theta + n;
      if (u > 0.0 && u < 1.0) br.push_back(u);
    }
  std::sort(br.begin(), br.end());
  double cost = 0.0;
  std::size_t i = 0;
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    double a = br[k], b = br[k + 1];
    if (!(b > a)) continue;
    double mid = 0.5 * (a + b);
    while (i + 1 < mu.size() && cu[i + 1] <= mid) ++i;
    double d = mu[i].x - Y(mid + theta);
    cost += (b - a) * d * d;
  }
  return cost;
}

// Circle W2^2 by sweeping every breakpoint of the piecewise-linear cost in theta.
inline double torus_w2_bruteforce(const std::vector<Atom>& mu, const std::vector<Atom>& nu) {
  std::vector<double> cu{0.0}, cv{0.0};
  for (const Atom& a : mu) cu.push_back(cu.back() + a.m);
  for (const Atom& a : nu) cv.push_back(cv.back() + a.m);
  double best = INFINITY;
  for (double a : cu)
    for (double b : cv)
      for (int n = -1; n <= 1; ++n) best = std::min(best, shifted_quantile_cost(mu, nu, b - a + n));
  return best;
}

// Hand-rolled generators.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(rng); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

  // n atoms in [0,1), distinct positions, masses summing to `mass`.
  std::vector<Atom> atoms(int n, double mass = 1.0) {
    std::vector<Atom> out;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      out.push_back({uniform(), uniform(0.05, 1.0)});
      total += out.back().m;
    }
    for (Atom& a : out) a.m *= mass / total;
    std::sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    return out;
  }

  // Random forest on [0, T]: `roots` roots at t = 0, binary or ternary splits
  // at random times, every leaf at T with an atom tip. Positions stay in
  // (0.05, 0.95); children are ordered left to right when `ordered`.
  branchlab::IrrigationPattern forest(int roots, double T, int max_depth, bool ordered = true) {
    branchlab::IrrigationPattern p;
    p.T = T;
    std::vector<Atom> r = atoms(roots);
    for (const Atom& a : r) grow(p, p.add_node(0.0, 0.05 + 0.9 * a.x), a.m, max_depth, ordered);
    return p;
  }

 private:
  void grow(branchlab::IrrigationPattern& p, int v, double mass, int depth, bool ordered) {
    const double t = p.nodes[v].t, x = p.nodes[v].x, T = p.T;
    if (depth == 0 || uniform() < 0.3) {
      int leaf = p.add_node(T, std::clamp(x + uniform(-0.1, 0.1), 0.05, 0.95));
      p.add_edge(v, leaf, mass);
      p.add_tip(leaf, branchlab::TipKind::Atom);
      return;
    }
    const int k = integer(2, 3);
    double tc = t + (T - t) * uniform(0.2, 0.8);
    std::vector<double> xs, ms;
    double tot = 0.0;
    for (int i = 0; i < k; ++i) {
      xs.push_back(std::clamp(x + uniform(-0.1, 0.1), 0.05, 0.95));
      ms.push_back(uniform(0.2, 1.0));
      tot += ms.back();
    }
    if (ordered) std::sort(xs.begin(), xs.end());
    for (int i = 0; i < k; ++i) {
      int c = p.add_node(tc, xs[i]);
      p.add_edge(v, c, mass * ms[i] / tot);
      grow(p, c, mass * ms[i] / tot, depth - 1, ordered);
    }
  }
};

}  // namespace oracle
