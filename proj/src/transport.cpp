#include "branchlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "branchlab/errors.hpp"
#include "branchlab/spectral.hpp"

namespace branchlab {
namespace {

struct Piece {
  double pos;
  double m;
};

void check_balance(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  if (mu.empty() || nu.empty()) throw Error(ErrorCode::EmptyMeasure, "transport of empty measure");
  double a = mu.total_mass(), b = nu.total_mass();
  if (std::fabs(a - b) > 1e-12 * std::max(a, b))
    throw Error(ErrorCode::UnbalancedMeasures,
                "masses " + std::to_string(a) + " and " + std::to_string(b));
}

// Couples two sequences of equal total mass in order.
MonotonePlan merge_sequences(const std::vector<Piece>& src, const std::vector<Piece>& dst,
                             double total) {
  MonotonePlan plan;
  plan.pairs.reserve(src.size() + dst.size());
  const double tol = 1e-15 * total;
  std::size_t i = 0, j = 0;
  double ra = src.empty() ? 0.0 : src[0].m;
  double rb = dst.empty() ? 0.0 : dst[0].m;
  while (i < src.size() && j < dst.size()) {
    double t = std::min(ra, rb);
    if (t > 0.0) plan.pairs.push_back({src[i].pos, dst[j].pos, t});
    ra -= t;
    rb -= t;
    if (ra <= tol) {
      if (++i < src.size()) ra = src[i].m;
    }
    if (rb <= tol) {
      if (++j < dst.size()) rb = dst[j].m;
    }
  }
  return plan;
}

std::vector<Piece> pieces_of(const AtomicMeasure& mu) {
  std::vector<Piece> out;
  out.reserve(mu.size());
  for (const auto& a : mu.atoms()) out.push_back({a.x, a.m});
  return out;
}

// Target quantile started at mass offset theta and continued periodically.
MonotonePlan torus_plan_at(const AtomicMeasure& mu, const AtomicMeasure& nu, double theta) {
  const double M = nu.total_mass();
  const double q = std::floor(theta / M);
  double rho = theta - q * M;
  if (rho >= M) rho = 0.0;
  const auto& G = nu.cumulative();
  const auto& at = nu.atoms();
  const std::size_t m = at.size();
  std::size_t j0 = static_cast<std::size_t>(std::upper_bound(G.begin(), G.end(), rho) - G.begin());
  j0 = j0 == 0 ? 0 : j0 - 1;
  if (j0 >= m) j0 = m - 1;
  std::vector<Piece> dst;
  dst.reserve(m + 1);
  dst.push_back({at[j0].x + q, G[j0 + 1] - rho});
  for (std::size_t j = j0 + 1; j < m; ++j) dst.push_back({at[j].x + q, at[j].m});
  for (std::size_t j = 0; j < j0; ++j) dst.push_back({at[j].x + q + 1.0, at[j].m});
  if (rho - G[j0] > 0.0) dst.push_back({at[j0].x + q + 1.0, rho - G[j0]});
  return merge_sequences(pieces_of(mu), dst, M);
}

double first_moment(const AtomicMeasure& mu) {
  double s = 0.0;
  for (const auto& a : mu.atoms()) s += a.m * a.x;
  return s;
}

}  // namespace

double MonotonePlan::total_mass() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.m;
  return s;
}

double MonotonePlan::cost_sq() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.m * (p.y - p.x) * (p.y - p.x);
  return s;
}

bool MonotonePlan::is_monotone(double tol) const {
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].x < pairs[i - 1].x - tol) return false;
    if (pairs[i].y < pairs[i - 1].y - tol) return false;
  }
  return true;
}

WassersteinResult w2_line(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  check_balance(mu, nu);
  WassersteinResult r;
  r.plan = merge_sequences(pieces_of(mu), pieces_of(nu), mu.total_mass());
  r.cost_sq = r.plan.cost_sq();
  return r;
}

double torus_cut_cost(const AtomicMeasure& mu, const AtomicMeasure& nu, double theta) {
  return torus_plan_at(mu, nu, theta).cost_sq();
}

WassersteinResult w2_torus(const AtomicMeasure& mu_in, const AtomicMeasure& nu_in) {
  check_balance(mu_in, nu_in);
  const AtomicMeasure mu = mu_in.periodic() ? mu_in : mu_in.wrapped();
  const AtomicMeasure nu = nu_in.periodic() ? nu_in : nu_in.wrapped();
  const double M = nu.total_mass();
  // The cost is convex and piecewise linear in theta, with kinks where a
  // source breakpoint meets a shifted target breakpoint. Comparing theta with
  // theta +- M confines the minimizer to a window of length M around A.
  const double A = first_moment(mu) - first_moment(nu);
  const double lo = A - 0.5 * M, hi = A + 0.5 * M;
  const double slack = 1e-12 * M;
  const auto& F = mu.cumulative();
  const auto& G = nu.cumulative();
  std::vector<double> cand;
  cand.reserve(mu.size() * nu.size() + 2);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) {
      double base = G[j] - F[i];
      double k = std::ceil((lo - slack - base) / M);
      for (double kk = k; base + kk * M <= hi + slack; kk += 1.0) cand.push_back(base + kk * M);
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  if (cand.empty()) cand.push_back(0.0);

  auto cost = [&](std::size_t idx) { return torus_cut_cost(mu, nu, cand[idx]); };
  std::size_t a = 0, b = cand.size() - 1;
  while (a < b) {
    std::size_t mid = a + (b - a) / 2;
    if (cost(mid) > cost(mid + 1))
      a = mid + 1;
    else
      b = mid;
  }
  const double fmin = cost(a);
  const double tie = 1e-14 * std::max(1.0, fmin);
  auto cut_of = [&](double th) {
    double c = th / M - std::floor(th / M);
    return c >= 1.0 ? 0.0 : c;
  };
  std::size_t best = a;
  auto better = [&](std::size_t idx) {
    double c1 = cut_of(cand[idx]), c0 = cut_of(cand[best]);
    return c1 < c0 || (c1 == c0 && cand[idx] < cand[best]);
  };
  for (std::size_t l = a; l-- > 0;) {
    if (cost(l) > fmin + tie) break;
    if (better(l)) best = l;
  }
  for (std::size_t h = a + 1; h < cand.size(); ++h) {
    if (cost(h) > fmin + tie) break;
    if (better(h)) best = h;
  }
  WassersteinResult r;
  r.plan = torus_plan_at(mu, nu, cand[best]);
  r.cost_sq = r.plan.cost_sq();
  r.cut = cut_of(cand[best]);
  for (const auto& p : r.plan.pairs)
    if (std::fabs(std::fabs(p.y - p.x) - 0.5) <= 1e-12) r.antipodal = true;
  return r;
}

AtomicMeasure interpolate(const MonotonePlan& plan, double lambda, bool periodic) {
  std::vector<Atom> out;
  out.reserve(plan.pairs.size());
  for (const auto& p : plan.pairs) out.push_back({(1.0 - lambda) * p.x + lambda * p.y, p.m});
  return periodic ? AtomicMeasure::canonicalize(std::move(out))
                  : AtomicMeasure::on_line(std::move(out));
}

AtomicMeasure mccann(const AtomicMeasure& mu, const AtomicMeasure& nu, double lambda,
                     Metric metric) {
  if (lambda < 0.0 || lambda > 1.0) throw Error(ErrorCode::InvalidScale, "lambda outside [0,1]");
  if (metric == Metric::Torus) return interpolate(w2_torus(mu, nu).plan, lambda, true);
  return interpolate(w2_line(mu, nu).plan, lambda, mu.periodic() && nu.periodic());
}

double upper_ahlfors_line(const std::vector<Atom>& atoms_in, double alpha,
                          const std::vector<double>& radii) {
  std::vector<Atom> atoms = atoms_in;
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  std::vector<double> xs(atoms.size()), cum(atoms.size() + 1, 0.0);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    xs[i] = atoms[i].x;
    cum[i + 1] = cum[i] + atoms[i].m;
  }
  double best = 0.0;
  for (double r : radii) {
    const double rr = r * (1.0 + 1e-12) + 1e-15;
    const double scale = std::pow(r, -alpha);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto lo = std::lower_bound(xs.begin(), xs.end(), xs[i] - rr) - xs.begin();
      auto hi = std::upper_bound(xs.begin(), xs.end(), xs[i] + rr) - xs.begin();
      best = std::max(best, (cum[hi] - cum[lo]) * scale);
    }
  }
  return best;
}

DisplacementAhlfors displacement_ahlfors(const MonotonePlan& plan, double lambda, double alpha,
                                         const std::vector<double>& radii) {
  if (!plan.is_monotone()) throw Error(ErrorCode::NotMonotone, "plan is not order preserving");
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorCode::InvalidScale, "lambda outside (0,1)");
  std::vector<Atom> src, mid;
  src.reserve(plan.pairs.size());
  mid.reserve(plan.pairs.size());
  for (const auto& p : plan.pairs) {
    src.push_back({p.x, p.m});
    mid.push_back({(1.0 - lambda) * p.x + lambda * p.y, p.m});
  }
  std::vector<double> src_radii = radii;
  for (double r : radii) src_radii.push_back(2.0 * r / (1.0 - lambda));
  return {upper_ahlfors_line(mid, alpha, radii), upper_ahlfors_line(src, alpha, src_radii)};
}

namespace {

AtomicMeasure discretize(const MollifiedMeasure& m, int grid) {
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(grid));
  double sum = 0.0;
  for (int i = 0; i < grid; ++i) {
    double x = (i + 0.5) / grid;
    double w = mollify_eval(m, x) / grid;
    if (w > 0.0) {
      atoms.push_back({x, w});
      sum += w;
    }
  }
  const double target = total_mass(m.base());
  for (auto& a : atoms) a.m *= target / sum;
  return AtomicMeasure::canonicalize(std::move(atoms));
}

double sup_density(const MollifiedMeasure& m, int samples) {
  double best = 0.0;
  for (int i = 0; i < samples; ++i) best = std::max(best, mollify_eval(m, (i + 0.5) / samples));
  return best;
}

}  // namespace

std::pair<double, double> loeper_check(const MollifiedMeasure& mu, const MollifiedMeasure& nu,
                                       int grid) {
  const double eps = std::min(mu.epsilon(), nu.epsilon());
  const int K = static_cast<int>(std::ceil(80.0 / eps));
  Spectrum a = spectrum_of(mu, K, false);
  Spectrum b = spectrum_of(nu, K, false);
  Spectrum d = spectrum_difference(a, b);
  d.re[0] = 0.0;
  // Gradient normalization: sum over k != 0 of |2 pi k|^{-2} |sigma_k|^2.
  const double h1 = hs_norm_sq(d, 1.0).value / (4.0 * std::numbers::pi * std::numbers::pi);
  const double lhs = std::sqrt(std::max(0.0, h1));
  if (lhs == 0.0) return {0.0, 0.0};
  const double sup = std::max(sup_density(mu, 8 * grid), sup_density(nu, 8 * grid));
  const double w = std::sqrt(w2_torus(discretize(mu, grid), discretize(nu, grid)).cost_sq);
  return {lhs, std::sqrt(sup) * w};
}

}  // namespace branchlab
