#include "branchlab/measure.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "branchlab/errors.hpp"

namespace branchlab {

double wrap01(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0 - kMergeTol) w = 0.0;
  return w;
}

double torus_dist(double a, double b) {
  double d = std::fabs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
  double s = 0.0, c = 0.0;
  void add(double v) {
    double t = s + v;
    if (std::fabs(s) >= std::fabs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace

AtomicMeasure AtomicMeasure::build(std::vector<Atom> raw, bool periodic) {
  if (raw.empty()) throw Error(ErrorCode::EmptyMeasure, "no atoms");
  for (const auto& a : raw) {
    if (!(a.m > 0.0) || !std::isfinite(a.m))
      throw Error(ErrorCode::InvalidMass, "atom mass must be positive and finite");
    if (!std::isfinite(a.x)) throw Error(ErrorCode::InvalidMass, "atom position not finite");
  }
  if (periodic)
    for (auto& a : raw) a.x = wrap01(a.x);
  std::stable_sort(raw.begin(), raw.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });

  AtomicMeasure mu;
  mu.periodic_ = periodic;
  mu.atoms_.reserve(raw.size());
  for (const auto& a : raw) {
    if (!mu.atoms_.empty() && a.x - mu.atoms_.back().x <= kMergeTol)
      mu.atoms_.back().m += a.m;
    else
      mu.atoms_.push_back(a);
  }
  mu.cum_.assign(mu.atoms_.size() + 1, 0.0);
  CompensatedSum acc;
  for (std::size_t i = 0; i < mu.atoms_.size(); ++i) {
    acc.add(mu.atoms_[i].m);
    mu.cum_[i + 1] = acc.value();
  }
  mu.total_ = acc.value();
  return mu;
}

AtomicMeasure AtomicMeasure::canonicalize(std::vector<Atom> raw) { return build(std::move(raw), true); }
AtomicMeasure AtomicMeasure::on_line(std::vector<Atom> raw) { return build(std::move(raw), false); }

double AtomicMeasure::sum_sq_mass() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.m * a.m;
  return s;
}

double AtomicMeasure::barycenter() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.m * a.x;
  return s / total_;
}

double AtomicMeasure::mass_in(double a, double b) const {
  if (b < a || atoms_.empty()) return 0.0;
  auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), a,
                             [](const Atom& at, double v) { return at.x < v; });
  auto hi = std::upper_bound(atoms_.begin(), atoms_.end(), b,
                             [](double v, const Atom& at) { return v < at.x; });
  std::size_t i = static_cast<std::size_t>(lo - atoms_.begin());
  std::size_t j = static_cast<std::size_t>(hi - atoms_.begin());
  if (j <= i) return 0.0;
  return cum_[j] - cum_[i];
}

AtomicMeasure AtomicMeasure::wrapped() const {
  if (periodic_) return *this;
  return canonicalize(atoms_);
}

BlockMeasure BlockMeasure::make(std::vector<Block> blocks) {
  BlockMeasure mu = superpose(std::move(blocks));
  if (!mu.disjoint_) throw Error(ErrorCode::OverlappingBlocks, "blocks intersect");
  return mu;
}

BlockMeasure BlockMeasure::superpose(std::vector<Block> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyMeasure, "no blocks");
  for (auto& b : blocks) {
    if (!(b.mass > 0.0) || !std::isfinite(b.mass))
      throw Error(ErrorCode::InvalidMass, "block mass must be positive");
    if (!(b.width > 0.0) || b.width > 1.0 + 1e-12)
      throw Error(ErrorCode::InvalidScale, "block width must lie in (0,1]");
    b.width = std::min(b.width, 1.0);
    b.center = wrap01(b.center);
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const Block& a, const Block& b) { return a.center < b.center; });
  const double tol = 1e-12;
  bool disjoint = true;
  for (std::size_t i = 0; i < blocks.size() && disjoint; ++i) {
    const Block& a = blocks[i];
    const Block& b = blocks[(i + 1) % blocks.size()];
    double gap = b.center - a.center;
    if (i + 1 == blocks.size()) gap += 1.0;
    if (blocks.size() == 1) gap = 1.0;
    if (gap + tol < 0.5 * (a.width + b.width)) disjoint = false;
  }
  BlockMeasure mu;
  mu.disjoint_ = disjoint;
  mu.blocks_ = std::move(blocks);
  CompensatedSum acc;
  for (const auto& b : mu.blocks_) acc.add(b.mass);
  mu.total_ = acc.value();
  return mu;
}

BlockMeasure BlockMeasure::lebesgue() { return make({{0.5, 1.0, 1.0}}); }

double BlockMeasure::sum_sq_mass() const {
  double s = 0.0;
  for (const auto& b : blocks_) s += b.mass * b.mass;
  return s;
}

double total_mass(const AnyMeasure& mu) {
  return std::visit([](const auto& m) { return m.total_mass(); }, mu);
}

MollifiedMeasure MollifiedMeasure::make(AnyMeasure base, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw Error(ErrorCode::InvalidScale, "mollifier scale must lie in (0, 1/2)");
  MollifiedMeasure m;
  m.base_ = std::move(base);
  m.eps_ = epsilon;
  return m;
}

namespace bump {
namespace {

double raw(double x) {
  double q = 1.0 - x * x;
  if (q <= 0.0) return 0.0;
  return std::exp(-1.0 / q);
}

struct Tables {
  double c = 0.0;
  static constexpr int kCdfCells = 8192;
  double h = 0.0;
  std::vector<double> F;    // cdf at nodes
  std::vector<double> rho;  // density at nodes
  static constexpr int kFourierNodes = 8192;  // on [0,1]
  std::vector<double> fw;   // trapezoid weights times density

  Tables() {
    using boost::math::quadrature::gauss;
    using boost::math::quadrature::gauss_kronrod;
    double integral = gauss_kronrod<double, 61>::integrate(raw, -1.0, 1.0, 15, 1e-15);
    c = 1.0 / integral;
    h = 2.0 / kCdfCells;
    F.assign(kCdfCells + 1, 0.0);
    rho.assign(kCdfCells + 1, 0.0);
    CompensatedSum acc;
    for (int i = 0; i <= kCdfCells; ++i) {
      double x = -1.0 + i * h;
      rho[i] = c * raw(x);
      if (i > 0) {
        double a = x - h;
        acc.add(c * gauss<double, 15>::integrate(raw, a, x));
      }
      F[i] = acc.value();
    }
    double hf = 1.0 / kFourierNodes;
    fw.assign(kFourierNodes, 0.0);
    for (int j = 0; j < kFourierNodes; ++j) {
      double w = (j == 0) ? 0.5 : 1.0;
      fw[j] = 2.0 * hf * w * c * raw(j * hf);
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

double normalization() { return tables().c; }

double value(double x) { return tables().c * raw(x); }

double derivative(double x) {
  double q = 1.0 - x * x;
  if (q <= 0.0) return 0.0;
  return tables().c * std::exp(-1.0 / q) * (-2.0 * x / (q * q));
}

double cdf(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const Tables& t = tables();
  double pos = (u + 1.0) / t.h;
  int i = std::min(static_cast<int>(pos), Tables::kCdfCells - 1);
  double s = pos - i;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * t.F[i] + h10 * t.h * t.rho[i] + h01 * t.F[i + 1] + h11 * t.h * t.rho[i + 1];
}

double fourier(double xi) {
  xi = std::fabs(xi);
  if (xi == 0.0) return 1.0;
  // |rho_hat(xi)| < 1e-30 beyond this point.
  if (xi > 400.0) return 0.0;
  const Tables& t = tables();
  const int n = Tables::kFourierNodes;
  const double step = 2.0 * std::numbers::pi * xi / n;
  double acc = 0.0;
  constexpr int kReseed = 128;
  const double cr = std::cos(step), sr = std::sin(step);
  for (int j0 = 0; j0 < n; j0 += kReseed) {
    double c = std::cos(step * j0), s = std::sin(step * j0);
    int j1 = std::min(n, j0 + kReseed);
    for (int j = j0; j < j1; ++j) {
      acc += t.fw[j] * c;
      double c2 = c * cr - s * sr;
      s = s * cr + c * sr;
      c = c2;
    }
  }
  return acc;
}

std::vector<double> fourier_table(double eps, int K) {
  std::vector<double> out(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 0; k <= K; ++k) {
    double xi = eps * k;
    if (xi > 400.0) break;
    out[k] = fourier(xi);
  }
  return out;
}

}  // namespace bump

AtomicMeasure pushforward(const AtomicMeasure& mu, const std::function<double(double)>& f) {
  std::vector<Atom> img;
  img.reserve(mu.size());
  for (const auto& a : mu.atoms()) img.push_back({f(a.x), a.m});
  return mu.periodic() ? AtomicMeasure::canonicalize(std::move(img))
                       : AtomicMeasure::on_line(std::move(img));
}

double mollify_eval(const MollifiedMeasure& m, double x) {
  const double eps = m.epsilon();
  x = wrap01(x);
  if (const auto* at = std::get_if<AtomicMeasure>(&m.base())) {
    double s = 0.0;
    for (const auto& a : at->atoms()) {
      double d = x - a.x;
      d -= std::round(d);
      if (std::fabs(d) < eps) s += a.m * bump::value(d / eps) / eps;
    }
    return s;
  }
  const auto& bl = std::get<BlockMeasure>(m.base());
  double s = 0.0;
  for (const auto& b : bl.blocks()) {
    double dens = b.mass / b.width;
    for (int n = -1; n <= 1; ++n) {
      double a = b.center - 0.5 * b.width + n;
      double e = b.center + 0.5 * b.width + n;
      if (x + eps <= a || x - eps >= e) continue;
      s += dens * (bump::cdf((x - a) / eps) - bump::cdf((x - e) / eps));
    }
  }
  return s;
}

double ball_mass(const AtomicMeasure& mu, double x, double r) {
  const double reff = r * (1.0 + 1e-12) + kMergeTol;
  if (!mu.periodic()) return mu.mass_in(x - reff, x + reff);
  if (2.0 * reff >= 1.0) return mu.total_mass();
  x = wrap01(x);
  double a = x - reff, b = x + reff;
  double m = mu.mass_in(std::max(a, 0.0), std::min(b, 1.0));
  if (a < 0.0) m += mu.mass_in(a + 1.0, 1.0);
  if (b > 1.0) m += mu.mass_in(0.0, b - 1.0);
  return m;
}

double ball_mass(const BlockMeasure& mu, double x, double r) {
  if (2.0 * r >= 1.0) return mu.total_mass();
  x = wrap01(x);
  double m = 0.0;
  for (const auto& b : mu.blocks()) {
    double len = 0.0;
    for (int n = -1; n <= 1; ++n) {
      double lo = std::max(b.center - 0.5 * b.width + n, x - r);
      double hi = std::min(b.center + 0.5 * b.width + n, x + r);
      if (hi > lo) len += hi - lo;
    }
    m += b.mass * std::min(len, b.width) / b.width;
  }
  return m;
}

double ball_mass(const AnyMeasure& mu, double x, double r) {
  return std::visit([&](const auto& m) { return ball_mass(m, x, r); }, mu);
}

}  // namespace branchlab
