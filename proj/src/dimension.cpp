#include "branchlab/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "branchlab/errors.hpp"
#include "branchlab/spectral.hpp"

namespace branchlab {

namespace {

std::pair<double, double> line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

}  // namespace

std::vector<double> support_points(const AnyMeasure& mu) {
  std::vector<double> pts;
  if (const auto* a = std::get_if<AtomicMeasure>(&mu)) {
    for (const Atom& at : a->atoms())
      if (at.m > 0.0) pts.push_back(at.x);
  } else {
    for (const Block& b : std::get<BlockMeasure>(mu).blocks()) {
      if (!(b.mass > 0.0)) continue;
      pts.push_back(b.center - 0.5 * b.width);
      pts.push_back(b.center);
      pts.push_back(b.center + 0.5 * b.width);
    }
  }
  return pts;
}

AhlforsEstimate ahlfors_fit(const AnyMeasure& mu, AhlforsDirection dir,
                            const std::vector<double>& radii,
                            const std::vector<double>& alpha_grid) {
  std::vector<double> pts = support_points(mu);
  if (pts.empty()) throw Error(ErrorCode::EmptyMeasure, "measure has empty support");
  if (radii.size() < 2) throw Error(ErrorCode::InvalidScale, "need at least two radii");
  for (double r : radii)
    if (!(r > 0.0 && r <= 0.5)) throw Error(ErrorCode::InvalidScale, fmt::format("radius {}", r));
  const bool upper = dir == AhlforsDirection::Upper;
  AhlforsEstimate est;
  est.direction = dir;
  est.radii_used = radii;
  est.r_min = *std::min_element(radii.begin(), radii.end());
  // masses[i][j]: ball of radius radii[i] around pts[j]
  std::vector<std::vector<double>> masses(radii.size(), std::vector<double>(pts.size()));
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    double ext = upper ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      double m = ball_mass(mu, pts[j], radii[i]);
      masses[i][j] = m;
      ext = upper ? std::max(ext, m) : std::min(ext, m);
    }
    est.extremal_mass.push_back(ext);
    lx.push_back(std::log(radii[i]));
    ly.push_back(std::log(ext));
  }
  est.alpha = line_fit(lx, ly).first;
  auto M_at = [&](double a, bool take_max) {
    double v = take_max ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < radii.size(); ++i) {
      double ra = std::pow(radii[i], a);
      for (double m : masses[i]) v = take_max ? std::max(v, m / ra) : std::min(v, m / ra);
    }
    return v;
  };
  est.M_upper = M_at(est.alpha, true);
  est.M_lower = M_at(est.alpha, false);
  est.alpha_grid = alpha_grid;
  for (double a : alpha_grid) est.M_of_alpha.push_back(M_at(a, upper));
  return est;
}

BoxDimension box_dimension(const AnyMeasure& mu, const std::vector<int>& depths, int base) {
  if (depths.size() < 2) throw Error(ErrorCode::InvalidScale, "need at least two depths");
  if (base < 2) throw Error(ErrorCode::InvalidScale, "base must be at least 2");
  BoxDimension out;
  out.depths = depths;
  std::vector<double> lx, ly;
  for (int j : depths) {
    if (j < 0 || j > 40) throw Error(ErrorCode::InvalidScale, fmt::format("depth {}", j));
    const double cells = std::pow(static_cast<double>(base), j);
    std::set<long long> occupied;
    long long count = 0;
    if (const auto* a = std::get_if<AtomicMeasure>(&mu)) {
      for (const Atom& at : a->atoms())
        if (at.m > 0.0) {
          auto c = static_cast<long long>(std::floor(wrap01(at.x) * cells));
          occupied.insert(std::min(c, static_cast<long long>(cells) - 1));
        }
      count = static_cast<long long>(occupied.size());
    } else {
      // cells meeting a block in positive length, merged across blocks
      std::vector<std::pair<long long, long long>> ranges;
      for (const Block& b : std::get<BlockMeasure>(mu).blocks()) {
        if (!(b.mass > 0.0)) continue;
        double lo = b.center - 0.5 * b.width, hi = b.center + 0.5 * b.width;
        if (b.width >= 1.0) {
          ranges.push_back({0, static_cast<long long>(cells) - 1});
          continue;
        }
        auto first = static_cast<long long>(std::floor(lo * cells + 1e-9));
        auto last = static_cast<long long>(std::ceil(hi * cells - 1e-9)) - 1;
        last = std::max(last, first);
        const auto n = static_cast<long long>(cells);
        for (long long c = first; c <= last;) {
          long long w = ((c % n) + n) % n;
          long long run = std::min(last - c, n - 1 - w);
          ranges.push_back({w, w + run});
          c += run + 1;
        }
      }
      std::sort(ranges.begin(), ranges.end());
      long long reach = -1;
      for (auto [a, b] : ranges) {
        if (a > reach) {
          count += b - a + 1;
        } else if (b > reach) {
          count += b - reach;
        }
        reach = std::max(reach, b);
      }
    }
    out.counts.push_back(count);
    lx.push_back(j * std::log(static_cast<double>(base)));
    ly.push_back(std::log(static_cast<double>(std::max<long long>(count, 1))));
  }
  out.value = line_fit(lx, ly).first;
  out.r_min = std::pow(static_cast<double>(base), -*std::max_element(depths.begin(), depths.end()));
  return out;
}

FrostmanResult frostman_proxy(const AnyMeasure& mu, const std::vector<double>& gamma_grid, int K,
                              double threshold, double min_decay) {
  constexpr int kAvg = 4;
  if (K < 8) throw Error(ErrorCode::InvalidScale, "K must be at least 8");
  int levels = 0;
  while ((1 << levels) < K) ++levels;
  const int Kp = 1 << levels;
  Spectrum sp = spectrum_of(mu, Kp, true);
  std::vector<double> power(static_cast<std::size_t>(Kp) + 1), logk(power.size());
  for (int k = 1; k <= Kp; ++k) {
    power[k] = sp.re[k] * sp.re[k] + sp.im[k] * sp.im[k];
    logk[k] = std::log(static_cast<double>(k));
  }
  FrostmanResult res;
  res.K = Kp;
  res.threshold = threshold;
  res.min_decay = min_decay;
  for (double g : gamma_grid) {
    // shell j covers 2^{j-1} < k <= 2^j
    std::vector<double> shell(static_cast<std::size_t>(levels) + 1, 0.0);
    shell[0] = 2.0 * power[1];
    for (int j = 1; j <= levels; ++j)
      for (int k = (1 << (j - 1)) + 1; k <= (1 << j); ++k)
        shell[j] += 2.0 * std::exp(-2.0 * g * logk[k]) * power[k];
    // Tail ratio q averaged over the last kAvg shells. Decay slower than
    // min_decay (log2 per doubling) is treated as divergence.
    auto estimate = [&](int J) {
      double partial = 0.0;
      for (int j = 0; j <= J; ++j) partial += shell[j];
      if (shell[J] == 0.0) return partial;
      const int back = std::min(kAvg, J);
      double q = shell[J - back] > 0.0 ? std::pow(shell[J] / shell[J - back], 1.0 / back)
                                       : std::numeric_limits<double>::infinity();
      if (q >= std::exp2(-min_decay)) return std::numeric_limits<double>::infinity();
      return partial + shell[J] * q / (1.0 - q);
    };
    FrostmanEntry e{g, estimate(levels), 1.0, false};
    double prev = estimate(levels - 1);
    if (std::isinf(e.norm)) {
      e.divergent = true;
      e.ratio = std::numeric_limits<double>::infinity();
    } else if (prev > 0.0 && std::isfinite(prev)) {
      e.ratio = e.norm / prev;
      e.divergent = e.ratio > threshold;
    }
    res.entries.push_back(e);
    if (e.divergent) res.gamma_star = std::max(res.gamma_star, g);
  }
  res.estimate = std::max(0.0, 1.0 - 2.0 * res.gamma_star);
  return res;
}

AtomicMeasure cantor_atoms(int depth) {
  if (depth < 0 || depth > 24) throw Error(ErrorCode::InvalidScale, "cantor depth");
  std::vector<double> left{0.0};
  double w = 1.0;
  for (int d = 0; d < depth; ++d) {
    w /= 3.0;
    std::vector<double> next;
    next.reserve(left.size() * 2);
    for (double x : left) {
      next.push_back(x);
      next.push_back(x + 2.0 * w);
    }
    left.swap(next);
  }
  std::vector<Atom> atoms;
  const double m = 1.0 / static_cast<double>(left.size());
  for (double x : left) atoms.push_back({x + 0.5 * w, m});
  return AtomicMeasure::canonicalize(atoms);
}

BlockMeasure cantor_blocks(int depth) {
  AtomicMeasure a = cantor_atoms(depth);
  const double w = std::pow(3.0, -depth);
  std::vector<Block> blocks;
  for (const Atom& at : a.atoms()) blocks.push_back({at.x, w, at.m});
  return BlockMeasure::make(blocks);
}

}  // namespace branchlab
