#include "branchlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <mutex>
#include <limits>
#include <numbers>

#include "branchlab/errors.hpp"
#include "branchlab/simd.hpp"

namespace branchlab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCenterTol = 1e-12;

// k^{-2s} for k = 0..K (index 0 unused). The last table is kept since
// callers tend to hit the same (s, K) repeatedly.
std::vector<double> power_weights(double s, int K) {
  static std::mutex mu;
  static double last_s = -1.0;
  static int last_K = -1;
  static std::vector<double> last;
  std::lock_guard<std::mutex> lock(mu);
  if (s != last_s || K != last_K) {
    last.assign(static_cast<std::size_t>(K) + 1, 0.0);
    for (int k = 1; k <= K; ++k) last[k] = std::pow(static_cast<double>(k), -2.0 * s);
    last_s = s;
    last_K = K;
  }
  return last;
}

void check_centered(const Spectrum& sp) {
  if (sp.re.empty()) throw Error(ErrorCode::NotCentered, "empty spectrum");
  if (std::fabs(sp.re[0]) > kCenterTol || std::fabs(sp.im[0]) > kCenterTol)
    throw Error(ErrorCode::NotCentered, "zero mode is " + std::to_string(sp.re[0]));
}

double sinc_pi(double z) {
  if (std::fabs(z) < 1e-8) return 1.0 - z * z * kPi * kPi / 6.0;
  return std::sin(kPi * z) / (kPi * z);
}

// Bound on sum_{k > K} k^{-2s} rho_hat(eps k)^2 over dyadic shells, using the
// largest sampled |rho_hat| in each shell.
double mollified_shell_sum(long long K, double s, double eps, double amp_pow) {
  double total = 0.0;
  long long lo = K;
  while (eps * static_cast<double>(lo) <= 400.0) {
    long long hi = std::max(lo + 1, 2 * lo);
    double env = 0.0;
    constexpr int kSamples = 64;
    for (int i = 0; i <= kSamples; ++i) {
      double k = static_cast<double>(lo) + (static_cast<double>(hi - lo) * i) / kSamples;
      env = std::max(env, std::fabs(bump::fourier(eps * k)));
    }
    double shell = zeta_tail(lo, 2.0 * s + amp_pow) - zeta_tail(hi, 2.0 * s + amp_pow);
    total += env * env * shell;
    lo = hi;
  }
  return total;
}

}  // namespace

std::complex<double> Spectrum::coeff(int k) const {
  int a = k < 0 ? -k : k;
  if (a > K) return {0.0, 0.0};
  return k < 0 ? std::complex<double>(re[a], -im[a]) : std::complex<double>(re[a], im[a]);
}

double zeta_tail(long long K, double a) {
  constexpr long long kDirect = 1000;
  long double direct = 0.0L;
  long long N = K;
  if (K < kDirect) {
    for (long long k = kDirect; k > K; --k) direct += std::pow(static_cast<long double>(k), -a);
    N = kDirect;
  }
  // Euler-Maclaurin for sum_{k > N} k^{-a}
  const double n = static_cast<double>(N);
  const double f = std::pow(n, -a);
  double em = n * f / (a - 1.0) - 0.5 * f + a * f / (12.0 * n) -
              a * (a + 1) * (a + 2) * f / (720.0 * n * n * n) +
              a * (a + 1) * (a + 2) * (a + 3) * (a + 4) * f / (30240.0 * n * n * n * n * n);
  return static_cast<double>(direct) + em;
}

Spectrum spectrum_of(const AtomicMeasure& mu, int K, bool centered) {
  if (K < 1) throw Error(ErrorCode::InvalidScale, "K must be positive");
  Spectrum sp;
  sp.K = K;
  sp.kind = SourceKind::Atomic;
  sp.re.assign(static_cast<std::size_t>(K) + 1, 0.0);
  sp.im.assign(static_cast<std::size_t>(K) + 1, 0.0);
  const auto& ker = simd::active();
  for (const auto& a : mu.atoms())
    ker.accumulate_phasor(sp.re.data(), sp.im.data(), sp.re.size(), 0, wrap01(a.x), a.m);
  // the zero mode is the mass, without rounding from the kernel
  sp.re[0] = mu.total_mass();
  sp.im[0] = 0.0;
  if (centered) sp.re[0] -= 1.0;
  sp.centered = centered;
  sp.mass_abs = mu.total_mass();
  sp.sum_sq_mass = mu.sum_sq_mass();
  return sp;
}

namespace {

// If the blocks sit at c0 + i/N (i = 0..N-1) with equal masses, returns c0.
std::optional<double> comb_offset(const std::vector<const Block*>& members) {
  const std::size_t N = members.size();
  if (N < 2) return std::nullopt;
  std::vector<double> c;
  c.reserve(N);
  for (const Block* b : members) {
    if (std::fabs(b->mass - members.front()->mass) > 1e-15 * members.front()->mass)
      return std::nullopt;
    c.push_back(wrap01(b->center));
  }
  std::sort(c.begin(), c.end());
  const double step = 1.0 / static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i)
    if (std::fabs(c[i] - (c[0] + static_cast<double>(i) * step)) > 1e-14) return std::nullopt;
  return c[0];
}

}  // namespace

Spectrum spectrum_of(const BlockMeasure& mu, int K, bool centered) {
  if (K < 1) throw Error(ErrorCode::InvalidScale, "K must be positive");
  Spectrum sp;
  sp.K = K;
  sp.kind = SourceKind::Block;
  const std::size_t n = static_cast<std::size_t>(K) + 1;
  sp.re.assign(n, 0.0);
  sp.im.assign(n, 0.0);
  const auto& ker = simd::active();
  // Non-overlapping unit-density blocks of total width 1 are Lebesgue; no tail either.
  double covered = 0.0;
  bool unit_density = true;
  for (const auto& b : mu.blocks()) {
    covered += b.width;
    unit_density = unit_density && std::fabs(b.mass - b.width) <= 1e-12 * b.width;
  }
  if (mu.disjoint() && unit_density && std::fabs(covered - 1.0) <= 1e-12) {
    sp.re[0] = centered ? 0.0 : 1.0;
    sp.centered = centered;
    return sp;
  }
  // Blocks of equal width share the sinc factor, so their phasors are summed first.
  std::map<double, std::vector<const Block*>> groups;
  for (const auto& b : mu.blocks()) groups[b.width].push_back(&b);
  std::vector<double> tre(n), tim(n);
  for (const auto& [w, members] : groups) {
    if (w >= 1.0) {
      // the full torus: only the zero mode survives
      for (const Block* b : members) sp.re[0] += b->mass;
      continue;
    }
    std::fill(tre.begin(), tre.end(), 0.0);
    std::fill(tim.begin(), tim.end(), 0.0);
    if (auto c0 = comb_offset(members)) {
      // equal masses at c0 + i/N: only multiples of N survive
      const std::size_t N = members.size();
      const double mass = members.front()->mass * static_cast<double>(N);
      for (std::size_t k = N; k < n; k += N) {
        double phase = 2.0 * kPi * simd::frac_product(static_cast<double>(k), *c0);
        tre[k] = mass * std::cos(phase);
        tim[k] = mass * std::sin(phase);
      }
    } else {
      for (const Block* b : members)
        ker.accumulate_phasor(tre.data(), tim.data(), n, 0, wrap01(b->center), b->mass);
    }
    for (std::size_t k = 1; k < n; ++k) {
      double f = sinc_pi(static_cast<double>(k) * w);
      sp.re[k] += f * tre[k];
      sp.im[k] += f * tim[k];
    }
    for (const Block* b : members) {
      sp.re[0] += b->mass;
      sp.block_slope += b->mass / (kPi * w);
      sp.block_sq += b->mass * b->mass / (2.0 * kPi * kPi * w * w);
    }
  }
  sp.im[0] = 0.0;
  if (centered) sp.re[0] -= 1.0;
  sp.centered = centered;
  return sp;
}

Spectrum spectrum_of(const MollifiedMeasure& mu, int K, bool centered) {
  Spectrum sp = spectrum_of(mu.base(), K, centered);
  auto rho = bump::fourier_table(mu.epsilon(), K);
  for (int k = 1; k <= K; ++k) {
    sp.re[k] *= rho[k];
    sp.im[k] *= rho[k];
  }
  sp.kind = SourceKind::Mollified;
  sp.mollifier_eps = mu.epsilon();
  return sp;
}

Spectrum spectrum_of(const AnyMeasure& mu, int K, bool centered) {
  return std::visit([&](const auto& m) { return spectrum_of(m, K, centered); }, mu);
}

namespace {

Spectrum combine(const Spectrum& a, const Spectrum& b, double sign) {
  if (a.K != b.K) throw Error(ErrorCode::TruncationMismatch, "spectra have different K");
  Spectrum d = a;
  for (std::size_t k = 0; k < d.re.size(); ++k) {
    d.re[k] += sign * b.re[k];
    d.im[k] += sign * b.im[k];
  }
  d.kind = a.kind == b.kind ? a.kind : SourceKind::Combined;
  d.centered = std::fabs(d.re[0]) <= kCenterTol;
  d.mass_abs = a.mass_abs + b.mass_abs;
  d.sum_sq_mass = a.sum_sq_mass + b.sum_sq_mass;
  d.block_slope = a.block_slope + b.block_slope;
  d.block_sq = a.block_sq + b.block_sq;
  // A shared bump factor survives; otherwise fall back to the raw tail.
  d.mollifier_eps = (a.mollifier_eps == b.mollifier_eps) ? a.mollifier_eps : 0.0;
  return d;
}

}  // namespace

Spectrum spectrum_difference(const Spectrum& a, const Spectrum& b) { return combine(a, b, -1.0); }
Spectrum spectrum_sum(const Spectrum& a, const Spectrum& b) { return combine(a, b, 1.0); }

NormReport hs_norm_sq(const Spectrum& sp, double s) {
  check_centered(sp);
  NormReport r;
  r.K = sp.K;
  const auto w = power_weights(s, sp.K);
  const std::size_t n = static_cast<std::size_t>(sp.K);
  r.truncated = 2.0 * simd::active().weighted_power_sum(w.data() + 1, sp.re.data() + 1,
                                                        sp.im.data() + 1, n);
  const long long K = sp.K;
  const bool has_atoms = sp.mass_abs > 0.0;
  const bool has_blocks = sp.block_slope > 0.0;
  if (sp.mollifier_eps > 0.0) {
    const double A = sp.mass_abs;
    const double B = sp.block_slope;
    double bound = 0.0;
    if (has_atoms) bound += A * A * mollified_shell_sum(K, s, sp.mollifier_eps, 0.0);
    if (has_blocks) {
      bound += 2.0 * A * B * mollified_shell_sum(K, s, sp.mollifier_eps, 1.0);
      bound += B * B * mollified_shell_sum(K, s, sp.mollifier_eps, 2.0);
    }
    r.tail_bound = 2.0 * bound;
    r.value = r.truncated;
    return r;
  }
  if (has_atoms && s <= 0.5) {
    r.infinite = true;
    r.value = std::numeric_limits<double>::infinity();
    r.tail_bound = std::numeric_limits<double>::infinity();
    return r;
  }
  double est = 0.0, bound = 0.0;
  if (has_atoms) {
    const double z = zeta_tail(K, 2.0 * s);
    est += 2.0 * sp.sum_sq_mass * z;
    bound += 2.0 * sp.mass_abs * sp.mass_abs * z;
    if (has_blocks) bound += 4.0 * sp.mass_abs * sp.block_slope * zeta_tail(K, 2.0 * s + 1.0);
  }
  if (has_blocks) {
    const double z2 = zeta_tail(K, 2.0 * s + 2.0);
    est += 2.0 * sp.block_sq * z2;
    bound += 2.0 * sp.block_slope * sp.block_slope * z2;
  }
  r.value = r.truncated + est;
  r.tail_bound = bound;
  return r;
}

double hs_inner(const Spectrum& a, const Spectrum& b, double s) {
  if (a.K != b.K) throw Error(ErrorCode::TruncationMismatch, "spectra have different K");
  check_centered(a);
  check_centered(b);
  const auto w = power_weights(s, a.K);
  const std::size_t n = static_cast<std::size_t>(a.K);
  return 2.0 * simd::active().weighted_dot(w.data() + 1, a.re.data() + 1, a.im.data() + 1,
                                           b.re.data() + 1, b.im.data() + 1, n);
}

std::vector<double> hs_gradient(const std::vector<Atom>& atoms, double s, int K) {
  const std::size_t n = static_cast<std::size_t>(K) + 1;
  std::vector<double> re(n, 0.0), im(n, 0.0);
  const auto& ker = simd::active();
  for (const auto& a : atoms) ker.accumulate_phasor(re.data(), im.data(), n, 0, wrap01(a.x), a.m);
  std::vector<double> kw(n, 0.0);
  const auto w = power_weights(s, K);
  for (std::size_t k = 1; k < n; ++k) kw[k] = static_cast<double>(k) * w[k];
  std::vector<double> c(n), sn(n);
  std::vector<double> grad;
  grad.reserve(atoms.size());
  for (const auto& a : atoms) {
    std::fill(c.begin(), c.end(), 0.0);
    std::fill(sn.begin(), sn.end(), 0.0);
    ker.accumulate_phasor(c.data(), sn.data(), n, 0, wrap01(a.x), 1.0);
    // sum_k k w_k (im_k cos - re_k sin)
    double g = ker.weighted_wedge(kw.data() + 1, c.data() + 1, sn.data() + 1, re.data() + 1,
                                  im.data() + 1, n - 1);
    grad.push_back(8.0 * kPi * a.m * g);
  }
  return grad;
}

double hs_truncated_raw(const std::vector<Atom>& atoms, double s, int K) {
  const std::size_t n = static_cast<std::size_t>(K) + 1;
  std::vector<double> re(n, 0.0), im(n, 0.0);
  const auto& ker = simd::active();
  for (const auto& a : atoms) ker.accumulate_phasor(re.data(), im.data(), n, 0, wrap01(a.x), a.m);
  const auto w = power_weights(s, K);
  return 2.0 * ker.weighted_power_sum(w.data() + 1, re.data() + 1, im.data() + 1, n - 1);
}

std::vector<MollificationRatio> mollification_error_ratio(const AnyMeasure& mu, double s,
                                                          double gamma,
                                                          const std::vector<double>& eps_list,
                                                          int K) {
  if (!(gamma > 0.0 && gamma <= s))
    throw Error(ErrorCode::InvalidScale, "gamma must lie in (0, s]");
  Spectrum sp = spectrum_of(mu, K, true);
  NormReport den = hs_norm_sq(sp, gamma);
  if (den.infinite) throw Error(ErrorCode::InfiniteNorm, "denominator norm diverges");
  std::vector<MollificationRatio> out;
  for (double eps : eps_list) {
    if (den.value <= 0.0) {
      out.push_back({eps, 0.0});
      continue;
    }
    Spectrum diff = sp;
    auto rho = bump::fourier_table(eps, K);
    for (int k = 1; k <= K; ++k) {
      diff.re[k] *= 1.0 - rho[k];
      diff.im[k] *= 1.0 - rho[k];
    }
    // (1 - rho_hat) is close to 1 beyond K, so the raw tail model still applies
    NormReport num = hs_norm_sq(diff, s);
    out.push_back({eps, std::sqrt(num.value) / (std::pow(eps, s - gamma) * std::sqrt(den.value))});
  }
  return out;
}

namespace {

// rho_hat on a uniform grid with 4-point Lagrange interpolation; accurate to
// about 1e-9, which is plenty for quadrature in eps.
double fourier_interp(double xi) {
  constexpr double kStep = 1.0 / 64.0;
  constexpr double kMax = 400.0;
  static const std::vector<double> table = [] {
    std::size_t n = static_cast<std::size_t>(kMax / kStep) + 4;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = bump::fourier(static_cast<double>(i) * kStep);
    return t;
  }();
  xi = std::fabs(xi);
  if (xi >= kMax) return 0.0;
  double u = xi / kStep;
  std::size_t i = static_cast<std::size_t>(u);
  if (i < 1) i = 1;
  double t = u - static_cast<double>(i);
  double p0 = table[i - 1], p1 = table[i], p2 = table[i + 1], p3 = table[i + 2];
  return p0 * (-t * (t - 1) * (t - 2) / 6.0) + p1 * ((t + 1) * (t - 1) * (t - 2) / 2.0) +
         p2 * (-(t + 1) * t * (t - 2) / 2.0) + p3 * ((t + 1) * t * (t - 1) / 6.0);
}

}  // namespace

std::pair<double, double> characterization2_lhs_rhs(const AnyMeasure& mu, double s, int K,
                                                    int quad_nodes) {
  if (quad_nodes < 2) throw Error(ErrorCode::InvalidScale, "need at least two nodes");
  Spectrum sp = spectrum_of(mu, K, true);
  NormReport n = hs_norm_sq(sp, s);
  const double lhs = n.truncated;
  if (lhs == 0.0) return {0.0, 0.0};
  std::vector<double> pw(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) pw[k] = sp.re[k] * sp.re[k] + sp.im[k] * sp.im[k];
  // eps from well below 1/K up to the largest admissible mollifier scale
  const double lo = std::log(1e-3 / K), hi = std::log(0.5);
  const double h = (hi - lo) / (quad_nodes - 1);
  double rhs = 0.0;
  for (int q = 0; q < quad_nodes; ++q) {
    double eps = std::exp(lo + h * q);
    double l2 = 0.0;
    for (int k = 1; k <= K; ++k) {
      double xi = eps * k;
      if (xi >= 400.0) break;
      double r = fourier_interp(xi);
      l2 += r * r * pw[k];
    }
    double wq = (q == 0 || q == quad_nodes - 1) ? 0.5 * h : h;
    rhs += wq * std::pow(eps, 2.0 * s) * 2.0 * l2;
  }
  return {lhs, rhs};
}

}  // namespace branchlab
