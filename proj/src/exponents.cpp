#include "branchlab/exponents.hpp"

#include <cmath>

#include <fmt/format.h>

#include "branchlab/errors.hpp"

namespace branchlab {

Rational to_rational(double x, long long max_den) {
  if (!std::isfinite(x)) throw Error(ErrorCode::InvalidScale, "non-finite value");
  // convergents h/k of the continued fraction of x
  long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double y = x;
  for (int i = 0; i < 64; ++i) {
    double a = std::floor(y);
    auto ai = static_cast<long long>(a);
    long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    double frac = y - a;
    if (frac < 1e-15) break;
    y = 1.0 / frac;
  }
  return Rational(h1, k1);
}

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return fmt::format("{}", r.numerator());
  return fmt::format("{}/{}", r.numerator(), r.denominator());
}

namespace {

void check_s(const Rational& s, int d) {
  if (!(s > 0 && s < 1)) throw Error(ErrorCode::InvalidScale, "s must lie in (0, 1)");
  if (d < 1) throw Error(ErrorCode::InvalidScale, "d must be positive");
}

}  // namespace

Rational beta_c(const Rational& s, int d) {
  check_s(s, d);
  return (Rational(d) + 2 * s) / (Rational(3 * d) + 2 * (1 - s));
}

Rational alpha_bar(const Rational& s, int d) {
  Rational b = beta_c(s, d);
  Rational a = Rational(d) - 2 * s + 2 * b / (1 + b);
  return a < Rational(d) ? a : Rational(d);
}

Rational beta_reg(const Rational& s, const Rational& alpha) {
  check_s(s, 1);
  if (!(alpha > 1 - 2 * s))
    throw Error(ErrorCode::OutOfValidity,
                fmt::format("beta_reg needs alpha > 1 - 2s (alpha={}, s={})", to_string(alpha),
                            to_string(s)));
  return (2 * s - 1 + alpha) / (2 * (1 - s) + 1 - alpha);
}

Rational beta_con(const Rational& alpha) {
  if (!(alpha > 0 && alpha <= 1)) throw Error(ErrorCode::InvalidScale, "alpha must lie in (0, 1]");
  return (2 - alpha) / (2 + alpha);
}

Rational dim_lower_bound(const Rational& s, const Rational& beta, int d) {
  check_s(s, d);
  return Rational(d) - 2 * s + 2 * beta / (1 + beta);
}

Rational dim_upper_bound(const Rational& beta, int d) {
  if (d < 1) throw Error(ErrorCode::InvalidScale, "d must be positive");
  return 2 * Rational(d) * (1 - beta) / (1 + beta);
}

ExponentTable exponent_table(const Rational& s, int d, std::optional<Rational> alpha,
                             std::optional<Rational> beta) {
  ExponentTable t;
  t.s = s;
  t.d = d;
  t.beta_c = beta_c(s, d);
  t.alpha_bar = alpha_bar(s, d);
  if (alpha) {
    if (!(*alpha > 0 && *alpha <= Rational(d)))
      throw Error(ErrorCode::InvalidScale, "alpha must lie in (0, d]");
    t.alpha = alpha;
    t.beta_reg = beta_reg(s, *alpha);
    if (*alpha <= 1) t.beta_con = beta_con(*alpha);
  }
  if (beta) {
    if (!(*beta > 0 && *beta < 1)) throw Error(ErrorCode::InvalidScale, "beta must lie in (0, 1)");
    t.beta = beta;
    t.dim_lower = dim_lower_bound(s, *beta, d);
    t.dim_upper = dim_upper_bound(*beta, d);
  }
  return t;
}

}  // namespace branchlab
