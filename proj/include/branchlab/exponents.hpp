#pragma once

#include <optional>
#include <string>

#include <boost/rational.hpp>

namespace branchlab {

using Rational = boost::rational<long long>;

// Closest fraction with denominator at most max_den (continued fractions).
Rational to_rational(double x, long long max_den = 1000000);
double to_double(const Rational& r);
std::string to_string(const Rational& r);

// Conjectured boundary dimension: min(d - 2s + 2 beta_c/(1 + beta_c), d).
// For d = 1 this is min(4(1 - s)/3, 1).
Rational alpha_bar(const Rational& s, int d = 1);
// (d + 2s) / (3d + 2(1 - s))
Rational beta_c(const Rational& s, int d = 1);
// (2s - 1 + alpha) / (2(1 - s) + 1 - alpha); OutOfValidity unless alpha > 1 - 2s.
Rational beta_reg(const Rational& s, const Rational& alpha);
// (2 - alpha) / (2 + alpha)
Rational beta_con(const Rational& alpha);
// Bounds on the boundary dimension implied by a local exponent beta.
Rational dim_lower_bound(const Rational& s, const Rational& beta, int d = 1);
Rational dim_upper_bound(const Rational& beta, int d = 1);

struct ExponentTable {
  Rational s;
  int d = 1;
  Rational alpha_bar;
  Rational beta_c;
  std::optional<Rational> alpha;
  std::optional<Rational> beta_reg;  // needs alpha > 1 - 2s
  std::optional<Rational> beta_con;
  std::optional<Rational> beta;
  std::optional<Rational> dim_lower;
  std::optional<Rational> dim_upper;
};

// Throws OutOfValidity when alpha <= 1 - 2s, InvalidScale on bad s, d or beta.
ExponentTable exponent_table(const Rational& s, int d = 1,
                             std::optional<Rational> alpha = std::nullopt,
                             std::optional<Rational> beta = std::nullopt);

}  // namespace branchlab
