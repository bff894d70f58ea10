#pragma once

#include <functional>
#include <variant>
#include <vector>

namespace branchlab {

struct Atom {
  double x;
  double m;
};

// Atoms within this distance of each other (after wrapping) are the same point.
inline constexpr double kMergeTol = 1e-15;

double wrap01(double x);
// min over integer shifts of |a - b - n|
double torus_dist(double a, double b);

class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  // Wraps positions into [0,1), sorts, merges coincident atoms.
  static AtomicMeasure canonicalize(std::vector<Atom> raw);
  // Same, but positions are kept as given (unwrapped line coordinates).
  static AtomicMeasure on_line(std::vector<Atom> raw);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double total_mass() const { return total_; }
  bool periodic() const { return periodic_; }
  // cumulative()[i] = mass of atoms 0..i-1; size n+1.
  const std::vector<double>& cumulative() const { return cum_; }
  double sum_sq_mass() const;
  double barycenter() const;

  // Mass of atoms with position in [a, b] (stored coordinates, no wrapping).
  double mass_in(double a, double b) const;

  AtomicMeasure wrapped() const;

 private:
  static AtomicMeasure build(std::vector<Atom> raw, bool periodic);
  std::vector<Atom> atoms_;
  std::vector<double> cum_;
  double total_ = 0.0;
  bool periodic_ = true;
};

struct Block {
  double center;
  double width;
  double mass;
};

class BlockMeasure {
 public:
  BlockMeasure() = default;
  // Blocks must be pairwise disjoint on the torus (touching is allowed).
  static BlockMeasure make(std::vector<Block> blocks);
  // Sum of uniform pieces that may overlap (terminal measures of superposed
  // patterns). Same validation as make except the disjointness check.
  static BlockMeasure superpose(std::vector<Block> blocks);
  static BlockMeasure lebesgue();

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  double total_mass() const { return total_; }
  double sum_sq_mass() const;
  bool disjoint() const { return disjoint_; }

 private:
  std::vector<Block> blocks_;
  double total_ = 0.0;
  bool disjoint_ = true;
};

using AnyMeasure = std::variant<AtomicMeasure, BlockMeasure>;

double total_mass(const AnyMeasure& mu);

class MollifiedMeasure {
 public:
  // epsilon must lie in (0, 1/2).
  static MollifiedMeasure make(AnyMeasure base, double epsilon);
  const AnyMeasure& base() const { return base_; }
  double epsilon() const { return eps_; }

 private:
  AnyMeasure base_;
  double eps_ = 0.1;
};

// Standard bump rho_1(x) = c exp(-1/(1-x^2)) on (-1,1), normalized to unit mass.
namespace bump {
double normalization();  // c
double value(double x);
double derivative(double x);
double cdf(double u);  // integral of rho_1 over (-1, u)
// Real Fourier transform: integral of rho_1(x) cos(2 pi xi x) dx.
double fourier(double xi);
// fourier(eps * k) for k = 0..K.
std::vector<double> fourier_table(double eps, int K);
}  // namespace bump

AtomicMeasure pushforward(const AtomicMeasure& mu, const std::function<double(double)>& f);

// Density of the periodic convolution rho_eps * base at x.
double mollify_eval(const MollifiedMeasure& m, double x);

// Mass of the closed periodic ball of radius r around x.
double ball_mass(const AtomicMeasure& mu, double x, double r);
double ball_mass(const BlockMeasure& mu, double x, double r);
double ball_mass(const AnyMeasure& mu, double x, double r);

}  // namespace branchlab
