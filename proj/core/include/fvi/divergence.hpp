#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fvi/numeric.hpp"

namespace fvi {

using ScalarFn = std::function<double(double)>;
using ParamMap = std::map<std::string, double>;

// Half-open interval (lo, hi] on the positive reals.
struct Interval {
  double lo = 0.0;
  double hi = kInf;

  bool contains(double t) const { return t > lo && t <= hi; }
};

enum class Monotone { increasing, decreasing };

struct MonotonePiece {
  Interval range;
  Monotone direction = Monotone::increasing;
  ScalarFn inverse;  // closed form on this piece; empty means bisection
};

// Ordered, disjoint pieces covering (0, inf).
struct MonotonicityMap {
  std::vector<MonotonePiece> pieces;

  std::size_t locate(double t) const;
  bool is_global(Monotone d) const { return pieces.size() == 1 && pieces[0].direction == d; }
  // Index of the only piece running in direction d, if exactly one exists.
  std::optional<std::size_t> unique_piece(Monotone d) const;
  // True when no direction change happens strictly inside [a, b].
  bool monotone_on(double a, double b, Monotone d) const;
};

enum class SideShape { generic, power, negative_log };

// One member of a dual pair: the generator f or its dual f*. Every map is
// also available on log scale so density ratios can stay in log space until
// the last step.
struct GeneratorSide {
  ScalarFn value;      // phi(t)
  ScalarFn deriv;      // phi'(t)
  ScalarFn log_value;  // s -> phi(exp(s))
  ScalarFn log_deriv;  // s -> phi'(exp(s)) * exp(s)
  Interval domain;     // where phi is convex
  MonotonicityMap monotonicity;
  double limit_at_zero = kNaN;  // phi(0+)
  std::vector<double> kinks;    // deriv returns a subgradient there

  // shape == power: phi(t) = power_scale * (t^power_exponent - 1)
  SideShape shape = SideShape::generic;
  double power_scale = 0.0;
  double power_exponent = 0.0;

  // phi(exp(s)) with the documented limit for s = -inf.
  double at_log(double s) const;
  // Range of phi over a piece as (inf, sup); endpoints may be limits.
  std::pair<double, double> piece_range(std::size_t piece) const;
  // Inverse of phi restricted to a piece; nullopt when y is outside its range.
  std::optional<double> inverse(double y, std::size_t piece) const;
};

enum class HomogeneityTag { F0, F1, Unclassified };

struct HomogeneityClass {
  HomogeneityTag tag = HomogeneityTag::Unclassified;
  double gamma = 0.0;
};

struct DivergenceGenerator {
  std::string name;
  ParamMap params;
  GeneratorSide primal;  // f
  GeneratorSide dual;    // f*
  HomogeneityClass homogeneity;
  std::optional<std::string> domain_note;
  // Maps D_f to the reported divergence (Renyi); empty means identity.
  ScalarFn post_transform;

  double f(double t) const { return primal.value(t); }
  double f_dual(double t) const { return dual.value(t); }
  double f_prime(double t) const { return primal.deriv(t); }
  double f_dual_prime(double t) const { return dual.deriv(t); }
  std::optional<double> f_dual_inverse(double y, std::size_t piece) const {
    return dual.inverse(y, piece);
  }
  const MonotonicityMap& dual_monotonicity() const { return dual.monotonicity; }
  double report(double d) const { return post_transform ? post_transform(d) : d; }
};

enum class Direction { reverse, forward };

std::string to_string(Direction d);
Direction parse_direction(std::string_view s);
std::string to_string(HomogeneityTag t);
std::string to_string(Monotone m);

// Reverse bounds integrate f*(p/q) under q, forward bounds f(p/q).
inline const GeneratorSide& bound_side(const DivergenceGenerator& g, Direction d) {
  return d == Direction::reverse ? g.dual : g.primal;
}

DivergenceGenerator make_dual(const DivergenceGenerator& g);
DivergenceGenerator make_surrogate(const DivergenceGenerator& g, double lambda);

// User-supplied generator from f and f'. The dual is derived as t f(1/t),
// monotonicity found numerically, homogeneity left Unclassified.
DivergenceGenerator make_generator(std::string name, ScalarFn f, ScalarFn f_prime,
                                   Interval domain = {});

// Side t -> t phi(1/t) built from an existing side.
GeneratorSide derive_dual_side(const GeneratorSide& side);

// Sign-change scan of phi' over (0, inf); pieces carry no closed-form inverse.
MonotonicityMap analyze_monotonicity(const ScalarFn& log_deriv);

DivergenceGenerator registry_lookup(std::string_view name, const ParamMap& params = {});
std::vector<std::string> registry_names();

// Principal branch of the Lambert W function, t >= -1/e.
double lambert_w(double t);

}  // namespace fvi
