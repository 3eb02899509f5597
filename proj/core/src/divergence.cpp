#include "fvi/divergence.hpp"

#include <algorithm>
#include <cmath>

#include "fvi/errors.hpp"
#include "fvi/generator_checks.hpp"

namespace fvi {

namespace {

constexpr double kLogLo = -740.0;
constexpr double kLogHi = 700.0;

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace

std::string to_string(Direction d) { return d == Direction::reverse ? "reverse" : "forward"; }

Direction parse_direction(std::string_view s) {
  if (s == "reverse") return Direction::reverse;
  if (s == "forward") return Direction::forward;
  throw ConfigError("unknown direction '" + std::string(s) + "' (expected reverse|forward)");
}

std::string to_string(HomogeneityTag t) {
  switch (t) {
    case HomogeneityTag::F0: return "F0";
    case HomogeneityTag::F1: return "F1";
    default: return "Unclassified";
  }
}

std::string to_string(Monotone m) { return m == Monotone::increasing ? "increasing" : "decreasing"; }

std::size_t MonotonicityMap::locate(double t) const {
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (pieces[i].range.contains(t)) return i;
  return pieces.empty() ? 0 : pieces.size() - 1;
}

std::optional<std::size_t> MonotonicityMap::unique_piece(Monotone d) const {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i].direction != d) continue;
    if (found) return std::nullopt;
    found = i;
  }
  return found;
}

bool MonotonicityMap::monotone_on(double a, double b, Monotone d) const {
  if (a > b) std::swap(a, b);
  for (const auto& p : pieces) {
    const bool overlaps = a <= p.range.hi && b > p.range.lo;
    if (!overlaps) continue;
    if (p.direction != d) return false;
  }
  return true;
}

double GeneratorSide::at_log(double s) const {
  if (s == -kInf) return limit_at_zero;
  return log_value(s);
}

std::pair<double, double> GeneratorSide::piece_range(std::size_t piece) const {
  const auto& p = monotonicity.pieces.at(piece);
  const double a = p.range.lo <= 0.0 ? limit_at_zero : value(p.range.lo);
  const double b = std::isinf(p.range.hi) ? log_value(kLogHi) : value(p.range.hi);
  return {std::min(a, b), std::max(a, b)};
}

std::optional<double> GeneratorSide::inverse(double y, std::size_t piece) const {
  if (!std::isfinite(y)) return std::nullopt;
  const auto& p = monotonicity.pieces.at(piece);
  if (p.inverse) {
    double t;
    try {
      t = p.inverse(y);
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (!std::isfinite(t) || t < 0.0) return std::nullopt;
    const double slack = 1e-12 * std::max(1.0, t);
    if (t < p.range.lo - slack || t > p.range.hi + slack) return std::nullopt;
    return t;
  }
  // Bisection in u = log t over the piece, clamped to representable range.
  double a = p.range.lo <= 0.0 ? kLogLo : std::log(p.range.lo);
  double b = std::isinf(p.range.hi) ? kLogHi : std::log(p.range.hi);
  a = std::max(a, kLogLo);
  b = std::min(b, kLogHi);
  const double sgn = p.direction == Monotone::increasing ? 1.0 : -1.0;
  double fa = sgn * (log_value(a) - y);
  double fb = sgn * (log_value(b) - y);
  if (p.range.lo <= 0.0 && std::isfinite(limit_at_zero)) fa = sgn * (limit_at_zero - y);
  if (fa > 0.0 || fb < 0.0) {
    if (std::abs(fa) <= 1e-14 * std::max(1.0, std::abs(y))) return std::exp(a);
    if (std::abs(fb) <= 1e-14 * std::max(1.0, std::abs(y))) return std::exp(b);
    return std::nullopt;
  }
  for (int it = 0; it < 400 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    const double m = 0.5 * (a + b);
    const double fm = sgn * (log_value(m) - y);
    if (fm < 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  return std::exp(0.5 * (a + b));
}

MonotonicityMap analyze_monotonicity(const ScalarFn& log_deriv) {
  constexpr int kGrid = 8001;
  constexpr double kS0 = -40.0;
  constexpr double kS1 = 40.0;
  const double ds = (kS1 - kS0) / (kGrid - 1);

  std::vector<double> breaks;
  std::vector<int> dirs;
  int current = 0;
  double prev_s = kS0;
  for (int i = 0; i < kGrid; ++i) {
    const double s = kS0 + ds * i;
    const int sg = sign_of(log_deriv(s));
    if (sg == 0) continue;
    if (current == 0) {
      current = sg;
      dirs.push_back(sg);
    } else if (sg != current) {
      double a = prev_s, b = s;
      for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (a + b);
        if (sign_of(log_deriv(m)) == current) {
          a = m;
        } else {
          b = m;
        }
      }
      breaks.push_back(std::exp(0.5 * (a + b)));
      current = sg;
      dirs.push_back(sg);
    }
    prev_s = s;
  }
  if (dirs.empty()) dirs.push_back(1);

  MonotonicityMap map;
  double lo = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const double hi = i < breaks.size() ? breaks[i] : kInf;
    map.pieces.push_back(
        {{lo, hi}, dirs[i] > 0 ? Monotone::increasing : Monotone::decreasing, {}});
    lo = hi;
  }
  return map;
}

GeneratorSide derive_dual_side(const GeneratorSide& side) {
  GeneratorSide out;
  out.value = [v = side.value](double t) { return t * v(1.0 / t); };
  out.deriv = [v = side.value, d = side.deriv](double t) {
    const double u = 1.0 / t;
    return v(u) - u * d(u);
  };
  out.log_value = [lv = side.log_value](double s) { return std::exp(s) * lv(-s); };
  out.log_deriv = [lv = side.log_value, ld = side.log_deriv](double s) {
    return std::exp(s) * (lv(-s) - ld(-s));
  };
  out.domain.lo = std::isinf(side.domain.hi) ? 0.0 : 1.0 / side.domain.hi;
  out.domain.hi = side.domain.lo <= 0.0 ? kInf : 1.0 / side.domain.lo;
  out.limit_at_zero = std::exp(-kLogHi) * side.log_value(kLogHi);
  for (double k : side.kinks) out.kinks.push_back(1.0 / k);
  std::reverse(out.kinks.begin(), out.kinks.end());
  out.monotonicity = analyze_monotonicity(out.log_deriv);
  return out;
}

DivergenceGenerator make_dual(const DivergenceGenerator& g) {
  if (g.domain_note) {
    throw ConfigError("make_dual: generator '" + g.name + "' is restricted (" + *g.domain_note +
                      "); the restriction is not closed under t -> 1/t, so the dual is undefined");
  }
  DivergenceGenerator d;
  d.name = "dual(" + g.name + ")";
  d.params = g.params;
  d.primal = g.dual;
  d.dual = g.primal;
  switch (g.homogeneity.tag) {
    case HomogeneityTag::F0: d.homogeneity = {HomogeneityTag::F1, 1.0 - g.homogeneity.gamma}; break;
    case HomogeneityTag::F1: d.homogeneity = {HomogeneityTag::F0, 1.0 - g.homogeneity.gamma}; break;
    default: d.homogeneity = {};
  }
  return d;
}

DivergenceGenerator make_surrogate(const DivergenceGenerator& g, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ConfigError("make_surrogate: lambda must be a positive finite number");
  const double log_lambda = std::log(lambda);
  const double f_lambda = g.primal.value(lambda);

  DivergenceGenerator s;
  s.name = "surrogate(" + g.name + ", " + std::to_string(lambda) + ")";
  s.params = g.params;
  s.params["lambda"] = lambda;
  s.domain_note = g.domain_note;

  // f_l(t) = f(l t) - f(l)
  GeneratorSide& p = s.primal;
  const GeneratorSide& gp = g.primal;
  p.value = [v = gp.value, lambda, f_lambda](double t) { return v(lambda * t) - f_lambda; };
  p.deriv = [d = gp.deriv, lambda](double t) { return lambda * d(lambda * t); };
  p.log_value = [lv = gp.log_value, log_lambda, f_lambda](double u) {
    return lv(u + log_lambda) - f_lambda;
  };
  p.log_deriv = [ld = gp.log_deriv, log_lambda](double u) { return ld(u + log_lambda); };
  p.domain = {gp.domain.lo / lambda, gp.domain.hi / lambda};
  p.limit_at_zero = gp.limit_at_zero - f_lambda;
  for (double k : gp.kinks) p.kinks.push_back(k / lambda);
  for (const auto& piece : gp.monotonicity.pieces) {
    MonotonePiece np{{piece.range.lo / lambda, piece.range.hi / lambda}, piece.direction, {}};
    if (piece.inverse) {
      np.inverse = [inv = piece.inverse, lambda, f_lambda](double y) {
        return inv(y + f_lambda) / lambda;
      };
    }
    p.monotonicity.pieces.push_back(std::move(np));
  }
  if (gp.shape == SideShape::power) {
    // c((l t)^b - 1) - c(l^b - 1) = c l^b (t^b - 1)
    p.shape = SideShape::power;
    p.power_exponent = gp.power_exponent;
    p.power_scale = gp.power_scale * std::pow(lambda, gp.power_exponent);
  }

  // f_l*(t) = l f*(t / l) - t f(l)
  GeneratorSide& d = s.dual;
  const GeneratorSide& gd = g.dual;
  d.value = [v = gd.value, lambda, f_lambda](double t) {
    return lambda * v(t / lambda) - t * f_lambda;
  };
  d.deriv = [dd = gd.deriv, lambda, f_lambda](double t) { return dd(t / lambda) - f_lambda; };
  d.log_value = [lv = gd.log_value, lambda, log_lambda, f_lambda](double u) {
    return lambda * lv(u - log_lambda) - std::exp(u) * f_lambda;
  };
  d.log_deriv = [ld = gd.log_deriv, lambda, log_lambda, f_lambda](double u) {
    return lambda * ld(u - log_lambda) - std::exp(u) * f_lambda;
  };
  d.domain = {gd.domain.lo * lambda, gd.domain.hi * lambda};
  d.limit_at_zero = lambda * gd.limit_at_zero;
  for (double k : gd.kinks) d.kinks.push_back(k * lambda);
  if (f_lambda == 0.0) {
    for (const auto& piece : gd.monotonicity.pieces) {
      MonotonePiece np{{piece.range.lo * lambda, piece.range.hi * lambda}, piece.direction, {}};
      if (piece.inverse) {
        np.inverse = [inv = piece.inverse, lambda](double y) { return lambda * inv(y / lambda); };
      }
      d.monotonicity.pieces.push_back(std::move(np));
    }
  } else {
    d.monotonicity = analyze_monotonicity(d.log_deriv);
  }

  // Keep the class of g only if the decomposition survives the shift.
  s.homogeneity = g.homogeneity;
  if (s.homogeneity.tag != HomogeneityTag::Unclassified &&
      homogeneity_residual(s.primal, s.homogeneity) > kHomogeneityTolerance) {
    s.homogeneity = {};
  }
  return s;
}

DivergenceGenerator make_generator(std::string name, ScalarFn f, ScalarFn f_prime, Interval domain) {
  DivergenceGenerator g;
  g.name = std::move(name);
  GeneratorSide& p = g.primal;
  p.value = f;
  p.deriv = f_prime;
  p.log_value = [f](double s) { return f(std::exp(s)); };
  p.log_deriv = [f_prime](double s) {
    const double t = std::exp(s);
    return f_prime(t) * t;
  };
  p.domain = domain;
  p.limit_at_zero = f(0.0);
  if (std::isnan(p.limit_at_zero)) p.limit_at_zero = f(std::numeric_limits<double>::denorm_min());
  p.monotonicity = analyze_monotonicity(p.log_deriv);
  g.dual = derive_dual_side(p);
  return g;
}

}  // namespace fvi
