#include <cmath>
#include <set>

#include "fvi/divergence.hpp"
#include "fvi/errors.hpp"

namespace fvi {

namespace {

constexpr double kInvE = 0.36787944117144232160;

// phi(t) = c (t^b - 1)
GeneratorSide power_side(double c, double b) {
  GeneratorSide s;
  s.value = [c, b](double t) { return c * std::expm1(b * std::log(t)); };
  s.deriv = [c, b](double t) { return c * b * std::pow(t, b - 1.0); };
  s.log_value = [c, b](double u) { return c * std::expm1(b * u); };
  s.log_deriv = [c, b](double u) { return c * b * std::exp(b * u); };
  s.limit_at_zero = b > 0.0 ? -c : (c > 0.0 ? kInf : -kInf);
  s.shape = SideShape::power;
  s.power_scale = c;
  s.power_exponent = b;
  const Monotone dir = c * b > 0.0 ? Monotone::increasing : Monotone::decreasing;
  s.monotonicity.pieces.push_back(
      {{0.0, kInf}, dir, [c, b](double y) { return std::pow(1.0 + y / c, 1.0 / b); }});
  return s;
}

// Dual of power_side: phi(t) = c (t^(1-b) - t)
GeneratorSide power_dual_side(double c, double b) {
  GeneratorSide s;
  const double a = 1.0 - b;
  s.value = [c, a](double t) { return c * (std::pow(t, a) - t); };
  s.deriv = [c, a](double t) { return c * (a * std::pow(t, a - 1.0) - 1.0); };
  s.log_value = [c, a](double u) { return c * (std::exp(a * u) - std::exp(u)); };
  s.log_deriv = [c, a](double u) { return c * (a * std::exp(a * u) - std::exp(u)); };
  if (a > 0.0) {
    s.limit_at_zero = 0.0;
  } else if (a == 0.0) {
    s.limit_at_zero = c;
  } else {
    s.limit_at_zero = c > 0.0 ? kInf : -kInf;
  }
  if (a <= 0.0) {
    // Derivative c (a t^(a-1) - 1) has the sign of -c everywhere.
    s.monotonicity.pieces.push_back(
        {{0.0, kInf}, c > 0.0 ? Monotone::decreasing : Monotone::increasing, {}});
  } else {
    // Turning point where a t^(a-1) = 1, i.e. t = a^(1/b).
    const double t_star = std::pow(a, 1.0 / b);
    const Monotone first =
        s.deriv(0.5 * t_star) > 0.0 ? Monotone::increasing : Monotone::decreasing;
    const Monotone second =
        first == Monotone::increasing ? Monotone::decreasing : Monotone::increasing;
    s.monotonicity.pieces.push_back({{0.0, t_star}, first, {}});
    s.monotonicity.pieces.push_back({{t_star, kInf}, second, {}});
  }
  s.shape = SideShape::generic;
  return s;
}

GeneratorSide t_log_t_side() {
  GeneratorSide s;
  s.value = [](double t) { return t == 0.0 ? 0.0 : t * std::log(t); };
  s.deriv = [](double t) { return 1.0 + std::log(t); };
  s.log_value = [](double u) { return std::isinf(u) && u < 0 ? 0.0 : std::exp(u) * u; };
  s.log_deriv = [](double u) { return (1.0 + u) * std::exp(u); };
  s.limit_at_zero = 0.0;
  s.monotonicity.pieces.push_back({{0.0, kInvE}, Monotone::decreasing, {}});
  // t log t = y on t >= 1/e: t = y / W(y) = exp(W(y)).
  s.monotonicity.pieces.push_back(
      {{kInvE, kInf}, Monotone::increasing, [](double y) { return std::exp(lambert_w(y)); }});
  return s;
}

GeneratorSide neg_log_side() {
  GeneratorSide s;
  s.value = [](double t) { return -std::log(t); };
  s.deriv = [](double t) { return -1.0 / t; };
  s.log_value = [](double u) { return -u; };
  s.log_deriv = [](double) { return -1.0; };
  s.limit_at_zero = kInf;
  s.shape = SideShape::negative_log;
  s.monotonicity.pieces.push_back(
      {{0.0, kInf}, Monotone::decreasing, [](double y) { return std::exp(-y); }});
  return s;
}

GeneratorSide total_variation_side() {
  GeneratorSide s;
  s.value = [](double t) { return std::abs(t - 1.0); };
  // Subgradient 0 at the kink t = 1.
  s.deriv = [](double t) { return t > 1.0 ? 1.0 : (t < 1.0 ? -1.0 : 0.0); };
  s.log_value = [](double u) { return std::abs(std::expm1(u)); };
  s.log_deriv = [](double u) { return u > 0.0 ? std::exp(u) : (u < 0.0 ? -std::exp(u) : 0.0); };
  s.limit_at_zero = 1.0;
  s.kinks = {1.0};
  s.monotonicity.pieces.push_back(
      {{0.0, 1.0}, Monotone::decreasing, [](double y) { return 1.0 - y; }});
  s.monotonicity.pieces.push_back(
      {{1.0, kInf}, Monotone::increasing, [](double y) { return 1.0 + y; }});
  return s;
}

// F(u) = -u^3/6 - u^2/2 - u - 1 and F'(u) = -u^2/2 - u - 1.
double c1_F(double u) { return -u * u * u / 6.0 - u * u / 2.0 - u - 1.0; }
double c1_dF(double u) { return -u * u / 2.0 - u - 1.0; }

// f*(t) = F(log t + t0) - F(t0); strictly decreasing since F' < 0.
GeneratorSide c1_dual_side(double t0) {
  GeneratorSide s;
  const double F0 = c1_F(t0);
  s.value = [t0, F0](double t) { return c1_F(std::log(t) + t0) - F0; };
  s.deriv = [t0](double t) { return c1_dF(std::log(t) + t0) / t; };
  s.log_value = [t0, F0](double u) { return c1_F(u + t0) - F0; };
  s.log_deriv = [t0](double u) { return c1_dF(u + t0); };
  s.limit_at_zero = kInf;
  s.monotonicity.pieces.push_back({{0.0, kInf}, Monotone::decreasing, {}});
  return s;
}

// f(t) = t f*(1/t) = t (F(t0 - log t) - F(t0)); f'(t) = -(t0 - log t)^3/6 - F(t0).
GeneratorSide c1_primal_side(double t0) {
  GeneratorSide s;
  const double F0 = c1_F(t0);
  s.value = [t0, F0](double t) { return t == 0.0 ? 0.0 : t * (c1_F(t0 - std::log(t)) - F0); };
  s.deriv = [t0, F0](double t) {
    const double u = t0 - std::log(t);
    return -u * u * u / 6.0 - F0;
  };
  s.log_value = [t0, F0](double v) { return std::exp(v) * (c1_F(t0 - v) - F0); };
  s.log_deriv = [t0, F0](double v) {
    const double u = t0 - v;
    return std::exp(v) * (-u * u * u / 6.0 - F0);
  };
  s.limit_at_zero = 0.0;
  // f' = 0 at u^3 = -6 F(t0); f decreasing below that t, increasing above.
  const double u_star = std::cbrt(-6.0 * F0);
  const double t_star = std::exp(t0 - u_star);
  s.monotonicity.pieces.push_back({{0.0, t_star}, Monotone::decreasing, {}});
  s.monotonicity.pieces.push_back({{t_star, kInf}, Monotone::increasing, {}});
  return s;
}

// f*(t) = log^2 t + log t, convex on (0, 1) only.
GeneratorSide c2_dual_side() {
  GeneratorSide s;
  s.value = [](double t) {
    const double u = std::log(t);
    return u * u + u;
  };
  s.deriv = [](double t) { return (2.0 * std::log(t) + 1.0) / t; };
  s.log_value = [](double u) { return u * u + u; };
  s.log_deriv = [](double u) { return 2.0 * u + 1.0; };
  s.domain = {0.0, 1.0};
  s.limit_at_zero = kInf;
  const double t_min = std::exp(-0.5);
  s.monotonicity.pieces.push_back({{0.0, t_min}, Monotone::decreasing, [](double y) {
                                     return std::exp((-1.0 - std::sqrt(1.0 + 4.0 * y)) / 2.0);
                                   }});
  s.monotonicity.pieces.push_back({{t_min, kInf}, Monotone::increasing, [](double y) {
                                     return std::exp((-1.0 + std::sqrt(1.0 + 4.0 * y)) / 2.0);
                                   }});
  return s;
}

// f(t) = t (log^2 t - log t), convex on (1, inf).
GeneratorSide c2_primal_side() {
  GeneratorSide s;
  s.value = [](double t) {
    if (t == 0.0) return 0.0;
    const double u = std::log(t);
    return t * (u * u - u);
  };
  s.deriv = [](double t) {
    const double u = std::log(t);
    return u * u + u - 1.0;
  };
  s.log_value = [](double u) { return std::exp(u) * (u * u - u); };
  s.log_deriv = [](double u) { return std::exp(u) * (u * u + u - 1.0); };
  s.domain = {1.0, kInf};
  s.limit_at_zero = 0.0;
  const double r1 = std::exp((-1.0 - std::sqrt(5.0)) / 2.0);
  const double r2 = std::exp((-1.0 + std::sqrt(5.0)) / 2.0);
  s.monotonicity.pieces.push_back({{0.0, r1}, Monotone::increasing, {}});
  s.monotonicity.pieces.push_back({{r1, r2}, Monotone::decreasing, {}});
  s.monotonicity.pieces.push_back({{r2, kInf}, Monotone::increasing, {}});
  return s;
}

double take(const ParamMap& params, const std::string& key, std::set<std::string>& used,
            std::optional<double> fallback = std::nullopt) {
  auto it = params.find(key);
  if (it == params.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing divergence parameter '" + key + "'");
  }
  used.insert(key);
  if (!std::isfinite(it->second))
    throw ConfigError("divergence parameter '" + key + "' must be finite");
  return it->second;
}

void reject_unused(std::string_view name, const ParamMap& params, const std::set<std::string>& used) {
  for (const auto& [k, v] : params)
    if (!used.count(k))
      throw ConfigError("divergence '" + std::string(name) + "' does not take parameter '" + k + "'");
}

DivergenceGenerator hellinger(double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0)
    throw ConfigError("hellinger/renyi alpha must be positive and different from 1");
  DivergenceGenerator g;
  const double c = 1.0 / (alpha - 1.0);
  g.primal = power_side(c, alpha);
  g.dual = power_dual_side(c, alpha);
  g.homogeneity = {HomogeneityTag::F0, alpha};
  g.params = {{"alpha", alpha}};
  return g;
}

}  // namespace

std::vector<std::string> registry_names() {
  return {"kl_reverse",      "kl_forward",      "chi_n",     "hellinger_alpha",
          "renyi_alpha",     "total_variation", "custom_c1", "custom_c2"};
}

DivergenceGenerator registry_lookup(std::string_view name, const ParamMap& params) {
  std::set<std::string> used;
  DivergenceGenerator g;
  if (name == "kl_reverse" || name == "kl") {
    g.name = "kl_reverse";
    g.primal = t_log_t_side();
    g.dual = neg_log_side();
    g.homogeneity = {HomogeneityTag::F1, 1.0};
  } else if (name == "kl_forward") {
    g.name = "kl_forward";
    g.primal = neg_log_side();
    g.dual = t_log_t_side();
    g.homogeneity = {HomogeneityTag::F0, 0.0};
  } else if (name == "chi_n") {
    const double n = take(params, "n", used);
    if (n >= 0.0 && n < 1.0)
      throw ConfigError("chi_n requires n outside [0, 1) (got " + std::to_string(n) + ")");
    g.name = "chi_n";
    g.primal = power_side(1.0, n);
    g.dual = power_dual_side(1.0, n);
    g.homogeneity = {HomogeneityTag::F0, n};
    g.params = {{"n", n}};
  } else if (name == "hellinger_alpha") {
    g = hellinger(take(params, "alpha", used));
    g.name = "hellinger_alpha";
  } else if (name == "renyi_alpha") {
    const double alpha = take(params, "alpha", used);
    g = hellinger(alpha);
    g.name = "renyi_alpha";
    g.post_transform = [alpha](double h) { return std::log1p((alpha - 1.0) * h) / (alpha - 1.0); };
  } else if (name == "total_variation") {
    g.name = "total_variation";
    g.primal = total_variation_side();
    g.dual = total_variation_side();
  } else if (name == "custom_c1") {
    const double t0 = take(params, "t0", used, 0.0);
    g.name = "custom_c1";
    g.primal = c1_primal_side(t0);
    g.dual = c1_dual_side(t0);
    g.params = {{"t0", t0}};
  } else if (name == "custom_c2") {
    g.name = "custom_c2";
    g.primal = c2_primal_side();
    g.dual = c2_dual_side();
    g.domain_note = "convex only on (0,1)";
  } else {
    throw ConfigError("unknown divergence '" + std::string(name) + "'");
  }
  reject_unused(name, params, used);
  return g;
}

}  // namespace fvi
