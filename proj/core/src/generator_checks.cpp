#include "fvi/generator_checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fvi/random.hpp"

namespace fvi {

namespace {

double scaled(double err, double scale) { return err / std::max(1.0, scale); }

bool near_kink(const GeneratorSide& s, double t) {
  for (double k : s.kinks)
    if (std::abs(t - k) <= 1e-3 * std::max(1.0, k)) return true;
  return false;
}

std::vector<std::pair<double, double>> sample_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::vector<std::pair<double, double>> out(n);
  const double span = std::log(100.0);
  for (auto& [a, b] : out) {
    a = 0.1 * std::exp(span * uniform01(rng));
    b = 0.1 * std::exp(span * uniform01(rng));
  }
  return out;
}

std::string fmt_t(double t) {
  std::ostringstream os;
  os.precision(6);
  os << t;
  return os.str();
}

}  // namespace

bool InvariantReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::vector<double> validity_grid(const Interval& domain, std::size_t n) {
  double lo = domain.lo <= 0.0 ? 1e-3 : domain.lo * (1.0 + 1e-3);
  double hi = std::isinf(domain.hi) ? 1e3 : domain.hi * (1.0 - 1e-3);
  if (domain.lo > 0.0 && std::isinf(domain.hi)) hi = std::max(1e3, 1e3 * domain.lo);
  if (domain.lo <= 0.0 && !std::isinf(domain.hi)) lo = std::min(1e-3, 1e-3 * domain.hi);
  std::vector<double> grid(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return grid;
}

double homogeneity_residual(const GeneratorSide& f, const HomogeneityClass& c, std::size_t pairs,
                            std::uint64_t seed) {
  if (c.tag == HomogeneityTag::Unclassified) return kNaN;
  const bool eta = c.tag == HomogeneityTag::F1;
  double worst = 0.0;
  for (auto [t, u] : sample_pairs(pairs, seed)) {
    const double lhs = f.value(t * u);
    const double a = std::pow(t, c.gamma) * f.value(u);
    const double b = f.value(t) * (eta ? u : 1.0);
    const double err = std::abs(lhs - (a + b));
    if (!std::isfinite(err)) return kInf;
    worst = std::max(worst, scaled(err, std::max({std::abs(lhs), std::abs(a), std::abs(b)})));
  }
  return worst;
}

HomogeneityClass classify_homogeneity(const GeneratorSide& f) {
  const auto pairs = sample_pairs(200, 11);
  for (HomogeneityTag tag : {HomogeneityTag::F0, HomogeneityTag::F1}) {
    const bool eta = tag == HomogeneityTag::F1;
    // t^g = (f(t u) - f(t) u^eta) / f(u): regress log of the ratio on log t.
    double sxx = 0.0, sxy = 0.0;
    std::size_t used = 0;
    for (auto [t, u] : pairs) {
      const double fu = f.value(u);
      const double lt = std::log(t);
      if (std::abs(fu) < 1e-8 || std::abs(lt) < 1e-3) continue;
      const double ratio = (f.value(t * u) - f.value(t) * (eta ? u : 1.0)) / fu;
      if (!(ratio > 0.0) || !std::isfinite(ratio)) continue;
      sxx += lt * lt;
      sxy += lt * std::log(ratio);
      ++used;
    }
    if (used < 10) continue;
    HomogeneityClass c{tag, sxy / sxx};
    if (homogeneity_residual(f, c) <= kHomogeneityTolerance) return c;
  }
  return {};
}

InvariantReport check_generator(const DivergenceGenerator& g, std::size_t grid_points) {
  InvariantReport rep;
  rep.subject = g.name;

  // Normalization at t = 1.
  {
    InvariantResult r{"normalization f(1)=f*(1)=0", true, 0.0, 1e-12, ""};
    r.max_error = std::max(std::abs(g.f(1.0)), std::abs(g.f_dual(1.0)));
    r.passed = r.max_error <= r.tolerance;
    rep.add(r);
  }

  struct SideRef {
    const GeneratorSide* side;
    const GeneratorSide* other;
    const char* label;
  };
  const SideRef sides[] = {{&g.primal, &g.dual, "f"}, {&g.dual, &g.primal, "f*"}};

  for (const auto& [side, other, label] : sides) {
    const std::string L = label;
    const auto grid = validity_grid(side->domain, grid_points);

    // Midpoint convexity on consecutive triples.
    InvariantResult cvx{"convexity of " + L, true, 0.0, 1e-9, ""};
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      const double t1 = grid[i - 1], t2 = grid[i], t3 = grid[i + 1];
      const double f1 = side->value(t1), f2 = side->value(t2), f3 = side->value(t3);
      const double w = (t3 - t2) / (t3 - t1);
      const double interp = w * f1 + (1.0 - w) * f3;
      const double excess = scaled(f2 - interp, std::max({std::abs(f1), std::abs(f2), std::abs(f3)}));
      if (excess > cvx.max_error) {
        cvx.max_error = excess;
        if (excess > cvx.tolerance) cvx.detail = "violated at t=" + fmt_t(t2);
      }
    }
    cvx.passed = cvx.max_error <= cvx.tolerance;
    rep.add(cvx);

    // The other member of the pair equals t * this(1/t) (duality and, applied
    // from the other side, involution).
    InvariantResult dual{L == "f" ? "duality f*(t)=t f(1/t)" : "involution (f*)*=f", true, 0.0,
                         1e-10, ""};
    for (double t : validity_grid(Interval{}, grid_points)) {
      const double want = t * side->value(1.0 / t);
      const double got = other->value(t);
      dual.max_error = std::max(dual.max_error, scaled(std::abs(want - got), std::abs(want)));
    }
    dual.passed = dual.max_error <= dual.tolerance;
    rep.add(dual);

    // Analytic derivative vs central differences.
    InvariantResult der{"derivative of " + L + " vs central differences", true, 0.0, 1e-6, ""};
    for (double t : grid) {
      if (near_kink(*side, t)) continue;
      const double h = 1e-5 * t;
      const double fd = (side->value(t + h) - side->value(t - h)) / (2.0 * h);
      const double an = side->deriv(t);
      const double scale = std::max({std::abs(an), std::abs(side->value(t)) / t, 1e-8});
      const double err = std::abs(fd - an) / scale;
      if (err > der.max_error) {
        der.max_error = err;
        if (err > der.tolerance) der.detail = "worst at t=" + fmt_t(t);
      }
    }
    der.passed = der.max_error <= der.tolerance;
    rep.add(der);

    // Log-scale forms agree with the direct ones.
    InvariantResult logf{"log-scale forms of " + L, true, 0.0, 1e-12, ""};
    for (double t : grid) {
      const double s = std::log(t);
      const double e1 = scaled(std::abs(side->log_value(s) - side->value(t)), std::abs(side->value(t)));
      const double e2 = scaled(std::abs(side->log_deriv(s) - t * side->deriv(t)), std::abs(t * side->deriv(t)));
      logf.max_error = std::max({logf.max_error, e1, e2});
    }
    logf.passed = logf.max_error <= 1e-10;
    logf.tolerance = 1e-10;
    rep.add(logf);

    // Monotonicity map: ordered cover of (0, inf), directions match the sign of
    // finite differences away from the breakpoints.
    InvariantResult mono{"monotonicity map of " + L, true, 0.0, 0.0, ""};
    const auto& pieces = side->monotonicity.pieces;
    if (pieces.empty() || pieces.front().range.lo != 0.0 || !std::isinf(pieces.back().range.hi)) {
      mono.passed = false;
      mono.detail = "pieces do not cover (0, inf)";
    }
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
      if (pieces[i].range.hi != pieces[i + 1].range.lo || pieces[i].range.lo >= pieces[i].range.hi) {
        mono.passed = false;
        mono.detail = "pieces not ordered/disjoint";
      }
    }
    for (double t : validity_grid(Interval{}, grid_points)) {
      const std::size_t k = side->monotonicity.locate(t);
      const auto& p = pieces[k];
      const double margin = 1e-2;
      if (t < p.range.lo * (1.0 + margin) || t > p.range.hi * (1.0 - margin)) continue;
      const double h = 1e-4 * t;
      const double diff = side->value(t + h) - side->value(t - h);
      const bool inc = diff > 0.0;
      if (diff != 0.0 && inc != (p.direction == Monotone::increasing)) {
        mono.passed = false;
        mono.detail = "direction mismatch at t=" + fmt_t(t);
        mono.max_error = 1.0;
      }
    }
    rep.add(mono);

    // Round trip through the per-piece inverse.
    InvariantResult inv{"inverse round trip of " + L, true, 0.0, 1e-8, ""};
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const auto& p = pieces[k];
      const double lo = p.range.lo <= 0.0 ? 1e-3 : p.range.lo * 1.02;
      const double hi = std::isinf(p.range.hi) ? std::max(1e3, 10.0 * lo) : p.range.hi * 0.98;
      if (lo >= hi) continue;
      for (int i = 0; i < 25; ++i) {
        const double t = lo * std::pow(hi / lo, i / 24.0);
        const auto back = side->inverse(side->value(t), k);
        const double err = back ? std::abs(*back - t) / t : kInf;
        if (err > inv.max_error) {
          inv.max_error = err;
          if (err > inv.tolerance) inv.detail = "piece " + std::to_string(k) + " at t=" + fmt_t(t);
        }
      }
    }
    inv.passed = inv.max_error <= inv.tolerance;
    rep.add(inv);
  }

  if (g.homogeneity.tag != HomogeneityTag::Unclassified) {
    InvariantResult h{"homogeneity " + to_string(g.homogeneity.tag) + " gamma=" +
                          fmt_t(g.homogeneity.gamma),
                      true, 0.0, kHomogeneityTolerance, ""};
    h.max_error = homogeneity_residual(g.primal, g.homogeneity);
    h.passed = h.max_error <= h.tolerance;
    rep.add(h);
  }
  return rep;
}

}  // namespace fvi
