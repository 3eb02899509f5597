#include "fvi/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "fvi/errors.hpp"

namespace fvi {

std::string to_string(EstimatorKind k) { return k == EstimatorKind::bound ? "bound" : "iw_bound"; }

std::string to_string(GradientKind k) {
  switch (k) {
    case GradientKind::score: return "score";
    case GradientKind::reparam: return "reparam";
    default: return "iw_reparam";
  }
}

std::string to_string(Objective o) { return o == Objective::raw ? "raw" : "log"; }

GradientKind parse_gradient_kind(std::string_view s) {
  if (s == "score") return GradientKind::score;
  if (s == "reparam") return GradientKind::reparam;
  if (s == "iw_reparam") return GradientKind::iw_reparam;
  throw ConfigError("unknown gradient kind '" + std::string(s) + "' (score|reparam|iw_reparam)");
}

Objective parse_objective(std::string_view s) {
  if (s == "raw") return Objective::raw;
  if (s == "log") return Objective::log;
  throw ConfigError("unknown objective '" + std::string(s) + "' (raw|log)");
}

namespace {

enum class DrawMode { values, reparam, score };

// Per outer sample k: S_k = log mean_l p(z_kl, D)/q(z_kl) and, depending on
// the mode, dS_k/dtheta (reparam) or grad_theta log q(z_k) (score).
struct Draws {
  std::vector<double> S;
  Matrix grad;
};

Draws draw(const LatentModel& model, const VariationalFamily& family, const Vector& theta,
           std::size_t K, std::size_t L, std::uint64_t seed, DrawMode mode,
           const EstimatorOptions& opt) {
  if (K == 0) throw ConfigError("estimator: K must be >= 1");
  if (L == 0) throw ConfigError("estimator: L must be >= 1");
  if (model.latent_dim() != family.latent_dim())
    throw ConfigError("estimator: model latent dimension " + std::to_string(model.latent_dim()) +
                      " does not match family dimension " + std::to_string(family.latent_dim()));
  if (mode == DrawMode::reparam && !model.has_gradient())
    throw CapabilityError("reparameterization gradient needs grad_log_joint_z from model '" +
                          model.name() + "'");
  const auto P = static_cast<Eigen::Index>(family.param_dim());
  Draws d;
  d.S.resize(K);
  if (mode != DrawMode::values) d.grad = Matrix::Zero(static_cast<Eigen::Index>(K), P);

  for_each_chunk(K, opt.chunk, opt.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    Rng rng = make_stream(seed, c);
    std::vector<double> s(L);
    std::vector<Vector> ds(mode == DrawMode::reparam ? L : 0);
    for (std::size_t k = b; k < e; ++k) {
      for (std::size_t l = 0; l < L; ++l) {
        const Vector eps = family.noise_sample(rng);
        const Vector z = family.transform(theta, eps);
        const double lj = model.log_joint(z);
        const double lq = family.log_q(z, theta);
        s[l] = lj - lq;
        if (mode == DrawMode::reparam) {
          if (lj == -kInf) {
            ds[l] = Vector::Zero(P);
          } else {
            const Vector gz = model.grad_log_joint(z) - family.grad_z_log_q(z, theta);
            ds[l] = family.jacobian_transpose_times(theta, eps, gz) -
                    family.grad_theta_log_q(z, theta);
          }
        } else if (mode == DrawMode::score) {
          d.grad.row(static_cast<Eigen::Index>(k)) = family.grad_theta_log_q(z, theta).transpose();
        }
      }
      const double Sk = log_mean_exp(s);
      d.S[k] = Sk;
      if (mode == DrawMode::reparam && Sk != -kInf) {
        Vector acc = Vector::Zero(P);
        for (std::size_t l = 0; l < L; ++l) {
          if (s[l] == -kInf) continue;
          acc += std::exp(s[l] - Sk) / static_cast<double>(L) * ds[l];
        }
        d.grad.row(static_cast<Eigen::Index>(k)) = acc.transpose();
      }
    }
  });
  return d;
}

// d phi(e^S)/dS, with the r -> 0 limit taken as 0.
double slope_at_log(const GeneratorSide& side, double S) {
  if (S == -kInf) return 0.0;
  return side.log_deriv(S);
}

BoundEstimate finish_bound(const DivergenceGenerator& g, Direction direction,
                           const std::vector<double>& S, std::size_t L, EstimatorKind kind,
                           const EstimatorOptions& opt) {
  const GeneratorSide& side = bound_side(g, direction);
  BoundEstimate est;
  est.K = S.size();
  est.L = L;
  est.divergence = g.name;
  est.direction = direction;
  est.kind = kind;

  std::vector<double> vals(S.size());
  double lo = kInf, hi = -kInf;
  for (std::size_t k = 0; k < S.size(); ++k) {
    vals[k] = side.at_log(S[k]);
    if (S[k] == -kInf) {
      ++est.zero_ratio;
    } else {
      lo = std::min(lo, S[k]);
      hi = std::max(hi, S[k]);
      // Compare on log scale: ratios routinely underflow double.
      const double llo = side.domain.lo > 0.0 ? std::log(side.domain.lo) : -kInf;
      const double lhi = std::log(side.domain.hi);
      if (!(S[k] > llo && S[k] < lhi)) ++est.outside_domain;
    }
  }
  if (lo <= hi) {
    est.log_ratio_min = lo;
    est.log_ratio_max = hi;
  }
  if (est.outside_domain == S.size())
    throw NumericError("bound estimate for '" + g.name +
                       "' is degenerate: every realized ratio lies outside the generator's domain");
  const auto ms = mean_stderr(vals);
  est.value = ms.mean;
  est.stderr_ = ms.stderr_;
  if (!std::isfinite(est.value)) {
    est.degenerate = true;
    est.degenerate_reason = std::to_string(est.zero_ratio) +
                            " samples have zero ratio where the generator's limit at 0 is infinite";
  } else if (est.outside_domain > 0) {
    est.degenerate = true;
    est.degenerate_reason = std::to_string(est.outside_domain) +
                            " ratios fall outside the generator's convex domain";
  }

  // Conventional log-scale bound.
  if (side.shape == SideShape::negative_log) {
    est.log_evidence = -est.value;
    est.log_evidence_stderr = est.stderr_;
    est.log_evidence_biased = false;
  } else if (side.shape == SideShape::power) {
    const double beta = side.power_exponent;
    std::vector<double> bs(S.size());
    for (std::size_t k = 0; k < S.size(); ++k) bs[k] = beta * S[k];
    const double lm = log_mean_exp(bs);
    est.log_evidence = lm / beta;
    if (std::isfinite(lm)) {
      std::vector<double> w(S.size());
      for (std::size_t k = 0; k < S.size(); ++k) w[k] = std::exp(bs[k] - lm);
      est.log_evidence_stderr = mean_stderr(w).stderr_ / std::abs(beta);
    } else {
      est.log_evidence_stderr = kNaN;
    }
    est.log_evidence_biased = true;
  }
  if (opt.keep_samples) est.log_ratios = S;
  return est;
}

GradientEstimate finish_gradient(const DivergenceGenerator& g, Direction direction,
                                 const Draws& d, std::size_t L, GradientKind kind,
                                 Objective objective, const EstimatorOptions& opt) {
  const GeneratorSide& side = bound_side(g, direction);
  GradientEstimate out;
  out.kind = kind;
  out.objective = objective;
  out.bound = finish_bound(g, direction, d.S, L,
                           L > 1 ? EstimatorKind::iw_bound : EstimatorKind::bound, opt);
  const std::size_t K = d.S.size();
  const auto P = d.grad.cols();

  if (objective == Objective::log && side.shape == SideShape::generic)
    throw ConfigError("log objective needs a -log or power-type integrand; '" + g.name +
                      "' in the " + to_string(direction) + " direction has neither");

  Matrix contrib = Matrix::Zero(static_cast<Eigen::Index>(K), P);
  const bool use_log = objective == Objective::log && side.shape == SideShape::power;
  if (!use_log) {
    const bool limit_finite = std::isfinite(side.limit_at_zero);
    for (std::size_t k = 0; k < K; ++k) {
      const double S = d.S[k];
      const auto row = static_cast<Eigen::Index>(k);
      if (S == -kInf && !limit_finite) {
        ++out.degenerate;
        continue;
      }
      for (double kink : side.kinks)
        if (S != -kInf && std::exp(S) == kink) ++out.subgradient_hits;
      double w;
      if (kind == GradientKind::score) {
        // f'(q/p) of the complementary generator: phi(r) - r phi'(r).
        w = side.at_log(S) - slope_at_log(side, S);
      } else {
        w = slope_at_log(side, S);
      }
      contrib.row(row) = w * d.grad.row(row);
    }
    out.objective_value = out.bound.value;
  } else {
    // J = sign(c)/|b| log mean exp(b S_k); gradient is a softmax-weighted sum.
    const double beta = side.power_exponent;
    const double sgn = side.power_scale > 0.0 ? 1.0 : -1.0;
    std::vector<double> bs(K);
    for (std::size_t k = 0; k < K; ++k) bs[k] = beta * d.S[k];
    const double lm = log_mean_exp(bs);
    for (std::size_t k = 0; k < K; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      if (d.S[k] == -kInf) continue;
      const double w = std::exp(bs[k] - lm);  // K * softmax weight
      const double f = kind == GradientKind::score ? sgn * (1.0 - beta) / std::abs(beta)
                                                   : sgn * (beta > 0.0 ? 1.0 : -1.0);
      contrib.row(row) = (f * w) * d.grad.row(row);
    }
    out.objective_value = sgn * lm / std::abs(beta);
  }

  out.value.resize(P);
  out.stderr_.resize(P);
  std::vector<double> col(K);
  for (Eigen::Index p = 0; p < P; ++p) {
    for (std::size_t k = 0; k < K; ++k) col[k] = contrib(static_cast<Eigen::Index>(k), p);
    const auto ms = mean_stderr(col);
    out.value[p] = ms.mean;
    out.stderr_[p] = ms.stderr_;
  }
  return out;
}

Vector checked(const VariationalFamily& family, const Vector& theta) {
  return family.check_theta(theta).theta;
}

}  // namespace

BoundEstimate bound_mc(const DivergenceGenerator& g, Direction direction, const LatentModel& model,
                       const VariationalFamily& family, const Vector& theta, std::size_t K,
                       std::uint64_t seed, const EstimatorOptions& opt) {
  const auto d = draw(model, family, checked(family, theta), K, 1, seed, DrawMode::values, opt);
  return finish_bound(g, direction, d.S, 1, EstimatorKind::bound, opt);
}

BoundEstimate iw_bound_mc(const DivergenceGenerator& g, Direction direction,
                          const LatentModel& model, const VariationalFamily& family,
                          const Vector& theta, std::size_t K, std::size_t L, std::uint64_t seed,
                          const EstimatorOptions& opt) {
  const auto d = draw(model, family, checked(family, theta), K, L, seed, DrawMode::values, opt);
  return finish_bound(g, direction, d.S, L, EstimatorKind::iw_bound, opt);
}

GradientEstimate grad_score(const DivergenceGenerator& g, Direction direction,
                            const LatentModel& model, const VariationalFamily& family,
                            const Vector& theta, std::size_t K, std::uint64_t seed,
                            const EstimatorOptions& opt, Objective objective) {
  const auto d = draw(model, family, checked(family, theta), K, 1, seed, DrawMode::score, opt);
  return finish_gradient(g, direction, d, 1, GradientKind::score, objective, opt);
}

GradientEstimate grad_reparam(const DivergenceGenerator& g, Direction direction,
                              const LatentModel& model, const VariationalFamily& family,
                              const Vector& theta, std::size_t K, std::uint64_t seed,
                              const EstimatorOptions& opt, Objective objective) {
  const auto d = draw(model, family, checked(family, theta), K, 1, seed, DrawMode::reparam, opt);
  return finish_gradient(g, direction, d, 1, GradientKind::reparam, objective, opt);
}

GradientEstimate grad_iw_reparam(const DivergenceGenerator& g, Direction direction,
                                 const LatentModel& model, const VariationalFamily& family,
                                 const Vector& theta, std::size_t K, std::size_t L,
                                 std::uint64_t seed, const EstimatorOptions& opt,
                                 Objective objective) {
  const auto d = draw(model, family, checked(family, theta), K, L, seed, DrawMode::reparam, opt);
  return finish_gradient(g, direction, d, L, GradientKind::iw_reparam, objective, opt);
}

GradientEstimate estimate_gradient(GradientKind kind, const DivergenceGenerator& g,
                                   Direction direction, const LatentModel& model,
                                   const VariationalFamily& family, const Vector& theta,
                                   std::size_t K, std::size_t L, std::uint64_t seed,
                                   const EstimatorOptions& opt, Objective objective) {
  switch (kind) {
    case GradientKind::score:
      return grad_score(g, direction, model, family, theta, K, seed, opt, objective);
    case GradientKind::reparam:
      return grad_reparam(g, direction, model, family, theta, K, seed, opt, objective);
    default:
      return grad_iw_reparam(g, direction, model, family, theta, K, L, seed, opt, objective);
  }
}

// Sandwich

std::optional<double> invert_bound(const GeneratorSide& side, double bound, EvidenceSide which) {
  const auto& pieces = side.monotonicity.pieces;
  if (pieces.empty() || std::isnan(bound)) return std::nullopt;
  if (which == EvidenceSide::lower) {
    if (pieces.front().direction != Monotone::decreasing) return 0.0;
    if (bound >= side.limit_at_zero) return 0.0;
    return side.inverse(bound, 0);
  }
  if (pieces.back().direction != Monotone::increasing) return kInf;
  if (bound == kInf) return kInf;
  return side.inverse(bound, pieces.size() - 1);
}

bool SandwichResult::ordered() const {
  if (!lower.valid || !upper.valid) return true;
  return lower.log_evidence <= upper.log_evidence;
}

namespace {

void fill_side(SandwichSide& out, const BoundSpec& spec, const std::vector<double>& S,
               std::size_t L, EvidenceSide which, const EstimatorOptions& opt) {
  const GeneratorSide& side = bound_side(spec.generator, spec.direction);
  out.divergence = spec.generator.name;
  out.direction = spec.direction;
  out.bound = finish_bound(spec.generator, spec.direction, S, L,
                           L > 1 ? EstimatorKind::iw_bound : EstimatorKind::bound, opt);
  const Monotone need = which == EvidenceSide::upper ? Monotone::increasing : Monotone::decreasing;

  const double B = out.bound.value;
  if (out.bound.log_evidence && std::isfinite(*out.bound.log_evidence)) {
    out.log_evidence = *out.bound.log_evidence;
    out.evidence = std::exp(out.log_evidence);
    out.log_evidence_stderr = out.bound.log_evidence_stderr.value_or(kNaN);
  } else if (auto t = invert_bound(side, B, which)) {
    out.evidence = *t;
    out.log_evidence = std::log(*t);
    const double slope = std::isfinite(*t) && *t > 0.0 ? std::abs(side.deriv(*t)) : kNaN;
    out.log_evidence_stderr = out.bound.stderr_ / (slope * *t);
  }

  if (std::isfinite(out.bound.log_ratio_min)) {
    out.monotone_on_samples = side.monotonicity.monotone_on(
        std::exp(out.bound.log_ratio_min), std::exp(out.bound.log_ratio_max), need);
  }
  if (out.bound.degenerate) {
    out.valid = false;
    out.reason = out.bound.degenerate_reason;
  } else if (std::isnan(out.log_evidence)) {
    out.valid = false;
    out.reason = "bound value " + std::to_string(B) +
                 " lies outside the range of the invertible branch";
  } else {
    out.valid = true;
  }
}

// A non-monotone integrand certifies its side only when the other bound
// places p(D) inside the branch that was inverted.
void certify(SandwichSide& s, const GeneratorSide& side, EvidenceSide which,
             const SandwichSide& other) {
  if (!s.valid) return;
  const auto& pieces = side.monotonicity.pieces;
  if (pieces.size() <= 1) return;
  if (which == EvidenceSide::upper) {
    const double branch_lo = pieces.back().range.lo;
    if (!(other.valid && other.evidence >= branch_lo)) {
      s.valid = false;
      s.reason = "integrand is not monotone; the lower bound does not certify p(D) >= " +
                 std::to_string(branch_lo) + " (increasing branch)";
    }
  } else {
    const double branch_hi = pieces.front().range.hi;
    if (!(other.valid && other.evidence <= branch_hi)) {
      s.valid = false;
      s.reason = "integrand is not monotone; the upper bound does not certify p(D) <= " +
                 std::to_string(branch_hi) + " (decreasing branch)";
    }
  }
}

}  // namespace

SandwichResult sandwich(const BoundSpec& upper, const BoundSpec& lower, const LatentModel& model,
                        const VariationalFamily& family, const Vector& theta, std::size_t K,
                        std::size_t L, std::uint64_t seed, const EstimatorOptions& opt) {
  const GeneratorSide& up = bound_side(upper.generator, upper.direction);
  const GeneratorSide& lo = bound_side(lower.generator, lower.direction);
  if (up.monotonicity.is_global(Monotone::decreasing))
    throw ConfigError("sandwich: upper generator '" + upper.generator.name +
                      "' has a decreasing integrand and can only give a lower bound");
  if (lo.monotonicity.is_global(Monotone::increasing))
    throw ConfigError("sandwich: lower generator '" + lower.generator.name +
                      "' has an increasing integrand and can only give an upper bound");

  const auto d = draw(model, family, family.check_theta(theta).theta, K, L, seed,
                      DrawMode::values, opt);
  SandwichResult res;
  fill_side(res.upper, upper, d.S, L, EvidenceSide::upper, opt);
  fill_side(res.lower, lower, d.S, L, EvidenceSide::lower, opt);

  // Same non-monotone integrand on both sides: the two ends of one convex
  // sublevel set, a valid bracket by Jensen's inequality.
  const bool same = upper.generator.name == lower.generator.name &&
                    upper.generator.params == lower.generator.params &&
                    upper.direction == lower.direction;
  if (!same) {
    const SandwichSide up_copy = res.upper;
    certify(res.upper, up, EvidenceSide::upper, res.lower);
    certify(res.lower, lo, EvidenceSide::lower, up_copy);
  }
  return res;
}

}  // namespace fvi
