#include "fvi/meanfield.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fvi/errors.hpp"
#include "fvi/models.hpp"

namespace fvi {

namespace {

double gaussian_logpdf(double z, double m, double v) {
  const double d = z - m;
  return -0.5 * (kLog2Pi + std::log(v) + d * d / v);
}

// Trapezoid weights times density, unnormalized, in log space.
std::vector<double> trapezoid_log_mass(const GridFactor& g) {
  std::vector<double> out(g.size());
  const double lh = std::log(g.step);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double edge = (i == 0 || i + 1 == g.size()) ? std::log(0.5) : 0.0;
    out[i] = g.log_density[i] + lh + edge;
  }
  return out;
}

// Discrete rule for E_{q_l}[h(z_l)]: nodes, normalized log weights and
// log q_l at each node.
struct FactorRule {
  std::vector<double> z;
  std::vector<double> log_w;
  std::vector<double> log_q;
};

FactorRule factor_rule(const Factor& f, const GaussHermite& gh) {
  FactorRule r;
  if (const auto* g = std::get_if<GaussianFactor>(&f.rep)) {
    const double sd = std::sqrt(g->var);
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
      const double z = g->mean + sd * gh.nodes[k];
      r.z.push_back(z);
      r.log_w.push_back(std::log(gh.weights[k]));
      r.log_q.push_back(gaussian_logpdf(z, g->mean, g->var));
    }
    return r;
  }
  const auto& g = std::get<GridFactor>(f.rep);
  const auto mass = trapezoid_log_mass(g);
  const double total = log_sum_exp(mass);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.log_density[i] == -kInf) continue;
    r.z.push_back(g.z(i));
    r.log_w.push_back(mass[i] - total);
    r.log_q.push_back(g.log_density[i]);
  }
  return r;
}

// Joint rule over a set of factors: product of the per-factor rules when it
// is small enough, otherwise equally weighted draws from the per-factor
// rules.
struct JointRule {
  std::vector<std::size_t> dims;
  Matrix z;  // nodes x dims
  std::vector<double> log_w;
  std::vector<double> log_q;
};

JointRule joint_rule(const MeanFieldState& s, const std::vector<std::size_t>& dims,
                     const MeanFieldOptions& opt, std::uint64_t stream) {
  const auto gh = gauss_hermite(opt.gauss_hermite_nodes);
  std::vector<FactorRule> rules;
  double product = 1.0;
  for (std::size_t d : dims) {
    rules.push_back(factor_rule(s.factors[d], gh));
    product *= static_cast<double>(rules.back().z.size());
  }
  JointRule out;
  out.dims = dims;
  const auto D = static_cast<Eigen::Index>(dims.size());
  if (dims.size() <= 3 && product <= static_cast<double>(opt.max_product_nodes)) {
    const auto n = static_cast<std::size_t>(product);
    out.z.resize(static_cast<Eigen::Index>(n), D);
    out.log_w.assign(n, 0.0);
    out.log_q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rem = i;
      for (std::size_t d = dims.size(); d-- > 0;) {
        const std::size_t m = rules[d].z.size();
        const std::size_t k = rem % m;
        rem /= m;
        out.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rules[d].z[k];
        out.log_w[i] += rules[d].log_w[k];
        out.log_q[i] += rules[d].log_q[k];
      }
    }
    return out;
  }
  // Monte Carlo: inverse-CDF draws of node indices.
  const std::size_t n = opt.mc_samples;
  out.z.resize(static_cast<Eigen::Index>(n), D);
  out.log_w.assign(n, -std::log(static_cast<double>(n)));
  out.log_q.assign(n, 0.0);
  Rng rng = make_stream(opt.seed, stream);
  std::vector<std::vector<double>> cdf(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    double acc = 0.0;
    for (double lw : rules[d].log_w) cdf[d].push_back(acc += std::exp(lw));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const double u = uniform01(rng) * cdf[d].back();
      auto k = static_cast<std::size_t>(std::lower_bound(cdf[d].begin(), cdf[d].end(), u) -
                                        cdf[d].begin());
      k = std::min(k, cdf[d].size() - 1);
      out.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rules[d].z[k];
      out.log_q[i] += rules[d].log_q[k];
    }
  }
  return out;
}

const GeneratorSide& rule_side(const DivergenceGenerator& g, MeanFieldRule rule) {
  return rule == MeanFieldRule::reverse_f1 ? g.dual : g.primal;
}

void require_invertible(const GeneratorSide& side, const DivergenceGenerator& g) {
  if (side.monotonicity.pieces.size() != 1)
    throw CapabilityError("mean-field update for '" + g.name +
                          "' needs a globally invertible bound integrand; it is not monotone");
}

GridFactor make_grid_at(double center, double halfspan, const MeanFieldOptions& opt) {
  GridFactor g;
  g.lo = center - halfspan;
  g.step = 2.0 * halfspan / static_cast<double>(opt.grid_points - 1);
  g.log_density.assign(opt.grid_points, -kInf);
  return g;
}

// Grid for the new factor j: re-centered on the current factor.
GridFactor make_grid(const Factor& current, const MeanFieldOptions& opt) {
  if (opt.grid_points < 3) throw ConfigError("meanfield: grid needs at least 3 points");
  const double m = current.mean();
  const double sd = std::sqrt(current.var());
  if (!std::isfinite(m) || !(sd > 0.0) || !std::isfinite(sd))
    throw NumericError("meanfield: factor has no finite mean and positive variance");
  return make_grid_at(m, opt.grid_halfwidth * sd, opt);
}

void normalize(GridFactor& g, std::size_t j) {
  const double lz = log_sum_exp(trapezoid_log_mass(g));
  if (!std::isfinite(lz))
    throw NumericError("meanfield: update of factor " + std::to_string(j) +
                       " is not normalizable (integral " + std::to_string(std::exp(lz)) + ")");
  for (double& v : g.log_density) v -= lz;
}

// m_j(z_j) = phi^-1(E_{q-j}[phi(p / q-j)]) on the grid of factor j.
Factor grid_update(const MeanFieldState& s, std::size_t j, const LatentModel& model,
                   const GeneratorSide& side, const DivergenceGenerator& g,
                   const MeanFieldOptions& opt, std::size_t* clamped) {
  const std::size_t J = s.factors.size();
  if (j >= J) throw ConfigError("meanfield: factor index out of range");
  if (model.latent_dim() != J)
    throw ConfigError("meanfield: model dimension does not match the number of factors");
  std::vector<std::size_t> others;
  for (std::size_t l = 0; l < J; ++l)
    if (l != j) others.push_back(l);
  const JointRule rule = others.empty() ? JointRule{{}, Matrix::Zero(1, 0), {0.0}, {0.0}}
                                        : joint_rule(s, others, opt, 1000 * s.iterations + j);

  GridFactor grid = make_grid(s.factors[j], opt);
  const std::size_t nodes = rule.log_w.size();
  std::vector<double> sv(nodes), tmp(nodes);
  std::vector<double> bad;
  std::size_t n_clamped = 0;
  const auto& piece = side.monotonicity.pieces.front();
  Vector z(static_cast<Eigen::Index>(J));

  // The grid follows the current factor, which can be far narrower or wider
  // than the update. Widen while the edges carry mass, then refine once if
  // the result occupies a small part of the span.
  bool refined = false;
  for (int attempt = 0;; ++attempt) {
    bad.clear();
    n_clamped = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      z[static_cast<Eigen::Index>(j)] = grid.z(i);
      for (std::size_t r = 0; r < nodes; ++r) {
        for (std::size_t d = 0; d < others.size(); ++d)
          z[static_cast<Eigen::Index>(others[d])] =
              rule.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d));
        sv[r] = model.log_joint(z) - rule.log_q[r];
      }
      double log_m;
      if (side.shape == SideShape::negative_log) {
        double acc = 0.0;
        for (std::size_t r = 0; r < nodes; ++r) tmp[r] = std::exp(rule.log_w[r]) * sv[r];
        acc = pairwise_sum(tmp);
        log_m = std::isnan(acc) ? -kInf : acc;
      } else if (side.shape == SideShape::power) {
        const double beta = side.power_exponent;
        for (std::size_t r = 0; r < nodes; ++r) tmp[r] = rule.log_w[r] + beta * sv[r];
        log_m = log_sum_exp(tmp) / beta;
      } else {
        for (std::size_t r = 0; r < nodes; ++r) tmp[r] = std::exp(rule.log_w[r]) * side.at_log(sv[r]);
        const double y = pairwise_sum(tmp);
        const bool at_zero = piece.direction == Monotone::decreasing ? y >= side.limit_at_zero
                                                                     : y <= side.limit_at_zero;
        if (at_zero) {
          log_m = -kInf;
          ++n_clamped;
        } else if (auto t = side.inverse(y, 0)) {
          log_m = std::log(*t);
        } else {
          bad.push_back(grid.z(i));
          continue;
        }
      }
      grid.log_density[i] = log_m;
    }
    if (!bad.empty() || attempt >= 8) break;
    const double peak = *std::max_element(grid.log_density.begin(), grid.log_density.end());
    if (!std::isfinite(peak)) break;
    const double halfspan = 0.5 * grid.step * static_cast<double>(grid.size() - 1);
    const bool heavy_edge =
        grid.log_density.front() > peak - 25.0 || grid.log_density.back() > peak - 25.0;
    GridFactor probe = grid;
    for (double& v : probe.log_density) v -= peak;
    const Factor fit{probe};
    const double m = fit.mean(), sd = std::sqrt(fit.var());
    if (heavy_edge) {
      grid = make_grid_at(m, 2.0 * halfspan, opt);
    } else if (!refined && sd > 0.0 && opt.grid_halfwidth * sd < 0.25 * halfspan) {
      refined = true;
      grid = make_grid_at(m, opt.grid_halfwidth * sd, opt);
    } else {
      break;
    }
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "meanfield: inner expectation for factor " << j
        << " lies outside the invertible range of '" << g.name << "' at z =";
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 10); ++k) msg << " " << bad[k];
    if (bad.size() > 10) msg << " ... (" << bad.size() << " points)";
    throw NumericError(msg.str());
  }
  if (clamped) *clamped += n_clamped;
  normalize(grid, j);
  return Factor{std::move(grid)};
}

}  // namespace

double GridFactor::integral() const { return std::exp(log_sum_exp(trapezoid_log_mass(*this))); }

double Factor::mean() const {
  if (const auto* g = std::get_if<GaussianFactor>(&rep)) return g->mean;
  const auto& g = std::get<GridFactor>(rep);
  const auto mass = trapezoid_log_mass(g);
  const double lz = log_sum_exp(mass);
  std::vector<double> t(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) t[i] = std::exp(mass[i] - lz) * g.z(i);
  return pairwise_sum(t);
}

double Factor::var() const {
  if (const auto* g = std::get_if<GaussianFactor>(&rep)) return g->var;
  const auto& g = std::get<GridFactor>(rep);
  const double m = mean();
  const auto mass = trapezoid_log_mass(g);
  const double lz = log_sum_exp(mass);
  std::vector<double> t(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = g.z(i) - m;
    t[i] = std::exp(mass[i] - lz) * d * d;
  }
  return pairwise_sum(t);
}

std::string to_string(MeanFieldRule r) {
  return r == MeanFieldRule::reverse_f1 ? "reverse_f1" : "forward_f0";
}

MeanFieldState initial_state(const std::vector<GaussianFactor>& factors) {
  if (factors.empty()) throw ConfigError("meanfield: need at least one factor");
  MeanFieldState s;
  for (const auto& f : factors) {
    if (!(f.var > 0.0) || !std::isfinite(f.mean) || !std::isfinite(f.var))
      throw ConfigError("meanfield: initial factors need finite means and positive variances");
    s.factors.push_back(Factor{f});
  }
  return s;
}

GaussHermite gauss_hermite(std::size_t n) {
  if (n == 0) throw ConfigError("gauss_hermite: need at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Matrix T = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    T(i, i - 1) = T(i - 1, i) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(T);
  GaussHermite gh;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    gh.nodes.push_back(es.eigenvalues()[i]);
    const double v = es.eigenvectors()(0, i);
    gh.weights.push_back(v * v);
  }
  return gh;
}

MeanFieldRule select_rule(const DivergenceGenerator& g) {
  switch (g.homogeneity.tag) {
    case HomogeneityTag::F1: return MeanFieldRule::reverse_f1;
    case HomogeneityTag::F0: return MeanFieldRule::forward_f0;
    default:
      throw CapabilityError("mean-field updates need a shifted-homogeneous generator (F0 or F1) "
                            "with an invertible bound integrand; '" +
                            g.name + "' is unclassified");
  }
}

Factor cavi_update_kl(const MeanFieldState& s, std::size_t j, const LatentModel& model,
                      const MeanFieldOptions& opt) {
  if (j >= s.factors.size()) throw ConfigError("meanfield: factor index out of range");
  if (opt.analytic) {
    if (const auto* t = dynamic_cast<const CorrelatedGaussianTarget*>(&model)) {
      const auto& L = t->precision();
      const auto& mu = t->mu();
      const auto jj = static_cast<Eigen::Index>(j);
      double shift = 0.0;
      for (Eigen::Index k = 0; k < mu.size(); ++k)
        if (k != jj) shift += L(jj, k) * (s.factors[static_cast<std::size_t>(k)].mean() - mu[k]);
      return Factor{GaussianFactor{mu[jj] - shift / L(jj, jj), 1.0 / L(jj, jj)}};
    }
  }
  const auto kl = registry_lookup("kl_reverse");
  return grid_update(s, j, model, kl.dual, kl, opt, nullptr);
}

Factor update_rule_f1(const MeanFieldState& s, std::size_t j, const LatentModel& model,
                      const DivergenceGenerator& g, const MeanFieldOptions& opt,
                      std::size_t* clamped) {
  if (g.homogeneity.tag != HomogeneityTag::F1)
    throw CapabilityError("reverse mean-field rule needs f in F1; '" + g.name + "' is " +
                          to_string(g.homogeneity.tag));
  require_invertible(g.dual, g);
  return grid_update(s, j, model, g.dual, g, opt, clamped);
}

Factor update_rule_f0(const MeanFieldState& s, std::size_t j, const LatentModel& model,
                      const DivergenceGenerator& g, const MeanFieldOptions& opt,
                      std::size_t* clamped) {
  if (g.homogeneity.tag != HomogeneityTag::F0)
    throw CapabilityError("forward mean-field rule needs f in F0; '" + g.name + "' is " +
                          to_string(g.homogeneity.tag));
  require_invertible(g.primal, g);
  return grid_update(s, j, model, g.primal, g, opt, clamped);
}

double meanfield_bound(const MeanFieldState& s, const LatentModel& model,
                       const DivergenceGenerator& g, MeanFieldRule rule,
                       const MeanFieldOptions& opt) {
  if (model.latent_dim() != s.factors.size())
    throw ConfigError("meanfield: model dimension does not match the number of factors");
  std::vector<std::size_t> all(s.factors.size());
  for (std::size_t l = 0; l < all.size(); ++l) all[l] = l;
  const JointRule jr = joint_rule(s, all, opt, 0xb0b0);
  const GeneratorSide& side = rule_side(g, rule);
  std::vector<double> t(jr.log_w.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const Vector z = jr.z.row(static_cast<Eigen::Index>(r)).transpose();
    const double v = side.at_log(model.log_joint(z) - jr.log_q[r]);
    t[r] = std::exp(jr.log_w[r]) * v;
  }
  return pairwise_sum(t);
}

MeanFieldState run_meanfield(const LatentModel& model, MeanFieldState s,
                             const DivergenceGenerator& g, std::size_t max_sweeps, double tol,
                             const MeanFieldOptions& opt) {
  if (max_sweeps == 0) throw ConfigError("meanfield: max_sweeps must be >= 1");
  if (!(tol >= 0.0)) throw ConfigError("meanfield: tol must be >= 0");
  s.rule = select_rule(g);
  const GeneratorSide& side = rule_side(g, s.rule);
  require_invertible(side, g);
  const bool kl_like = s.rule == MeanFieldRule::reverse_f1 && side.shape == SideShape::negative_log;

  s.bound_trace.assign(1, meanfield_bound(s, model, g, s.rule, opt));
  s.update_trace.clear();
  s.max_update_increase = 0.0;
  s.converged = false;
  double prev = s.bound_trace.back();
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t j = 0; j < s.factors.size(); ++j) {
      Factor next = kl_like ? cavi_update_kl(s, j, model, opt)
                  : s.rule == MeanFieldRule::reverse_f1
                      ? update_rule_f1(s, j, model, g, opt, &s.clamped_points)
                      : update_rule_f0(s, j, model, g, opt, &s.clamped_points);
      s.factors[j] = std::move(next);
      const double b = meanfield_bound(s, model, g, s.rule, opt);
      const double before = s.update_trace.empty() ? s.bound_trace.back() : s.update_trace.back();
      s.max_update_increase = std::max(s.max_update_increase, b - before);
      s.update_trace.push_back(b);
    }
    ++s.iterations;
    const double b = s.update_trace.back();
    s.bound_trace.push_back(b);
    if (std::abs(b - prev) < tol) {
      s.converged = true;
      break;
    }
    prev = b;
  }
  return s;
}

std::string factor_csv(const Factor& f, const MeanFieldOptions& opt) {
  GridFactor grid;
  if (const auto* gf = std::get_if<GridFactor>(&f.rep)) {
    grid = *gf;
  } else {
    const auto& ga = std::get<GaussianFactor>(f.rep);
    grid = make_grid(f, opt);
    for (std::size_t i = 0; i < grid.size(); ++i)
      grid.log_density[i] = gaussian_logpdf(grid.z(i), ga.mean, ga.var);
  }
  std::string out = "z,density\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid.z(i), std::exp(grid.log_density[i]));
    out += buf;
  }
  return out;
}

}  // namespace fvi
