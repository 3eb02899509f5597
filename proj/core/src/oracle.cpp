#include "fvi/oracle.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "fvi/errors.hpp"

namespace fvi {

namespace {

constexpr double kWindowSigmas = 12.0;

}  // namespace

double Density1D::window_lo() const { return std::max(support.lo, center - kWindowSigmas * scale); }
double Density1D::window_hi() const { return std::min(support.hi, center + kWindowSigmas * scale); }

Density1D Density1D::normal(double mean, double sd) {
  if (!(sd > 0.0)) throw ConfigError("Density1D::normal: sd must be positive");
  Density1D d;
  const double log_norm = -std::log(sd) - 0.5 * kLog2Pi;
  d.log_density = [mean, sd, log_norm](double x) {
    const double u = (x - mean) / sd;
    return log_norm - 0.5 * u * u;
  };
  d.center = mean;
  d.scale = sd;
  d.sampler = [mean, sd](Rng& rng) { return mean + sd * standard_normal(rng); };
  return d;
}

Density1D Density1D::uniform(double a, double b) {
  if (!(b > a)) throw ConfigError("Density1D::uniform: need a < b");
  Density1D d;
  const double lw = -std::log(b - a);
  d.log_density = [a, b, lw](double x) { return (x >= a && x <= b) ? lw : -kInf; };
  d.support = {a, b};
  d.center = 0.5 * (a + b);
  d.scale = b - a;
  d.sampler = [a, b](Rng& rng) { return a + (b - a) * uniform01(rng); };
  return d;
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opt) {
  QuadratureResult res;
  if (!(b > a)) {
    res.log_value = -kInf;
    return res;
  }
  std::size_t nodes = 0;
  auto counted = [&](double x) {
    ++nodes;
    return f(x);
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const std::size_t panels = std::max<std::size_t>(1, opt.panels);
  std::vector<double> parts(panels), errs(panels), abs_parts(panels);
  const double w = (b - a) / static_cast<double>(panels);
  auto panel = [&](std::size_t i) {
    const double lo = a + w * static_cast<double>(i);
    return std::pair{lo, i + 1 == panels ? b : lo + w};
  };
  // One rule per panel first; the total sets an absolute error target so
  // panels holding negligible mass are not refined to full relative accuracy.
  for (std::size_t i = 0; i < panels; ++i) {
    const auto [lo, hi] = panel(i);
    parts[i] = GK::integrate(counted, lo, hi, 0, 0.0, &errs[i]);
    abs_parts[i] = std::abs(parts[i]);
  }
  const double target = opt.panel_tolerance * pairwise_sum(abs_parts) / static_cast<double>(panels);
  for (std::size_t i = 0; i < panels; ++i) {
    if (errs[i] <= target) continue;
    const auto [lo, hi] = panel(i);
    const double rel = std::max(opt.panel_tolerance, target / std::max(abs_parts[i], 1e-300));
    parts[i] = GK::integrate(counted, lo, hi, opt.max_depth, rel, &errs[i]);
  }
  res.value = pairwise_sum(parts);
  res.error = pairwise_sum(errs);
  res.nodes = nodes;
  res.log_value = std::log(res.value);
  return res;
}

QuadratureResult divergence_quadrature(const DivergenceGenerator& g, const Density1D& q,
                                       const Density1D& p, Direction direction,
                                       const QuadratureOptions& opt) {
  // Forward D_f(p||q) is the reverse formula with the roles swapped.
  const Density1D& a = direction == Direction::reverse ? q : p;
  const Density1D& b = direction == Direction::reverse ? p : q;
  // integral of b f(a/b); where a > b use the equivalent a f*(b/a) so the
  // exponentials never overflow.
  auto integrand = [&](double z) {
    const double la = a.log_density(z);
    const double lb = b.log_density(z);
    if (la == -kInf && lb == -kInf) return 0.0;
    double v;
    if (la > lb) {
      v = std::exp(la) * g.dual.at_log(lb - la);
    } else {
      v = std::exp(lb) * g.primal.at_log(la - lb);
    }
    if (!std::isfinite(v))
      throw NumericError("divergence undefined: non-finite integrand at z=" + std::to_string(z) +
                         " (support mismatch)");
    return v;
  };
  const double lo = std::min(q.window_lo(), p.window_lo());
  const double hi = std::max(q.window_hi(), p.window_hi());
  auto r = integrate(integrand, lo, hi, opt);
  r.log_value = std::log(r.value);
  return r;
}

QuadratureResult evidence_quadrature(const LatentModel& model, const QuadratureOptions& opt) {
  const std::size_t dim = model.latent_dim();
  if (dim == 0 || dim > 2)
    throw CapabilityError("evidence_quadrature supports latent dimension 1 or 2 (got " +
                          std::to_string(dim) + "); use evidence_mc");
  const auto window = model.quadrature_window();
  for (const auto& r : window)
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
      throw CapabilityError("evidence_quadrature: model '" + model.name() +
                            "' has no finite quadrature window");

  // Shift by the largest log joint on a coarse grid so exp() stays in range.
  const int coarse = dim == 1 ? 4001 : 301;
  double shift = -kInf;
  Vector z(dim);
  if (dim == 1) {
    for (int i = 0; i < coarse; ++i) {
      z[0] = window[0].lo + (window[0].hi - window[0].lo) * i / (coarse - 1.0);
      shift = std::max(shift, model.log_joint(z));
    }
  } else {
    for (int i = 0; i < coarse; ++i) {
      for (int j = 0; j < coarse; ++j) {
        z[0] = window[0].lo + (window[0].hi - window[0].lo) * i / (coarse - 1.0);
        z[1] = window[1].lo + (window[1].hi - window[1].lo) * j / (coarse - 1.0);
        shift = std::max(shift, model.log_joint(z));
      }
    }
  }
  if (!std::isfinite(shift)) throw NumericError("evidence_quadrature: log joint is -inf on the window");

  QuadratureResult res;
  if (dim == 1) {
    res = integrate(
        [&](double x) {
          Vector v(1);
          v[0] = x;
          return std::exp(model.log_joint(v) - shift);
        },
        window[0].lo, window[0].hi, opt);
  } else {
    QuadratureOptions inner = opt;
    inner.panels = std::max<std::size_t>(8, opt.panels / 4);
    std::size_t inner_nodes = 0;
    double inner_err = 0.0;
    QuadratureOptions outer = inner;
    res = integrate(
        [&](double x) {
          auto r = integrate(
              [&](double y) {
                Vector v(2);
                v << x, y;
                return std::exp(model.log_joint(v) - shift);
              },
              window[1].lo, window[1].hi, inner);
          inner_nodes += r.nodes;
          inner_err = std::max(inner_err, r.error);
          return r.value;
        },
        window[0].lo, window[0].hi, outer);
    res.nodes += inner_nodes;
    res.error += inner_err * (window[0].hi - window[0].lo);
  }
  res.log_value = std::log(res.value) + shift;
  const double scale = std::exp(shift);
  res.value *= scale;
  res.error *= scale;
  return res;
}

EvidenceEstimate evidence_mc(const LatentModel& model, std::size_t K, std::uint64_t seed,
                             unsigned threads) {
  if (K == 0) throw ConfigError("evidence_mc: K must be positive");
  if (!model.can_sample_prior())
    throw CapabilityError("evidence_mc: model '" + model.name() + "' has no prior sampler");
  constexpr std::size_t kChunk = 4096;
  std::vector<double> ll(K);
  for_each_chunk(K, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    Rng rng = make_stream(seed, c);
    for (std::size_t k = b; k < e; ++k) ll[k] = model.log_likelihood_sum(model.sample_prior(rng));
  });
  double m = -kInf;
  for (double v : ll) m = std::max(m, v);
  EvidenceEstimate out;
  out.K = K;
  if (!std::isfinite(m)) {
    out.value = m == kInf ? kInf : 0.0;
    out.log_value = m;
    return out;
  }
  std::vector<double> w(K);
  for (std::size_t k = 0; k < K; ++k) w[k] = std::exp(ll[k] - m);
  const auto ms = mean_stderr(w);
  out.log_value = std::log(ms.mean) + m;
  out.value = std::exp(out.log_value);
  out.stderr_ = ms.stderr_ * std::exp(m);
  return out;
}

double gaussian_kl(double mq, double sq, double mp, double sp) {
  const double d = mq - mp;
  return std::log(sp / sq) + (sq * sq + d * d) / (2.0 * sp * sp) - 0.5;
}

double gaussian_power_moment(double a, double mq, double sq, double mp, double sp) {
  const double vq = sq * sq, vp = sp * sp;
  const double va = a * vp + (1.0 - a) * vq;
  if (!(va > 0.0)) return kInf;
  const double d = mq - mp;
  return std::exp(-a * (1.0 - a) * d * d / (2.0 * va)) * std::pow(vq, (1.0 - a) / 2.0) *
         std::pow(vp, a / 2.0) / std::sqrt(va);
}

}  // namespace fvi
