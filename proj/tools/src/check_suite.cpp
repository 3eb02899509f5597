#include "fvi_cli/check_suite.hpp"

#include <cmath>
#include <exception>
#include <functional>
#include <sstream>

#include "fvi/estimators.hpp"
#include "fvi/meanfield.hpp"
#include "fvi/models.hpp"
#include "fvi/oracle.hpp"
#include "fvi/surrogate.hpp"

namespace fvi::cli {

namespace {

InvariantResult result(std::string name, double err, double tol, std::string detail = {}) {
  InvariantResult r;
  r.name = std::move(name);
  r.max_error = err;
  r.tolerance = tol;
  r.passed = err <= tol;  // NaN fails
  r.detail = std::move(detail);
  return r;
}

// Runs one check, turning exceptions into failures.
void run(std::vector<InvariantResult>& out, const std::string& name,
         const std::function<InvariantResult()>& fn) {
  try {
    out.push_back(fn());
  } catch (const std::exception& e) {
    InvariantResult r;
    r.name = name;
    r.passed = false;
    r.max_error = kNaN;
    r.detail = std::string("threw: ") + e.what();
    out.push_back(r);
  }
}

std::string label(const DivergenceGenerator& g) {
  std::string s = g.name;
  for (const auto& [k, v] : g.params) {
    std::ostringstream o;
    o << v;
    s += "(" + k + "=" + o.str() + ")";
  }
  return s;
}

std::vector<DivergenceGenerator> generator_set() {
  return {registry_lookup("kl_reverse"),
          registry_lookup("kl_forward"),
          registry_lookup("chi_n", {{"n", 2}}),
          registry_lookup("chi_n", {{"n", 3}}),
          registry_lookup("chi_n", {{"n", -1}}),
          registry_lookup("hellinger_alpha", {{"alpha", 0.5}}),
          registry_lookup("hellinger_alpha", {{"alpha", 3}}),
          registry_lookup("renyi_alpha", {{"alpha", 2}}),
          registry_lookup("total_variation"),
          registry_lookup("custom_c1", {{"t0", 0}}),
          registry_lookup("custom_c1", {{"t0", 1}}),
          registry_lookup("custom_c2")};
}

}  // namespace

std::vector<InvariantResult> run_check_suite(bool full) {
  std::vector<InvariantResult> out;

  for (const auto& g : generator_set()) {
    const auto name = "generator/" + label(g);
    run(out, name, [&] {
      const auto rep = check_generator(g);
      InvariantResult r;
      r.name = name;
      r.passed = rep.passed();
      for (const auto& x : rep.results) {
        if (!x.passed) r.detail += (r.detail.empty() ? "" : "; ") + x.name + ": " + x.detail;
        r.max_error = std::max(r.max_error, x.max_error);
      }
      return r;
    });
  }

  run(out, "lambert_w/round_trip", [] {
    double err = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double t = -std::exp(-1.0) + std::pow(10.0, -8.0 + 0.04 * i);
      const double w = lambert_w(t);
      err = std::max(err, std::abs(w * std::exp(w) - t) / std::max(1.0, std::abs(t)));
    }
    return result("lambert_w/round_trip", err, 1e-13);
  });

  run(out, "oracle/gaussian_kl", [] {
    const auto q = Density1D::normal(0.0, 1.0), p = Density1D::normal(1.0, 2.0);
    const double d = divergence_quadrature(registry_lookup("kl_reverse"), q, p, Direction::reverse).value;
    return result("oracle/gaussian_kl", std::abs(d - gaussian_kl(0.0, 1.0, 1.0, 2.0)), 1e-10);
  });

  run(out, "oracle/chi2_moment", [] {
    const auto q = Density1D::normal(0.0, 1.5), p = Density1D::normal(0.5, 1.0);
    // Forward chi^2: E_q[(p/q)^2] - 1 = integral p^2 q^-1 - 1.
    const double d = divergence_quadrature(registry_lookup("chi_n", {{"n", 2}}), q, p, Direction::forward).value;
    const double ref = gaussian_power_moment(2.0, 0.5, 1.0, 0.0, 1.5) - 1.0;
    return result("oracle/chi2_moment", std::abs(d - ref), 1e-10);
  });

  for (const char* gname : {"chi_n", "hellinger_alpha"}) {
    for (double lambda : {0.5, 2.0}) {
      const std::string name = std::string("surrogate/") + gname + "/lambda=" + (lambda < 1 ? "0.5" : "2");
      run(out, name, [&] {
        const auto g = std::string(gname) == "chi_n" ? registry_lookup("chi_n", {{"n", 2}})
                                                     : registry_lookup("hellinger_alpha", {{"alpha", 3}});
        const auto rep = check_surrogate_identity(g, lambda, Density1D::normal(0.0, 1.0),
                                                  Density1D::normal(0.5, 1.2));
        bool decreasing = true;
        for (std::size_t i = 1; i < rep.trace.size(); ++i)
          decreasing = decreasing && rep.trace[i].gap < rep.trace[i - 1].gap;
        auto r = result(name, rep.discrepancy.value_or(kNaN), 1e-8);
        if (!decreasing) {
          r.passed = false;
          r.detail = "lambda_n trace not strictly decreasing";
        }
        return r;
      });
    }
  }

  run(out, "evidence/conjugate_quadrature", [] {
    const auto m = conjugate_gaussian_model(0.3, 0.8, 0.5, {0.1, 0.9, 1.4});
    return result("evidence/conjugate_quadrature",
                  std::abs(evidence_quadrature(*m).log_value - m->log_evidence()), 1e-9);
  });

  run(out, "bound/equality_at_posterior", [] {
    const auto m = conjugate_gaussian_model(0.0, 1.0, 0.5, {0.4, 1.1});
    const auto fam = diag_gaussian_family(1);
    Vector mu(1), sd(1);
    mu << m->posterior_mean();
    sd << std::sqrt(m->posterior_var());
    const Vector theta = DiagGaussianFamily::pack(mu, sd);
    double err = 0.0;
    for (const auto& g : {registry_lookup("kl"), registry_lookup("chi_n", {{"n", 2}}),
                          registry_lookup("hellinger_alpha", {{"alpha", 3}}),
                          registry_lookup("total_variation"), registry_lookup("custom_c1", {{"t0", 0}})}) {
      const auto b = bound_mc(g, Direction::reverse, *m, *fam, theta, 2000, 3);
      const double target = g.dual.at_log(m->log_evidence());
      err = std::max(err, std::abs(b.value - target) / std::max(1.0, std::abs(target)));
    }
    return result("bound/equality_at_posterior", err, 1e-9);
  });

  run(out, "bound/iw_monotone", [] {
    const auto m = synthetic_sin_model({0.5});
    const auto fam = uniform_width_family();
    Vector th(1);
    th << 1.1;
    double worst = 0.0;
    double prev = kInf, prev_se = 0.0;
    for (std::size_t L : {1, 2, 4, 8}) {
      const auto b = iw_bound_mc(registry_lookup("kl"), Direction::reverse, *m, *fam, th, 20000, L, 11);
      if (std::isfinite(prev))
        worst = std::max(worst, (b.value - prev) / (3.0 * std::hypot(b.stderr_, prev_se)));
      prev = b.value;
      prev_se = b.stderr_;
    }
    return result("bound/iw_monotone", std::max(worst, 0.0), 1.0, "increase in units of 3 stderr");
  });

  run(out, "sandwich/ordering", [] {
    const auto m = synthetic_sin_model({0.5});
    const auto fam = uniform_width_family();
    Vector th(1);
    th << 1.1;
    const auto s = sandwich({registry_lookup("chi_n", {{"n", 2}}), Direction::forward},
                            {registry_lookup("kl"), Direction::reverse}, *m, *fam, th, 20000, 8, 5);
    const double lp = evidence_quadrature(*m).log_value;
    const double viol = std::max(s.lower.log_evidence - lp - 3.0 * s.lower.log_evidence_stderr,
                                 lp - s.upper.log_evidence - 3.0 * s.upper.log_evidence_stderr);
    auto r = result("sandwich/ordering", std::max(viol, 0.0), 0.0);
    if (!s.lower.valid || !s.upper.valid) {
      r.passed = false;
      r.detail = "invalid side: " + s.lower.reason + s.upper.reason;
    }
    return r;
  });

  if (!full) return out;

  run(out, "gradient/reparam_fd", [] {
    const auto m = conjugate_gaussian_model(0.0, 1.0, 0.5, {0.4, 1.1});
    const auto fam = diag_gaussian_family(1);
    Vector theta(2);
    theta << 0.2, -0.4;
    double err = 0.0;
    for (const auto& [g, dir] : {std::pair{registry_lookup("kl"), Direction::reverse},
                                 std::pair{registry_lookup("chi_n", {{"n", 2}}), Direction::forward}}) {
      const auto ge = grad_reparam(g, dir, *m, *fam, theta, 20000, 9);
      for (Eigen::Index i = 0; i < 2; ++i) {
        const double h = 1e-5;
        Vector a = theta, b = theta;
        a[i] += h;
        b[i] -= h;
        const double fd = (bound_mc(g, dir, *m, *fam, a, 20000, 9).value -
                           bound_mc(g, dir, *m, *fam, b, 20000, 9).value) / (2.0 * h);
        err = std::max(err, std::abs(ge.value[i] - fd) / std::max(1e-3, std::abs(fd)));
      }
    }
    return result("gradient/reparam_fd", err, 1e-3);
  });

  run(out, "meanfield/cavi_equivalence", [] {
    Matrix P(2, 2);
    P << 2.0, 0.6, 0.6, 2.0;
    const auto t = correlated_gaussian_target(Vector::Zero(2), P);
    const auto init = initial_state({{0.3, 1.0}, {-0.2, 1.0}});
    MeanFieldOptions grid;
    grid.analytic = false;
    const auto a = run_meanfield(*t, init, registry_lookup("kl"), 50, 1e-12);
    const auto b = run_meanfield(*t, init, registry_lookup("kl"), 50, 1e-12, grid);
    double err = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      err = std::max(err, std::abs(a.factors[j].mean() - b.factors[j].mean()));
      err = std::max(err, std::abs(a.factors[j].var() - b.factors[j].var()));
      err = std::max(err, std::abs(b.factors[j].var() - 0.5));
    }
    return result("meanfield/cavi_equivalence", err, 1e-6);
  });

  run(out, "evidence/mc_vs_quadrature", [] {
    const auto m = synthetic_sin_model({0.5});
    const auto mc = evidence_mc(*m, 200000, 3);
    const double q = evidence_quadrature(*m).value;
    return result("evidence/mc_vs_quadrature", std::abs(mc.value - q) / mc.stderr_, 4.0,
                  "difference in MC standard errors");
  });

  return out;
}

}  // namespace fvi::cli
