#include <gtest/gtest.h>

#include <cmath>

#include "fvi/errors.hpp"
#include "fvi/estimators.hpp"
#include "fvi/families.hpp"
#include "fvi/models.hpp"
#include "fvi/oracle.hpp"
#include "test_support.hpp"

using namespace fvi;

namespace {

struct Case {
  std::string name;
  ParamMap params;
  Direction direction;
};

// Divergence matrix used by the gradient checks.
const std::vector<Case>& gradient_cases() {
  static const std::vector<Case> cases = {
      {"kl_reverse", {}, Direction::reverse},
      {"chi_n", {{"n", 2}}, Direction::forward},
      {"hellinger_alpha", {{"alpha", 3}}, Direction::reverse},
      {"custom_c1", {{"t0", 0}}, Direction::reverse},
  };
  return cases;
}

// Posterior N(0.2, 1/7).
std::shared_ptr<const ConjugateGaussianModel> conj() {
  return conjugate_gaussian_model(0.0, 1.0, 0.5, {0.3, -0.4, 0.8});
}

Vector off_posterior() { return DiagGaussianFamily::pack(test::vec({0.1}), test::vec({0.45})); }

double rel_norm(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Central differences of a seeded estimator, h = 1e-4 (1 + |theta_i|).
Vector crn_fd(const std::function<double(const Vector&)>& value, const Vector& theta) {
  return test::fd_gradient(value, theta, 1e-4);
}

// Draws z_1..z_K exactly as the estimators do for K <= one chunk.
std::vector<Vector> replay_draws(const VariationalFamily& f, const Vector& theta, std::size_t K,
                                 std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::vector<Vector> z;
  for (std::size_t k = 0; k < K; ++k) z.push_back(f.transform(theta, f.noise_sample(rng)));
  return z;
}

}  // namespace

TEST(BoundMc, ConjugateKlAtPosteriorIsNegativeLogEvidence) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.0});
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({0.0}), test::vec({std::sqrt(0.5)}));
  const auto b = bound_mc(registry_lookup("kl"), Direction::reverse, *m, *f, th, 100000, 3);
  EXPECT_NEAR(b.value, 1.26551, 1e-5);
  EXPECT_LE(std::abs(b.value + std::log(0.2820948)), std::max(3.0 * b.stderr_, 1e-6));
  ASSERT_TRUE(b.log_evidence.has_value());
  EXPECT_FALSE(b.log_evidence_biased);
}

TEST(BoundMc, EqualsDualAtEvidenceForExactPosterior) {
  // With q the posterior every ratio equals p(D), so each bound is f*(p(D)).
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.0});
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({0.0}), test::vec({std::sqrt(0.5)}));
  const double pD = 1.0 / std::sqrt(4.0 * kPi);
  const std::vector<Case> cases = {
      {"kl_reverse", {}, Direction::reverse},       {"kl_forward", {}, Direction::reverse},
      {"chi_n", {{"n", 2}}, Direction::forward},     {"chi_n", {{"n", 2}}, Direction::reverse},
      {"hellinger_alpha", {{"alpha", 3}}, Direction::reverse},
      {"total_variation", {}, Direction::reverse}, {"custom_c1", {{"t0", 0}}, Direction::reverse},
  };
  for (const auto& c : cases) {
    const auto g = registry_lookup(c.name, c.params);
    const auto b = bound_mc(g, c.direction, *m, *f, th, 100000, 11);
    const double expect = bound_side(g, c.direction).value(pD);
    // The ratio is constant up to rounding of log densities.
    EXPECT_LE(std::abs(b.value - expect), std::max(3.0 * b.stderr_, 1e-9 * (1.0 + std::abs(expect))))
        << c.name << " " << to_string(c.direction);
  }
}

TEST(BoundMc, TotalVariationAtPosterior) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.0});
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({0.0}), test::vec({std::sqrt(0.5)}));
  const auto b = bound_mc(registry_lookup("total_variation"), Direction::reverse, *m, *f, th, 1000, 1);
  EXPECT_NEAR(b.value, 1.0 - 0.2820948, 1e-7);
}

TEST(BoundMc, ChiSquaredBoundsSquaredEvidenceOnSinModel) {
  const auto m = synthetic_sin_model({1.0});
  const double pD = evidence_quadrature(*m).value;
  const auto b = bound_mc(registry_lookup("chi_n", {{"n", 2}}), Direction::forward, *m, *uniform_width_family(),
                          test::vec({1.1}), 100000, 4);
  EXPECT_GE(b.value + 3.0 * b.stderr_, pD * pD - 1.0);
  EXPECT_EQ(b.K, 100000u);
  EXPECT_EQ(b.L, 1u);
  EXPECT_EQ(b.kind, EstimatorKind::bound);
  EXPECT_EQ(b.direction, Direction::forward);
  EXPECT_EQ(b.divergence, "chi_n");
  // Some draws land outside (0, pi) where the prior vanishes.
  EXPECT_GT(b.zero_ratio, 0u);
  EXPECT_FALSE(b.degenerate);
}

TEST(BoundMc, StderrIsSampleSdOverRootK) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  EstimatorOptions opt;
  opt.keep_samples = true;
  const auto g = registry_lookup("kl");
  const auto b = bound_mc(g, Direction::reverse, *m, *f, off_posterior(), 500, 2, opt);
  ASSERT_EQ(b.log_ratios.size(), 500u);
  double mean = 0.0, sq = 0.0;
  for (double s : b.log_ratios) mean += -s;
  mean /= 500.0;
  for (double s : b.log_ratios) sq += (-s - mean) * (-s - mean);
  EXPECT_NEAR(b.value, mean, 1e-12);
  EXPECT_NEAR(b.stderr_, std::sqrt(sq / 499.0) / std::sqrt(500.0), 1e-12);
}

TEST(BoundMc, DegenerateAndErrors) {
  const auto m = synthetic_sin_model({1.0});
  const auto u = uniform_width_family();
  // -log 0 = inf when a draw leaves the prior support.
  const auto kl = bound_mc(registry_lookup("kl"), Direction::reverse, *m, *u, test::vec({1.1}), 2000, 1);
  EXPECT_TRUE(kl.degenerate);
  EXPECT_GT(kl.zero_ratio, 0u);
  EXPECT_FALSE(kl.degenerate_reason.empty());
  EXPECT_THROW(bound_mc(registry_lookup("kl"), Direction::reverse, *m, *u, test::vec({1.0}), 0, 1), ConfigError);
  EXPECT_THROW(bound_mc(registry_lookup("kl"), Direction::reverse, *m, *diag_gaussian_family(2), Vector::Zero(4), 10, 1),
               ConfigError);
  // custom_c2's dual is convex only on (0, 1); a narrow q produces some ratios above 1.
  const auto wide = conjugate_gaussian_model(0.0, 1.0, 1.0, {});
  const auto f = diag_gaussian_family(1);
  const auto c2 = bound_mc(registry_lookup("custom_c2"), Direction::reverse, *wide, *f,
                           DiagGaussianFamily::pack(test::vec({0.0}), test::vec({0.2})), 1000, 1);
  EXPECT_TRUE(c2.degenerate);
  EXPECT_GT(c2.outside_domain, 0u);
  // p(D) ~ 2.82 > 1, so at the exact posterior every ratio is outside (0, 1).
  const auto peaked = conjugate_gaussian_model(0.0, 0.01, 0.01, {0.0});
  EXPECT_THROW(bound_mc(registry_lookup("custom_c2"), Direction::reverse, *peaked, *f,
                        DiagGaussianFamily::pack(test::vec({0.0}), test::vec({std::sqrt(0.005)})), 100, 1),
               NumericError);
}

TEST(IwBound, OneSampleIsBitwisePlain) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  for (const auto& c : gradient_cases()) {
    const auto g = registry_lookup(c.name, c.params);
    const auto a = bound_mc(g, c.direction, *m, *f, off_posterior(), 3000, 5);
    const auto b = iw_bound_mc(g, c.direction, *m, *f, off_posterior(), 3000, 1, 5);
    EXPECT_EQ(a.value, b.value) << c.name;
    EXPECT_EQ(a.stderr_, b.stderr_) << c.name;
    EXPECT_EQ(b.kind, EstimatorKind::iw_bound);
  }
}

TEST(IwBound, MonotoneInL) {
  const auto m = synthetic_sin_model({1.0});
  const auto u = uniform_width_family();
  for (const auto& c : {Case{"kl_reverse", {}, Direction::reverse}, Case{"chi_n", {{"n", 2}}, Direction::forward}}) {
    const auto g = registry_lookup(c.name, c.params);
    // theta = 0.9 keeps draws inside the prior support so -log stays finite.
    BoundEstimate prev = iw_bound_mc(g, c.direction, *m, *u, test::vec({0.9}), 50000, 1, 1);
    for (std::size_t L : {2u, 4u, 8u}) {
      const auto cur = iw_bound_mc(g, c.direction, *m, *u, test::vec({0.9}), 50000, L, L);
      EXPECT_LE(cur.value, prev.value + 3.0 * std::hypot(cur.stderr_, prev.stderr_)) << c.name << " L=" << L;
      prev = cur;
    }
  }
}

TEST(IwBound, ApproachesEvidenceFromPrior) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.5});
  const auto f = diag_gaussian_family(1);
  const Vector prior = Vector::Zero(2);
  const double target = -m->log_evidence();
  double prev_gap = kInf;
  for (std::size_t L : {1u, 4u, 16u, 64u}) {
    const auto b = iw_bound_mc(registry_lookup("kl"), Direction::reverse, *m, *f, prior, 20000, L, 3);
    const double gap = b.value - target;
    EXPECT_GT(gap, -3.0 * b.stderr_);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.01);
}

TEST(GradReparam, MatchesCommonRandomNumberDifferences) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  for (const auto& c : gradient_cases()) {
    const auto g = registry_lookup(c.name, c.params);
    const std::size_t K = 100000;
    const auto gr = grad_reparam(g, c.direction, *m, *f, th, K, 9);
    const Vector fd = crn_fd([&](const Vector& t) { return bound_mc(g, c.direction, *m, *f, t, K, 9).value; }, th);
    EXPECT_LT(rel_norm(gr.value, fd), 1e-4) << c.name;
    EXPECT_EQ(gr.objective_value, bound_mc(g, c.direction, *m, *f, th, K, 9).value);
  }
}

TEST(GradReparam, UniformFamilyOnSinModel) {
  const auto m = synthetic_sin_model(generate_sin_data(20, 2));
  const auto u = uniform_width_family();
  const auto g = registry_lookup("kl");
  const auto gr = grad_reparam(g, Direction::reverse, *m, *u, test::vec({0.8}), 20000, 4);
  const Vector fd =
      crn_fd([&](const Vector& t) { return bound_mc(g, Direction::reverse, *m, *u, t, 20000, 4).value; }, test::vec({0.8}));
  EXPECT_LT(rel_norm(gr.value, fd), 1e-4);
}

TEST(GradReparam, KlStationaryAtExactPosterior) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({m->posterior_mean()}), test::vec({std::sqrt(m->posterior_var())}));
  const auto gr = grad_reparam(registry_lookup("kl"), Direction::reverse, *m, *f, th, 100000, 6);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_LT(std::abs(gr.value[i]), 3.0 * gr.stderr_[i] + 1e-12);
}

TEST(GradReparam, MissingModelGradientIsCapabilityError) {
  struct NoGrad final : LatentModel {
    std::string name() const override { return "no_grad"; }
    std::size_t latent_dim() const override { return 1; }
    std::size_t data_size() const override { return 0; }
    double log_prior(const Vector& z) const override { return -0.5 * z.squaredNorm() - 0.5 * kLog2Pi; }
    double log_likelihood(std::size_t, const Vector&) const override { return 0.0; }
  } model;
  const auto f = diag_gaussian_family(1);
  EXPECT_THROW(grad_reparam(registry_lookup("kl"), Direction::reverse, model, *f, Vector::Zero(2), 10, 1),
               CapabilityError);
  // The score estimator only needs log densities.
  EXPECT_NO_THROW(grad_score(registry_lookup("kl"), Direction::reverse, model, *f, Vector::Zero(2), 10, 1));
}

TEST(GradIwReparam, OneSampleIsBitwiseReparam) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  for (const auto& c : gradient_cases()) {
    const auto g = registry_lookup(c.name, c.params);
    const auto a = grad_reparam(g, c.direction, *m, *f, off_posterior(), 2000, 3);
    const auto b = grad_iw_reparam(g, c.direction, *m, *f, off_posterior(), 2000, 1, 3);
    EXPECT_EQ(a.value, b.value) << c.name;
    EXPECT_EQ(a.stderr_, b.stderr_) << c.name;
  }
}

TEST(GradIwReparam, MatchesCommonRandomNumberDifferences) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  for (const auto& c : gradient_cases()) {
    const auto g = registry_lookup(c.name, c.params);
    const auto gr = grad_iw_reparam(g, c.direction, *m, *f, th, 10000, 3, 8);
    const Vector fd =
        crn_fd([&](const Vector& t) { return iw_bound_mc(g, c.direction, *m, *f, t, 10000, 3, 8).value; }, th);
    EXPECT_LT(rel_norm(gr.value, fd), 1e-3) << c.name;
  }
}

TEST(GradIwReparam, ChiSquaredClosedFormWeight) {
  // d/dtheta (R^n - 1) with R the inner mean ratio is n R^(n-1) mean_l r_l dlog r_l.
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  const double n = 2.0;
  const std::size_t L = 4;
  const auto g = registry_lookup("chi_n", {{"n", n}});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto gr = grad_iw_reparam(g, Direction::forward, *m, *f, th, 1, L, seed);
    Rng rng = make_stream(seed, 0);
    double R = 0.0;
    Vector acc = Vector::Zero(2);
    for (std::size_t l = 0; l < L; ++l) {
      const Vector eps = f->noise_sample(rng);
      const Vector z = f->transform(th, eps);
      const double r = std::exp(m->log_joint(z) - f->log_q(z, th));
      // Total derivative of log r along z = mu + sigma eps.
      const double sigma = std::exp(th[1]);
      const double dz = m->grad_log_joint(z)[0] - f->grad_z_log_q(z, th)[0];
      Vector dlog(2);
      dlog << dz - f->grad_theta_log_q(z, th)[0], dz * sigma * eps[0] - f->grad_theta_log_q(z, th)[1];
      R += r / L;
      acc += r * dlog / L;
    }
    const Vector expect = n * std::pow(R, n - 1.0) * acc;
    EXPECT_LT(rel_norm(gr.value, expect), 1e-12);
  }
}

TEST(GradScore, MatchesLikelihoodRatioDifferences) {
  // F(t') = mean_k q_t'(z_k)/q_t(z_k) phi(p(z_k)/q_t'(z_k)) on draws from q_t has
  // dF/dt' at t' = t equal to the score estimator on the same draws.
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  const std::size_t K = 1000;
  EstimatorOptions opt;
  opt.keep_samples = true;
  for (const auto& c : gradient_cases()) {
    const auto g = registry_lookup(c.name, c.params);
    const auto& side = bound_side(g, c.direction);
    const auto gs = grad_score(g, c.direction, *m, *f, th, K, 12, opt);
    const auto z = replay_draws(*f, th, K, 12);
    for (std::size_t k = 0; k < K; ++k)
      ASSERT_EQ(m->log_joint(z[k]) - f->log_q(z[k], th), gs.bound.log_ratios[k]);
    const auto F = [&](const Vector& t) {
      double s = 0.0;
      for (const auto& zk : z) {
        const double lq = f->log_q(zk, t);
        s += std::exp(lq - f->log_q(zk, th)) * side.at_log(m->log_joint(zk) - lq);
      }
      return s / static_cast<double>(K);
    };
    EXPECT_LT(rel_norm(gs.value, test::fd_gradient(F, th, 1e-5)), 1e-6) << c.name;
  }
}

TEST(GradScore, ChiSquaredPerSampleWeight) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  const double n = 2.0;
  const auto g = registry_lookup("chi_n", {{"n", n}});
  EstimatorOptions opt;
  opt.keep_samples = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto gs = grad_score(g, Direction::forward, *m, *f, th, 1, seed, opt);
    const Vector z = replay_draws(*f, th, 1, seed)[0];
    const double r = std::exp(gs.bound.log_ratios[0]);
    const Vector expect = ((1.0 - n) * std::pow(r, n) - 1.0) * f->grad_theta_log_q(z, th);
    EXPECT_LT(rel_norm(gs.value, expect), 1e-12);
  }
}

TEST(GradScore, ConstantFamilyGivesZero) {
  // Uniform width: the score at fixed z is -1/theta for every draw, so mean
  // weights times a constant; with theta unused by log q the gradient vanishes.
  struct Fixed final : VariationalFamily {
    std::string name() const override { return "fixed"; }
    std::size_t param_dim() const override { return 1; }
    std::size_t latent_dim() const override { return 1; }
    double log_q(const Vector& z, const Vector&) const override { return -0.5 * z.squaredNorm() - 0.5 * kLog2Pi; }
    Vector noise_sample(Rng& rng) const override { return test::vec({standard_normal(rng)}); }
    Vector transform(const Vector&, const Vector& eps) const override { return eps; }
    Vector grad_theta_log_q(const Vector&, const Vector&) const override { return Vector::Zero(1); }
    Matrix jacobian_g_theta(const Vector&, const Vector&) const override { return Matrix::Zero(1, 1); }
    Vector grad_z_log_q(const Vector& z, const Vector&) const override { return -z; }
  } fam;
  const auto gs = grad_score(registry_lookup("kl"), Direction::reverse, *conj(), fam, test::vec({0.3}), 500, 1);
  EXPECT_EQ(gs.value[0], 0.0);
}

TEST(GradScore, AgreesWithReparamInExpectation) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  for (const auto& c : {gradient_cases()[0], gradient_cases()[1]}) {
    const auto g = registry_lookup(c.name, c.params);
    const auto a = grad_score(g, c.direction, *m, *f, th, 200000, 21);
    const auto b = grad_reparam(g, c.direction, *m, *f, th, 200000, 22);
    for (Eigen::Index i = 0; i < 2; ++i)
      EXPECT_LT(std::abs(a.value[i] - b.value[i]), 3.0 * std::hypot(a.stderr_[i], b.stderr_[i])) << c.name << i;
  }
}

TEST(GradScore, TotalVariationSubgradientCount) {
  // At the exact posterior of an empty dataset every ratio is exactly 1.
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {});
  const auto f = diag_gaussian_family(1);
  const auto gs = grad_score(registry_lookup("total_variation"), Direction::reverse, *m, *f, Vector::Zero(2), 200, 1);
  EXPECT_GT(gs.subgradient_hits, 0u);
  EXPECT_TRUE(gs.value.allFinite());
}

TEST(Gradients, LogObjective) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const Vector th = off_posterior();
  const auto g = registry_lookup("chi_n", {{"n", 2}});
  // J = (1/n) log mean r^n; its CRN derivative matches the reparam gradient.
  const auto gr = grad_reparam(g, Direction::forward, *m, *f, th, 50000, 2, {}, Objective::log);
  const auto J = [&](const Vector& t) {
    return grad_reparam(g, Direction::forward, *m, *f, t, 50000, 2, {}, Objective::log).objective_value;
  };
  EXPECT_LT(rel_norm(gr.value, crn_fd(J, th)), 1e-4);
  const auto b = bound_mc(g, Direction::forward, *m, *f, th, 50000, 2);
  EXPECT_NEAR(gr.objective_value, *b.log_evidence, 1e-12);
  EXPECT_TRUE(b.log_evidence_biased);
  EXPECT_THROW(grad_reparam(registry_lookup("total_variation"), Direction::reverse, *m, *f, th, 10, 1, {}, Objective::log),
               ConfigError);
}

TEST(Gradients, ThreadCountDoesNotChangeResult) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  EstimatorOptions one, four;
  one.chunk = four.chunk = 256;
  four.threads = 4;
  const auto g = registry_lookup("kl");
  const auto a = grad_iw_reparam(g, Direction::reverse, *m, *f, off_posterior(), 5000, 3, 7, one);
  const auto b = grad_iw_reparam(g, Direction::reverse, *m, *f, off_posterior(), 5000, 3, 7, four);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.bound.value, b.bound.value);
}

TEST(Gradients, ParseNames) {
  EXPECT_EQ(parse_gradient_kind("score"), GradientKind::score);
  EXPECT_EQ(parse_gradient_kind("iw_reparam"), GradientKind::iw_reparam);
  EXPECT_THROW(parse_gradient_kind("nope"), ConfigError);
  EXPECT_EQ(parse_objective("log"), Objective::log);
  EXPECT_THROW(parse_objective("nope"), ConfigError);
}

TEST(Sandwich, ConjugateBracket) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.0});
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({0.1}), test::vec({0.8}));
  const auto r = sandwich({registry_lookup("chi_n", {{"n", 2}}), Direction::forward},
                          {registry_lookup("kl"), Direction::reverse}, *m, *f, th, 100000, 1, 1);
  const double lpD = std::log(0.2820948);
  ASSERT_TRUE(r.lower.valid);
  ASSERT_TRUE(r.upper.valid);
  EXPECT_TRUE(r.ordered());
  EXPECT_LE(r.lower.log_evidence, lpD + 3.0 * r.lower.log_evidence_stderr);
  EXPECT_GE(r.upper.log_evidence, lpD - 3.0 * r.upper.log_evidence_stderr);
  EXPECT_TRUE(r.lower.monotone_on_samples);
  EXPECT_TRUE(r.upper.monotone_on_samples);
}

TEST(Sandwich, SinModelBracketsQuadrature) {
  const auto m = synthetic_sin_model({1.0});
  const double lpD = evidence_quadrature(*m).log_value;
  const auto r = sandwich({registry_lookup("chi_n", {{"n", 2}}), Direction::forward},
                          {registry_lookup("kl"), Direction::reverse}, *m, *uniform_width_family(), test::vec({0.9}),
                          100000, 1, 3);
  ASSERT_TRUE(r.lower.valid && r.upper.valid);
  EXPECT_LE(r.lower.log_evidence, lpD + 3.0 * r.lower.log_evidence_stderr);
  EXPECT_GE(r.upper.log_evidence, lpD - 3.0 * r.upper.log_evidence_stderr);
}

TEST(Sandwich, TotalVariationBothSides) {
  const auto m = synthetic_sin_model({0.6});
  const double pD = evidence_quadrature(*m).value;
  const BoundSpec tv{registry_lookup("total_variation"), Direction::reverse};
  const auto r = sandwich(tv, tv, *m, *uniform_width_family(), test::vec({1.0}), 100000, 1, 5);
  ASSERT_TRUE(r.lower.valid && r.upper.valid);
  const double B = r.upper.bound.value, se = r.upper.bound.stderr_;
  EXPECT_DOUBLE_EQ(r.upper.evidence, 1.0 + B);
  EXPECT_DOUBLE_EQ(r.lower.evidence, std::max(0.0, 1.0 - B));
  EXPECT_LE(r.lower.evidence, pD + 3.0 * se);
  EXPECT_GE(r.upper.evidence, pD - 3.0 * se);
}

TEST(Sandwich, InvalidPairs) {
  const auto m = conj();
  const auto f = diag_gaussian_family(1);
  const BoundSpec kl{registry_lookup("kl"), Direction::reverse};
  const BoundSpec chi{registry_lookup("chi_n", {{"n", 2}}), Direction::forward};
  EXPECT_THROW(sandwich(kl, kl, *m, *f, off_posterior(), 10, 1, 1), ConfigError);
  EXPECT_THROW(sandwich(chi, chi, *m, *f, off_posterior(), 10, 1, 1), ConfigError);
}

TEST(Sandwich, EuboUpperBoundViaLambertW) {
  // p(D) = N(0; 0, 0.6) ~ 0.515 > 1/e, so the increasing branch of t log t applies.
  const auto m = conjugate_gaussian_model(0.0, 0.1, 0.5, {0.0});
  const double pD = m->evidence();
  ASSERT_GT(pD, std::exp(-1.0));
  const auto f = diag_gaussian_family(1);
  const Vector th = DiagGaussianFamily::pack(test::vec({0.02}), test::vec({0.3}));
  const auto g = registry_lookup("kl_forward");
  const auto b = bound_mc(g, Direction::reverse, *m, *f, th, 100000, 2);
  const auto up = invert_bound(g.dual, b.value, EvidenceSide::upper);
  ASSERT_TRUE(up.has_value());
  const double via_w = std::max(b.value / lambert_w(b.value), std::exp(-1.0));
  EXPECT_NEAR(*up, via_w, 1e-10 * via_w);
  // Delta method for the stderr on the evidence scale.
  const double slope = std::log(*up) + 1.0;
  EXPECT_GE(*up, pD - 3.0 * b.stderr_ / slope);
}

TEST(InvertBound, BranchEnds) {
  const auto tv = registry_lookup("total_variation").dual;
  EXPECT_DOUBLE_EQ(*invert_bound(tv, 0.3, EvidenceSide::upper), 1.3);
  EXPECT_DOUBLE_EQ(*invert_bound(tv, 0.3, EvidenceSide::lower), 0.7);
  EXPECT_DOUBLE_EQ(*invert_bound(tv, 1.5, EvidenceSide::lower), 0.0);
  const auto nlog = registry_lookup("kl").dual;
  EXPECT_NEAR(*invert_bound(nlog, 2.0, EvidenceSide::lower), std::exp(-2.0), 1e-15);
  EXPECT_EQ(*invert_bound(nlog, 2.0, EvidenceSide::upper), kInf);
}
