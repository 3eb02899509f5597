#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "fvi/errors.hpp"
#include "fvi/models.hpp"
#include "test_support.hpp"

using namespace fvi;

namespace {

std::shared_ptr<const Dataset> small_regression(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto ds = std::make_shared<Dataset>();
  ds->features = Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ds->features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = nd(rng);
      s += ds->features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    }
    y[static_cast<Eigen::Index>(i)] = std::sin(s) + 0.1 * nd(rng);
  }
  ds->targets = y;
  for (std::size_t c = 0; c < d; ++c) ds->feature_names.push_back("x" + std::to_string(c));
  ds->target_name = "y";
  return ds;
}

Vector random_vector(std::size_t n, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = nd(rng);
  return v;
}

double max_rel(const Vector& a, const Vector& b) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    e = std::max(e, std::abs(a[i] - b[i]) / std::max(1e-6, std::max(std::abs(a[i]), std::abs(b[i]))));
  return e;
}

void check_decomposition(const LatentModel& m, const Vector& z) {
  double s = m.log_prior(z);
  for (std::size_t n = 0; n < m.data_size(); ++n) s += m.log_likelihood(n, z);
  EXPECT_NEAR(m.log_joint(z), s, 1e-12 * std::max(1.0, std::abs(s))) << m.name();
}

void check_gradient(const LatentModel& m, const Vector& z, double tol = 1e-5) {
  const Vector g = m.grad_log_joint(z);
  const Vector fd = test::fd_gradient([&](const Vector& x) { return m.log_joint(x); }, z, 1e-5);
  EXPECT_LT(max_rel(g, fd), tol) << m.name();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("fvi_models_" + name);
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(SyntheticSin, Examples) {
  const auto m = synthetic_sin_model({1.0});
  EXPECT_NEAR(m->log_prior(test::vec({kPi / 2})), -std::log(kPi), 1e-15);
  EXPECT_NEAR(m->log_prior(test::vec({kPi / 2})), -1.1447, 1e-4);
  EXPECT_EQ(m->log_prior(test::vec({-0.1})), -kInf);
  EXPECT_EQ(m->log_prior(test::vec({3.2})), -kInf);
  EXPECT_NEAR(m->log_likelihood(0, test::vec({kPi / 2})), -0.5 * std::log(2.0 * kPi * 0.01), 1e-13);
  EXPECT_NEAR(m->log_likelihood_point(1.0, kPi / 2), 1.3836, 1e-4);
}

TEST(SyntheticSin, DecompositionAndGradient) {
  const auto m = synthetic_sin_model(generate_sin_data(20, 3));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, kPi - 0.05);
  for (int i = 0; i < 10; ++i) {
    const Vector z = test::vec({u(rng)});
    check_decomposition(*m, z);
    check_gradient(*m, z);
  }
}

TEST(SyntheticSin, GeneratedDataIsDeterministicAndBounded) {
  const auto a = generate_sin_data(200, 4), b = generate_sin_data(200, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, generate_sin_data(200, 5));
  for (double x : a) {
    EXPECT_GT(x, -0.6);
    EXPECT_LT(x, 1.6);
  }
}

TEST(SyntheticSin, PriorSamplerMatchesUniform) {
  const auto m = synthetic_sin_model();
  Rng rng = make_stream(3, 0);
  std::mt19937_64 ref(4);
  std::uniform_real_distribution<double> u(0.0, kPi);
  std::vector<double> a, b;
  for (int i = 0; i < 10000; ++i) {
    a.push_back(m->sample_prior(rng)[0]);
    b.push_back(u(ref));
  }
  EXPECT_LT(test::ks_statistic(a, b), test::ks_critical_1pct(a.size(), b.size()));
}

TEST(ConjugateGaussian, Examples) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 1.0, {0.0});
  EXPECT_NEAR(m->posterior_mean(), 0.0, 1e-15);
  EXPECT_NEAR(m->posterior_var(), 0.5, 1e-15);
  EXPECT_NEAR(m->evidence(), 0.2820948, 1e-7);

  const auto empty = conjugate_gaussian_model(0.4, 2.0, 1.0, {});
  EXPECT_NEAR(empty->posterior_mean(), 0.4, 1e-15);
  EXPECT_NEAR(empty->posterior_var(), 2.0, 1e-15);
  EXPECT_NEAR(empty->log_evidence(), 0.0, 1e-15);

  const auto two = conjugate_gaussian_model(0.0, 1.0, 1.0, {1.0, -1.0});
  EXPECT_NEAR(two->posterior_mean(), 0.0, 1e-15);
  EXPECT_NEAR(two->posterior_var(), 1.0 / 3.0, 1e-15);
}

TEST(ConjugateGaussian, EvidenceMatchesMarginalDensity) {
  // With one datum the marginal of x is N(m0, v0 + s2).
  const double m0 = 0.3, v0 = 0.8, s2 = 0.5, x = 1.1;
  const auto m = conjugate_gaussian_model(m0, v0, s2, {x});
  const double v = v0 + s2;
  EXPECT_NEAR(m->log_evidence(), -0.5 * std::log(2.0 * kPi * v) - (x - m0) * (x - m0) / (2.0 * v), 1e-13);
}

TEST(ConjugateGaussian, DecompositionAndGradient) {
  const auto m = conjugate_gaussian_model(0.2, 1.5, 0.7, {0.4, -0.6, 1.3});
  for (double z : {-1.3, 0.0, 0.7, 2.5}) {
    check_decomposition(*m, test::vec({z}));
    check_gradient(*m, test::vec({z}));
  }
  EXPECT_THROW(conjugate_gaussian_model(0.0, 0.0, 1.0), ConfigError);
  EXPECT_THROW(conjugate_gaussian_model(0.0, 1.0, -1.0), ConfigError);
}

TEST(CorrelatedGaussian, DensityAndErrors) {
  Matrix P(2, 2);
  P << 2.0, 0.6, 0.6, 2.0;
  const auto t = correlated_gaussian_target(test::vec({0.5, -0.2}), P);
  const Vector z = test::vec({0.1, 0.4});
  const Vector d = z - t->mu();
  const double ref = -std::log(2.0 * kPi) + 0.5 * std::log(P.determinant()) - 0.5 * d.dot(P * d);
  EXPECT_NEAR(t->log_joint(z), ref, 1e-13);
  check_gradient(*t, z);
  EXPECT_TRUE(t->covariance().isApprox(P.inverse(), 1e-14));

  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(correlated_gaussian_target(Vector::Zero(2), bad), ConfigError);
  Matrix asym(2, 2);
  asym << 2.0, 0.5, 0.6, 2.0;
  EXPECT_THROW(correlated_gaussian_target(Vector::Zero(2), asym), ConfigError);
}

TEST(CorrelatedGaussian, MarginalVarianceExceedsCavi) {
  Matrix P(2, 2);
  P << 2.0, 0.6, 0.6, 2.0;
  const Matrix S = correlated_gaussian_target(Vector::Zero(2), P)->covariance();
  for (int j = 0; j < 2; ++j) EXPECT_GT(S(j, j), 1.0 / P(j, j));
}

TEST(Bnn, ZeroWeightsGiveOutputBias) {
  const auto ds = small_regression(8, 2, 3);
  const auto m = bnn_regression_model(4, 0.5, ds);
  EXPECT_EQ(m->latent_dim(), 4u * 2 + 4 + 4 + 1);
  Vector z = Vector::Zero(static_cast<Eigen::Index>(m->latent_dim()));
  z[z.size() - 1] = 0.3;  // output bias
  for (std::size_t n = 0; n < ds->size(); ++n) {
    const Vector x = ds->features.row(static_cast<Eigen::Index>(n)).transpose();
    EXPECT_EQ(m->predict(z, x), 0.3);
    const double r = (*ds->targets)[static_cast<Eigen::Index>(n)] - 0.3;
    EXPECT_NEAR(m->log_likelihood(n, z), -0.5 * std::log(2.0 * kPi * 0.25) - r * r / (2.0 * 0.25), 1e-13);
  }
}

TEST(Bnn, ManualForwardPass) {
  const auto ds = small_regression(5, 3, 8);
  const std::size_t H = 6;
  const auto m = bnn_regression_model(H, 0.2, ds);
  const Vector z = random_vector(m->latent_dim(), 2);
  for (Eigen::Index n = 0; n < 5; ++n) {
    const Vector x = ds->features.row(n).transpose();
    // Layout: W1 (H x d, row-major), b1, w2, b2.
    double out = z[z.size() - 1];
    for (std::size_t h = 0; h < H; ++h) {
      double a = z[static_cast<Eigen::Index>(3 * H + h)];
      for (std::size_t c = 0; c < 3; ++c) a += z[static_cast<Eigen::Index>(h * 3 + c)] * x[static_cast<Eigen::Index>(c)];
      out += z[static_cast<Eigen::Index>(4 * H + h)] * std::max(a, 0.0);
    }
    EXPECT_NEAR(m->predict(z, x), out, 1e-13);
  }
}

TEST(Bnn, BackpropMatchesFiniteDifferences) {
  const auto ds = small_regression(30, 3, 5);
  const auto m = bnn_regression_model(10, 0.3, ds);
  for (unsigned draw = 0; draw < 10; ++draw) {
    const Vector z = random_vector(m->latent_dim(), 100 + draw);
    check_decomposition(*m, z);
    check_gradient(*m, z, 1e-5);
  }
}

TEST(Bnn, Errors) {
  const auto ds = small_regression(5, 2, 1);
  EXPECT_THROW(bnn_regression_model(0, 1.0, ds), ConfigError);
  EXPECT_THROW(bnn_regression_model(3, 0.0, ds), ConfigError);
  auto no_target = std::make_shared<Dataset>(*ds);
  no_target->targets.reset();
  EXPECT_THROW(bnn_regression_model(3, 1.0, no_target), ConfigError);
  const auto m = bnn_regression_model(3, 1.0, ds);
  const Vector z = Vector::Zero(static_cast<Eigen::Index>(m->latent_dim()));
  EXPECT_THROW(m->predict(z, Vector::Zero(3)), ConfigError);
}

TEST(Minibatch, FullBatchIsIdentical) {
  const auto m = synthetic_sin_model(generate_sin_data(10, 1));
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto v = minibatch_adapter(*m, all, 10);
  for (double z : {0.4, 1.3, 2.9}) {
    EXPECT_EQ(v.log_joint(test::vec({z})), m->log_joint(test::vec({z})));
    EXPECT_EQ(v.grad_log_joint(test::vec({z}))[0], m->grad_log_joint(test::vec({z}))[0]);
  }
}

TEST(Minibatch, SinglePointScaledByN) {
  const auto m = conjugate_gaussian_model(0.0, 1.0, 0.5, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  const auto v = minibatch_adapter(*m, {3}, 10);
  const Vector z = test::vec({0.25});
  EXPECT_NEAR(v.log_joint(z), m->log_prior(z) + 10.0 * m->log_likelihood(3, z), 1e-12);
  EXPECT_NEAR(v.grad_log_joint(z)[0],
              m->grad_log_prior(z)[0] + 10.0 * m->grad_log_likelihood_batch(z, std::vector<std::size_t>{3})[0], 1e-12);
  EXPECT_DOUBLE_EQ(v.scale(), 10.0);
}

TEST(Minibatch, UnbiasedOverRandomBatches) {
  const auto m = synthetic_sin_model(generate_sin_data(40, 2));
  const Vector z = test::vec({1.2});
  std::mt19937_64 rng(3);
  std::vector<std::size_t> idx(40);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double acc = 0.0;
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto v = minibatch_adapter(*m, {idx.begin(), idx.begin() + 5}, 40);
    acc += v.log_likelihood_sum(z);
  }
  const double full = m->log_likelihood_sum(z);
  EXPECT_LT(test::rel_err(acc / reps, full), 1e-2);
}

TEST(Minibatch, Errors) {
  const auto m = synthetic_sin_model(generate_sin_data(5, 1));
  EXPECT_THROW(minibatch_adapter(*m, {}, 5), ConfigError);
  EXPECT_THROW(minibatch_adapter(*m, {7}, 5), ConfigError);
  EXPECT_THROW(minibatch_adapter(*m, {1}, 6), ConfigError);
}

TEST(Dataset, SplitAndNormalize) {
  std::string text = "a,b,y\n";
  for (int i = 0; i < 100; ++i)
    text += std::to_string(i) + "," + std::to_string(i * i % 17) + "," + std::to_string(2 * i + 1) + "\n";
  const auto path = write_temp("split.csv", text);
  const auto [tr, te] = load_csv_dataset(path, "y", true, 0.9, 11);
  EXPECT_EQ(tr.size(), 90u);
  EXPECT_EQ(te.size(), 10u);
  EXPECT_EQ(tr.feature_names, (std::vector<std::string>{"a", "b"}));
  ASSERT_TRUE(tr.targets.has_value());
  for (Eigen::Index c = 0; c < 2; ++c) {
    const auto col = tr.features.col(c).array();
    EXPECT_NEAR(col.mean(), 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt((col - col.mean()).square().mean()), 1.0, 1e-9);
  }
  EXPECT_NEAR(tr.targets->mean(), 0.0, 1e-9);
  // Test rows use the training statistics: y = 2a + 1 survives the affine maps.
  const auto& s = *te.normalization;
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double a = te.features(i, 0) * s.sd[0] + s.mean[0];
    const double y = (*te.targets)[i] * s.sd[2] + s.mean[2];
    EXPECT_NEAR(y, 2.0 * a + 1.0, 1e-9);
  }
  const auto [tr2, te2] = load_csv_dataset(path, "y", true, 0.9, 11);
  EXPECT_EQ(tr.features, tr2.features);
  EXPECT_EQ(*te.targets, *te2.targets);
  const auto [tr3, te3] = load_csv_dataset(path, "y", true, 0.9, 12);
  EXPECT_NE(tr.features, tr3.features);
}

TEST(Dataset, RoundTripThroughCsv) {
  const auto path = write_temp("rt.csv", "u,v\n1.5,2\n-3,4.25\n");
  const auto [tr, te] = load_csv_dataset(path, "v", false, 1.0, 1);
  EXPECT_EQ(te.size(), 0u);
  const auto out = write_temp("rt_out.csv", "");
  write_csv_dataset(tr, out);
  const auto [back, none] = load_csv_dataset(out, "v", false, 1.0, 1);
  (void)none;
  // Reloading reshuffles; compare as sets of rows via sums.
  EXPECT_DOUBLE_EQ(back.features.sum(), tr.features.sum());
  EXPECT_DOUBLE_EQ(back.targets->sum(), tr.targets->sum());
}

TEST(Dataset, Errors) {
  EXPECT_THROW(load_csv_dataset(write_temp("bad.csv", "a,b\n1,x\n"), "b", false, 0.9, 1), ConfigError);
  EXPECT_THROW(load_csv_dataset(write_temp("nocol.csv", "a,b\n1,2\n"), "y", false, 0.9, 1), ConfigError);
  EXPECT_THROW(load_csv_dataset(write_temp("empty.csv", ""), "y", false, 0.9, 1), ConfigError);
  EXPECT_THROW(load_csv_dataset(write_temp("header.csv", "a,b\n"), "b", false, 0.9, 1), ConfigError);
  EXPECT_THROW(load_csv_dataset(write_temp("ragged.csv", "a,b\n1,2\n3\n"), "b", false, 0.9, 1), ConfigError);
  EXPECT_THROW(load_csv_dataset("/nonexistent/file.csv", "b", false, 0.9, 1), ConfigError);
}
