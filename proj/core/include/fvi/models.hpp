#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fvi/model.hpp"

namespace fvi {

enum class Split { train, test, all };

struct NormalizationStats {
  std::vector<std::string> columns;
  Vector mean;
  Vector sd;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::string target_name;
  Matrix features;                  // N x d
  std::optional<Vector> targets;    // N
  std::optional<NormalizationStats> normalization;  // over features then target
  Split split = Split::all;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

// x = sin(z) + N(0, 0.01) with z ~ UNIF(0, pi); observations are 1-D.
class SyntheticSinModel final : public LatentModel {
 public:
  static constexpr double kNoiseVar = 0.01;

  explicit SyntheticSinModel(std::vector<double> x = {});

  std::string name() const override { return "synthetic_sin"; }
  std::size_t latent_dim() const override { return 1; }
  std::size_t data_size() const override { return x_.size(); }
  double log_prior(const Vector& z) const override;
  double log_likelihood(std::size_t n, const Vector& z) const override;
  double log_likelihood_sum(const Vector& z) const override;
  bool has_gradient() const override { return true; }
  Vector grad_log_prior(const Vector& z) const override;
  Vector grad_log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const override;
  Vector grad_log_likelihood_sum(const Vector& z) const override;
  bool can_sample_prior() const override { return true; }
  Vector sample_prior(Rng& rng) const override;
  std::vector<Range> quadrature_window() const override;

  const std::vector<double>& observations() const { return x_; }
  double log_likelihood_point(double x, double z) const;

 private:
  std::vector<double> x_;
  double sum_x_ = 0.0;
  double sum_x2_ = 0.0;
};

// Draws N observations, each from its own latent z_n ~ UNIF(0, pi).
std::vector<double> generate_sin_data(std::size_t n, std::uint64_t seed);

// Scalar latent z ~ N(m0, v0), x_n | z ~ N(z, s2).
class ConjugateGaussianModel final : public LatentModel {
 public:
  ConjugateGaussianModel(double prior_mean, double prior_var, double lik_var,
                         std::vector<double> x = {});

  std::string name() const override { return "conjugate_gaussian"; }
  std::size_t latent_dim() const override { return 1; }
  std::size_t data_size() const override { return x_.size(); }
  double log_prior(const Vector& z) const override;
  double log_likelihood(std::size_t n, const Vector& z) const override;
  double log_likelihood_sum(const Vector& z) const override;
  bool has_gradient() const override { return true; }
  Vector grad_log_prior(const Vector& z) const override;
  Vector grad_log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const override;
  Vector grad_log_likelihood_sum(const Vector& z) const override;
  bool can_sample_prior() const override { return true; }
  Vector sample_prior(Rng& rng) const override;
  std::vector<Range> quadrature_window() const override;

  double posterior_mean() const { return post_mean_; }
  double posterior_var() const { return post_var_; }
  double log_evidence() const { return log_evidence_; }
  double evidence() const { return std::exp(log_evidence_); }

 private:
  double m0_, v0_, s2_;
  std::vector<double> x_;
  double sum_x_ = 0.0, sum_x2_ = 0.0;
  double post_mean_ = 0.0, post_var_ = 0.0, log_evidence_ = 0.0;
};

// Normalized 2-D Gaussian N(mu, Lambda^-1) with no data; evidence is 1.
class CorrelatedGaussianTarget final : public LatentModel {
 public:
  CorrelatedGaussianTarget(Vector mu, Matrix precision);

  std::string name() const override { return "correlated_gaussian"; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(mu_.size()); }
  std::size_t data_size() const override { return 0; }
  double log_prior(const Vector& z) const override;
  double log_likelihood(std::size_t, const Vector&) const override { return 0.0; }
  bool has_gradient() const override { return true; }
  Vector grad_log_prior(const Vector& z) const override;
  Vector grad_log_likelihood_sum(const Vector& z) const override {
    return Vector::Zero(z.size());
  }
  bool can_sample_prior() const override { return true; }
  Vector sample_prior(Rng& rng) const override;
  std::vector<Range> quadrature_window() const override;

  const Vector& mu() const { return mu_; }
  const Matrix& precision() const { return precision_; }
  Matrix covariance() const { return covariance_; }

 private:
  Vector mu_;
  Matrix precision_;
  Matrix covariance_;
  Matrix chol_cov_;
  double log_norm_ = 0.0;
};

// One-hidden-layer ReLU regression network with standard normal prior on all
// weights. Layout of z: W1 (H x d, row-major), b1 (H), w2 (H), b2.
class BnnRegressionModel final : public LatentModel {
 public:
  BnnRegressionModel(std::size_t hidden, double sigma, std::shared_ptr<const Dataset> data);

  std::string name() const override { return "bnn_regression"; }
  std::size_t latent_dim() const override { return dim_; }
  std::size_t data_size() const override { return data_->size(); }
  double log_prior(const Vector& z) const override;
  double log_likelihood(std::size_t n, const Vector& z) const override;
  double log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const override;
  double log_likelihood_sum(const Vector& z) const override;
  bool has_gradient() const override { return true; }
  Vector grad_log_prior(const Vector& z) const override;
  Vector grad_log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const override;
  Vector grad_log_likelihood_sum(const Vector& z) const override;
  bool can_sample_prior() const override { return true; }
  Vector sample_prior(Rng& rng) const override;

  std::size_t hidden() const { return hidden_; }
  std::size_t input_dim() const { return in_; }
  double sigma() const { return sigma_; }
  // Network output F_z(x) for one feature row.
  double predict(const Vector& z, const Vector& x) const;
  Vector predict_all(const Vector& z, const Matrix& X) const;

 private:
  std::size_t hidden_, in_, dim_;
  double sigma_;
  std::shared_ptr<const Dataset> data_;
};

std::shared_ptr<const SyntheticSinModel> synthetic_sin_model(std::vector<double> x = {});
std::shared_ptr<const ConjugateGaussianModel> conjugate_gaussian_model(double prior_mean,
                                                                       double prior_var,
                                                                       double lik_var,
                                                                       std::vector<double> x = {});
std::shared_ptr<const CorrelatedGaussianTarget> correlated_gaussian_target(Vector mu,
                                                                           Matrix precision);
std::shared_ptr<const BnnRegressionModel> bnn_regression_model(std::size_t hidden, double sigma,
                                                               std::shared_ptr<const Dataset> data);

// Reads a numeric CSV with header, shuffles with `seed`, splits off the
// first `split` fraction as training data and optionally normalizes every
// column with training statistics. An empty target_column means no target.
std::pair<Dataset, Dataset> load_csv_dataset(const std::string& path,
                                             const std::string& target_column, bool normalize,
                                             double split, std::uint64_t seed);

void write_csv_dataset(const Dataset& d, const std::string& path);

}  // namespace fvi
