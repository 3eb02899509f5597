#include <cmath>
#include <numeric>

#include "fvi/errors.hpp"
#include "fvi/models.hpp"

namespace fvi {

// LatentModel defaults

double LatentModel::log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const {
  std::vector<double> parts(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) parts[i] = log_likelihood(idx[i], z);
  return pairwise_sum(parts);
}

double LatentModel::log_likelihood_sum(const Vector& z) const {
  std::vector<double> parts(data_size());
  for (std::size_t n = 0; n < parts.size(); ++n) parts[n] = log_likelihood(n, z);
  return pairwise_sum(parts);
}

double LatentModel::log_joint(const Vector& z) const {
  const double lp = log_prior(z);
  if (lp == -kInf) return -kInf;
  return lp + log_likelihood_sum(z);
}

Vector LatentModel::grad_log_prior(const Vector&) const {
  throw CapabilityError("model '" + name() + "' does not provide grad_log_joint_z");
}

Vector LatentModel::grad_log_likelihood_batch(const Vector&, std::span<const std::size_t>) const {
  throw CapabilityError("model '" + name() + "' does not provide grad_log_joint_z");
}

Vector LatentModel::grad_log_likelihood_sum(const Vector& z) const {
  std::vector<std::size_t> all(data_size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return grad_log_likelihood_batch(z, all);
}

Vector LatentModel::grad_log_joint(const Vector& z) const {
  return grad_log_prior(z) + grad_log_likelihood_sum(z);
}

Vector LatentModel::sample_prior(Rng&) const {
  throw CapabilityError("model '" + name() + "' has no prior sampler");
}

std::vector<Range> LatentModel::quadrature_window() const {
  return std::vector<Range>(latent_dim());
}

// Minibatch view

MinibatchView::MinibatchView(const LatentModel& base, std::vector<std::size_t> batch)
    : base_(base), batch_(std::move(batch)) {
  if (batch_.empty()) throw ConfigError("minibatch_adapter: empty batch");
  const std::size_t n = base_.data_size();
  for (std::size_t i : batch_)
    if (i >= n) throw ConfigError("minibatch_adapter: index out of range");
  scale_ = static_cast<double>(n) / static_cast<double>(batch_.size());
  full_ = batch_.size() == n;
}

double MinibatchView::log_likelihood(std::size_t n, const Vector& z) const {
  return scale_ * base_.log_likelihood(batch_.at(n), z);
}

double MinibatchView::log_likelihood_sum(const Vector& z) const {
  if (full_) return base_.log_likelihood_sum(z);
  return scale_ * base_.log_likelihood_batch(z, batch_);
}

Vector MinibatchView::grad_log_likelihood_sum(const Vector& z) const {
  if (full_) return base_.grad_log_likelihood_sum(z);
  return scale_ * base_.grad_log_likelihood_batch(z, batch_);
}

MinibatchView minibatch_adapter(const LatentModel& model, std::vector<std::size_t> batch,
                                std::size_t full_n) {
  if (full_n != model.data_size())
    throw ConfigError("minibatch_adapter: full_N does not match the model's dataset size");
  return MinibatchView(model, std::move(batch));
}

// Synthetic sin model

namespace {
const double kSinLogNorm = -0.5 * std::log(2.0 * kPi * SyntheticSinModel::kNoiseVar);
}

SyntheticSinModel::SyntheticSinModel(std::vector<double> x) : x_(std::move(x)) {
  sum_x_ = pairwise_sum(x_);
  std::vector<double> sq(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) sq[i] = x_[i] * x_[i];
  sum_x2_ = pairwise_sum(sq);
}

double SyntheticSinModel::log_prior(const Vector& z) const {
  return (z[0] >= 0.0 && z[0] <= kPi) ? -std::log(kPi) : -kInf;
}

double SyntheticSinModel::log_likelihood_point(double x, double z) const {
  const double r = x - std::sin(z);
  return kSinLogNorm - r * r / (2.0 * kNoiseVar);
}

double SyntheticSinModel::log_likelihood(std::size_t n, const Vector& z) const {
  return log_likelihood_point(x_.at(n), z[0]);
}

double SyntheticSinModel::log_likelihood_sum(const Vector& z) const {
  // Sufficient statistics: sum (x - s)^2 = sum x^2 - 2 s sum x + N s^2.
  const double s = std::sin(z[0]);
  const double n = static_cast<double>(x_.size());
  const double ss = std::max(0.0, sum_x2_ - 2.0 * s * sum_x_ + n * s * s);
  return n * kSinLogNorm - ss / (2.0 * kNoiseVar);
}

Vector SyntheticSinModel::grad_log_prior(const Vector& z) const { return Vector::Zero(z.size()); }

Vector SyntheticSinModel::grad_log_likelihood_batch(const Vector& z,
                                                    std::span<const std::size_t> idx) const {
  const double s = std::sin(z[0]), c = std::cos(z[0]);
  std::vector<double> parts(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) parts[i] = x_.at(idx[i]) - s;
  Vector g(1);
  g[0] = c * pairwise_sum(parts) / kNoiseVar;
  return g;
}

Vector SyntheticSinModel::grad_log_likelihood_sum(const Vector& z) const {
  const double s = std::sin(z[0]), c = std::cos(z[0]);
  Vector g(1);
  g[0] = c * (sum_x_ - static_cast<double>(x_.size()) * s) / kNoiseVar;
  return g;
}

Vector SyntheticSinModel::sample_prior(Rng& rng) const {
  Vector z(1);
  z[0] = kPi * uniform01(rng);
  return z;
}

std::vector<Range> SyntheticSinModel::quadrature_window() const { return {Range{0.0, kPi}}; }

std::vector<double> generate_sin_data(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::vector<double> x(n);
  const double sd = std::sqrt(SyntheticSinModel::kNoiseVar);
  for (auto& v : x) {
    const double z = kPi * uniform01(rng);
    v = std::sin(z) + sd * standard_normal(rng);
  }
  return x;
}

// Conjugate Gaussian

ConjugateGaussianModel::ConjugateGaussianModel(double prior_mean, double prior_var, double lik_var,
                                               std::vector<double> x)
    : m0_(prior_mean), v0_(prior_var), s2_(lik_var), x_(std::move(x)) {
  if (!(prior_var > 0.0) || !(lik_var > 0.0))
    throw ConfigError("conjugate_gaussian_model: variances must be positive");
  sum_x_ = pairwise_sum(x_);
  std::vector<double> sq(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) sq[i] = x_[i] * x_[i];
  sum_x2_ = pairwise_sum(sq);
  const double n = static_cast<double>(x_.size());
  post_var_ = 1.0 / (1.0 / v0_ + n / s2_);
  post_mean_ = post_var_ * (m0_ / v0_ + sum_x_ / s2_);
  // log p(D) = log p(z, D) - log p(z | D) at z = posterior mean.
  Vector z(1);
  z[0] = post_mean_;
  log_evidence_ = log_joint(z) + 0.5 * std::log(2.0 * kPi * post_var_);
}

double ConjugateGaussianModel::log_prior(const Vector& z) const {
  const double d = z[0] - m0_;
  return -0.5 * std::log(2.0 * kPi * v0_) - d * d / (2.0 * v0_);
}

double ConjugateGaussianModel::log_likelihood(std::size_t n, const Vector& z) const {
  const double d = x_.at(n) - z[0];
  return -0.5 * std::log(2.0 * kPi * s2_) - d * d / (2.0 * s2_);
}

double ConjugateGaussianModel::log_likelihood_sum(const Vector& z) const {
  const double n = static_cast<double>(x_.size());
  const double ss = std::max(0.0, sum_x2_ - 2.0 * z[0] * sum_x_ + n * z[0] * z[0]);
  return -0.5 * n * std::log(2.0 * kPi * s2_) - ss / (2.0 * s2_);
}

Vector ConjugateGaussianModel::grad_log_prior(const Vector& z) const {
  Vector g(1);
  g[0] = -(z[0] - m0_) / v0_;
  return g;
}

Vector ConjugateGaussianModel::grad_log_likelihood_batch(const Vector& z,
                                                         std::span<const std::size_t> idx) const {
  std::vector<double> parts(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) parts[i] = x_.at(idx[i]) - z[0];
  Vector g(1);
  g[0] = pairwise_sum(parts) / s2_;
  return g;
}

Vector ConjugateGaussianModel::grad_log_likelihood_sum(const Vector& z) const {
  Vector g(1);
  g[0] = (sum_x_ - static_cast<double>(x_.size()) * z[0]) / s2_;
  return g;
}

Vector ConjugateGaussianModel::sample_prior(Rng& rng) const {
  Vector z(1);
  z[0] = m0_ + std::sqrt(v0_) * standard_normal(rng);
  return z;
}

std::vector<Range> ConjugateGaussianModel::quadrature_window() const {
  const double w = 12.0 * std::sqrt(post_var_);
  return {Range{post_mean_ - w, post_mean_ + w}};
}

// Correlated Gaussian target

CorrelatedGaussianTarget::CorrelatedGaussianTarget(Vector mu, Matrix precision)
    : mu_(std::move(mu)), precision_(std::move(precision)) {
  const auto d = mu_.size();
  if (d == 0 || precision_.rows() != d || precision_.cols() != d)
    throw ConfigError("correlated_gaussian_target: precision must be d x d with d = dim(mu) > 0");
  if (!precision_.isApprox(precision_.transpose(), 1e-12))
    throw ConfigError("correlated_gaussian_target: precision is not symmetric");
  Eigen::LLT<Matrix> llt(precision_);
  if (llt.info() != Eigen::Success)
    throw ConfigError("correlated_gaussian_target: precision is not positive definite");
  covariance_ = llt.solve(Matrix::Identity(d, d));
  chol_cov_ = Eigen::LLT<Matrix>(covariance_).matrixL();
  const double log_det_prec = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  log_norm_ = -0.5 * static_cast<double>(d) * kLog2Pi + 0.5 * log_det_prec;
}

double CorrelatedGaussianTarget::log_prior(const Vector& z) const {
  const Vector r = z - mu_;
  return log_norm_ - 0.5 * r.dot(precision_ * r);
}

Vector CorrelatedGaussianTarget::grad_log_prior(const Vector& z) const {
  return -(precision_ * (z - mu_));
}

Vector CorrelatedGaussianTarget::sample_prior(Rng& rng) const {
  Vector e(mu_.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = standard_normal(rng);
  return mu_ + chol_cov_ * e;
}

std::vector<Range> CorrelatedGaussianTarget::quadrature_window() const {
  std::vector<Range> w;
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    const double h = 12.0 * std::sqrt(covariance_(i, i));
    w.push_back({mu_[i] - h, mu_[i] + h});
  }
  return w;
}

// Factories

std::shared_ptr<const SyntheticSinModel> synthetic_sin_model(std::vector<double> x) {
  return std::make_shared<const SyntheticSinModel>(std::move(x));
}

std::shared_ptr<const ConjugateGaussianModel> conjugate_gaussian_model(double prior_mean,
                                                                       double prior_var,
                                                                       double lik_var,
                                                                       std::vector<double> x) {
  return std::make_shared<const ConjugateGaussianModel>(prior_mean, prior_var, lik_var,
                                                        std::move(x));
}

std::shared_ptr<const CorrelatedGaussianTarget> correlated_gaussian_target(Vector mu,
                                                                           Matrix precision) {
  return std::make_shared<const CorrelatedGaussianTarget>(std::move(mu), std::move(precision));
}

std::shared_ptr<const BnnRegressionModel> bnn_regression_model(std::size_t hidden, double sigma,
                                                               std::shared_ptr<const Dataset> data) {
  return std::make_shared<const BnnRegressionModel>(hidden, sigma, std::move(data));
}

}  // namespace fvi
