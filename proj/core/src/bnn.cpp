#include <cmath>
#include <numeric>

#include "fvi/errors.hpp"
#include "fvi/models.hpp"

namespace fvi {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Weights {
  Eigen::Map<const RowMajor> W1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const Vector> w2;
  double b2;
};

Weights unpack(const Vector& z, std::size_t H, std::size_t d) {
  const auto h = static_cast<Eigen::Index>(H), dd = static_cast<Eigen::Index>(d);
  const double* p = z.data();
  return {Eigen::Map<const RowMajor>(p, h, dd), Eigen::Map<const Vector>(p + h * dd, h),
          Eigen::Map<const Vector>(p + h * dd + h, h), p[h * dd + 2 * h]};
}

}  // namespace

BnnRegressionModel::BnnRegressionModel(std::size_t hidden, double sigma,
                                       std::shared_ptr<const Dataset> data)
    : hidden_(hidden), sigma_(sigma), data_(std::move(data)) {
  if (!data_) throw ConfigError("bnn_regression_model: no dataset");
  if (!data_->targets) throw ConfigError("bnn_regression_model: dataset has no target column");
  if (hidden_ == 0) throw ConfigError("bnn_regression_model: hidden must be >= 1");
  if (!(sigma_ > 0.0)) throw ConfigError("bnn_regression_model: sigma must be positive");
  if (data_->targets->size() != data_->features.rows())
    throw ConfigError("bnn_regression_model: target length does not match feature rows");
  in_ = static_cast<std::size_t>(data_->features.cols());
  if (in_ == 0) throw ConfigError("bnn_regression_model: dataset has no feature columns");
  dim_ = hidden_ * in_ + 2 * hidden_ + 1;
}

double BnnRegressionModel::log_prior(const Vector& z) const {
  return -0.5 * static_cast<double>(dim_) * kLog2Pi - 0.5 * z.squaredNorm();
}

Vector BnnRegressionModel::grad_log_prior(const Vector& z) const { return -z; }

double BnnRegressionModel::predict(const Vector& z, const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != in_)
    throw ConfigError("bnn_regression_model: feature dimension mismatch");
  const auto w = unpack(z, hidden_, in_);
  const Vector h = (w.W1 * x + w.b1).cwiseMax(0.0);
  return w.w2.dot(h) + w.b2;
}

Vector BnnRegressionModel::predict_all(const Vector& z, const Matrix& X) const {
  if (static_cast<std::size_t>(X.cols()) != in_)
    throw ConfigError("bnn_regression_model: feature dimension mismatch");
  const auto w = unpack(z, hidden_, in_);
  const Matrix H = ((X * w.W1.transpose()).rowwise() + w.b1.transpose()).cwiseMax(0.0);
  return (H * w.w2).array() + w.b2;
}

double BnnRegressionModel::log_likelihood(std::size_t n, const Vector& z) const {
  const Vector x = data_->features.row(static_cast<Eigen::Index>(n)).transpose();
  const double r = (*data_->targets)[static_cast<Eigen::Index>(n)] - predict(z, x);
  return -0.5 * std::log(2.0 * kPi * sigma_ * sigma_) - r * r / (2.0 * sigma_ * sigma_);
}

double BnnRegressionModel::log_likelihood_batch(const Vector& z,
                                                std::span<const std::size_t> idx) const {
  Matrix X(static_cast<Eigen::Index>(idx.size()), data_->features.cols());
  Vector y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = data_->features.row(static_cast<Eigen::Index>(idx[i]));
    y[static_cast<Eigen::Index>(i)] = (*data_->targets)[static_cast<Eigen::Index>(idx[i])];
  }
  const Vector r = y - predict_all(z, X);
  const double m = static_cast<double>(idx.size());
  return -0.5 * m * std::log(2.0 * kPi * sigma_ * sigma_) - r.squaredNorm() / (2.0 * sigma_ * sigma_);
}

double BnnRegressionModel::log_likelihood_sum(const Vector& z) const {
  const Vector r = *data_->targets - predict_all(z, data_->features);
  const double m = static_cast<double>(data_->size());
  return -0.5 * m * std::log(2.0 * kPi * sigma_ * sigma_) - r.squaredNorm() / (2.0 * sigma_ * sigma_);
}

namespace {

// Backpropagation of sum_n log N(y_n; F_z(x_n), sigma^2) through the layer.
Vector backprop(const Vector& z, const Matrix& X, const Vector& y, std::size_t H, std::size_t d,
                double sigma) {
  const auto w = unpack(z, H, d);
  const Matrix A = (X * w.W1.transpose()).rowwise() + w.b1.transpose();
  const Matrix Hd = A.cwiseMax(0.0);
  const Vector F = (Hd * w.w2).array() + w.b2;
  const Vector R = (y - F) / (sigma * sigma);
  // ReLU subgradient at 0 is 0.
  const Matrix mask = (A.array() > 0.0).cast<double>();
  const Matrix G = (R * w.w2.transpose()).cwiseProduct(mask);

  Vector g(z.size());
  const auto h = static_cast<Eigen::Index>(H), dd = static_cast<Eigen::Index>(d);
  Eigen::Map<RowMajor>(g.data(), h, dd) = G.transpose() * X;
  g.segment(h * dd, h) = G.colwise().sum().transpose();
  g.segment(h * dd + h, h) = Hd.transpose() * R;
  g[h * dd + 2 * h] = R.sum();
  return g;
}

}  // namespace

Vector BnnRegressionModel::grad_log_likelihood_batch(const Vector& z,
                                                     std::span<const std::size_t> idx) const {
  Matrix X(static_cast<Eigen::Index>(idx.size()), data_->features.cols());
  Vector y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = data_->features.row(static_cast<Eigen::Index>(idx[i]));
    y[static_cast<Eigen::Index>(i)] = (*data_->targets)[static_cast<Eigen::Index>(idx[i])];
  }
  return backprop(z, X, y, hidden_, in_, sigma_);
}

Vector BnnRegressionModel::grad_log_likelihood_sum(const Vector& z) const {
  return backprop(z, data_->features, *data_->targets, hidden_, in_, sigma_);
}

Vector BnnRegressionModel::sample_prior(Rng& rng) const {
  Vector z(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  return z;
}

}  // namespace fvi
