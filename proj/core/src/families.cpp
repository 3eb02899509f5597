#include "fvi/families.hpp"

#include <cmath>

#include "fvi/errors.hpp"

namespace fvi {

CheckedTheta VariationalFamily::check_theta(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != param_dim())
    throw ConfigError(name() + ": expected " + std::to_string(param_dim()) + " parameters, got " +
                      std::to_string(theta.size()));
  if (!theta.allFinite()) throw ConfigError(name() + ": parameters must be finite");
  return {theta, {}};
}

Vector VariationalFamily::jacobian_transpose_times(const Vector& theta, const Vector& eps,
                                                   const Vector& v) const {
  return jacobian_g_theta(theta, eps).transpose() * v;
}

// Uniform width

CheckedTheta UniformWidthFamily::check_theta(const Vector& theta) const {
  auto out = VariationalFamily::check_theta(theta);
  if (!(theta[0] > 0.0)) throw ConfigError("uniform_width: theta must be positive");
  if (theta[0] > 2.0) {
    out.theta[0] = 2.0;
    out.warning = "uniform_width: theta " + std::to_string(theta[0]) + " clamped to 2";
  }
  return out;
}

double UniformWidthFamily::log_q(const Vector& z, const Vector& theta) const {
  const double half = 0.5 * theta[0] * kPi;
  const double c = 0.5 * kPi;
  return (z[0] >= c - half && z[0] <= c + half) ? -std::log(theta[0] * kPi) : -kInf;
}

Vector UniformWidthFamily::noise_sample(Rng& rng) const {
  Vector e(1);
  e[0] = uniform01(rng) - 0.5;
  return e;
}

Vector UniformWidthFamily::transform(const Vector& theta, const Vector& eps) const {
  Vector z(1);
  z[0] = 0.5 * kPi + theta[0] * kPi * eps[0];
  return z;
}

Vector UniformWidthFamily::grad_theta_log_q(const Vector&, const Vector& theta) const {
  Vector g(1);
  g[0] = -1.0 / theta[0];
  return g;
}

Matrix UniformWidthFamily::jacobian_g_theta(const Vector&, const Vector& eps) const {
  Matrix j(1, 1);
  j(0, 0) = kPi * eps[0];
  return j;
}

Vector UniformWidthFamily::jacobian_transpose_times(const Vector&, const Vector& eps,
                                                    const Vector& v) const {
  Vector g(1);
  g[0] = kPi * eps[0] * v[0];
  return g;
}

Vector UniformWidthFamily::grad_z_log_q(const Vector& z, const Vector&) const {
  return Vector::Zero(z.size());
}

// Diagonal Gaussian

DiagGaussianFamily::DiagGaussianFamily(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("diag_gaussian: dim must be >= 1");
}

Vector DiagGaussianFamily::pack(const Vector& mu, const Vector& sigma) {
  Vector t(mu.size() * 2);
  t << mu, sigma.array().log().matrix();
  return t;
}

double DiagGaussianFamily::log_q(const Vector& z, const Vector& theta) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto mu = theta.head(d);
  const auto ls = theta.tail(d);
  const Vector u = ((z - mu).array() * (-ls).array().exp()).matrix();
  return -0.5 * static_cast<double>(dim_) * kLog2Pi - ls.sum() - 0.5 * u.squaredNorm();
}

Vector DiagGaussianFamily::noise_sample(Rng& rng) const {
  Vector e(static_cast<Eigen::Index>(dim_));
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = standard_normal(rng);
  return e;
}

Vector DiagGaussianFamily::transform(const Vector& theta, const Vector& eps) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  return theta.head(d) + (theta.tail(d).array().exp() * eps.array()).matrix();
}

Vector DiagGaussianFamily::grad_theta_log_q(const Vector& z, const Vector& theta) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const Vector inv_sigma = (-theta.tail(d)).array().exp();
  const Vector u = ((z - theta.head(d)).array() * inv_sigma.array()).matrix();
  Vector g(2 * d);
  g.head(d) = (u.array() * inv_sigma.array()).matrix();
  g.tail(d) = (u.array().square() - 1.0).matrix();
  return g;
}

Matrix DiagGaussianFamily::jacobian_g_theta(const Vector& theta, const Vector& eps) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  Matrix j = Matrix::Zero(d, 2 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    j(i, i) = 1.0;
    j(i, d + i) = std::exp(theta[d + i]) * eps[i];
  }
  return j;
}

Vector DiagGaussianFamily::jacobian_transpose_times(const Vector& theta, const Vector& eps,
                                                    const Vector& v) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  Vector g(2 * d);
  g.head(d) = v;
  g.tail(d) = (v.array() * theta.tail(d).array().exp() * eps.array()).matrix();
  return g;
}

Vector DiagGaussianFamily::grad_z_log_q(const Vector& z, const Vector& theta) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  return -((z - theta.head(d)).array() * (-2.0 * theta.tail(d)).array().exp()).matrix();
}

std::shared_ptr<const UniformWidthFamily> uniform_width_family() {
  return std::make_shared<const UniformWidthFamily>();
}

std::shared_ptr<const DiagGaussianFamily> diag_gaussian_family(std::size_t dim) {
  return std::make_shared<const DiagGaussianFamily>(dim);
}

}  // namespace fvi
