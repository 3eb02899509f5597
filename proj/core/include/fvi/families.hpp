#pragma once

#include <memory>
#include <string>

#include "fvi/model.hpp"
#include "fvi/random.hpp"

namespace fvi {

struct CheckedTheta {
  Vector theta;
  std::string warning;  // non-empty when theta was clamped
};

// Parameterized recognition density q_theta with a reparameterization pair
// (p(eps), g_theta).
class VariationalFamily {
 public:
  virtual ~VariationalFamily() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;

  // Validates theta, clamping where the family documents it.
  virtual CheckedTheta check_theta(const Vector& theta) const;

  virtual double log_q(const Vector& z, const Vector& theta) const = 0;
  virtual Vector noise_sample(Rng& rng) const = 0;
  virtual Vector transform(const Vector& theta, const Vector& eps) const = 0;
  Vector sample(const Vector& theta, Rng& rng) const { return transform(theta, noise_sample(rng)); }

  // Score: gradient of log q in theta at fixed z.
  virtual Vector grad_theta_log_q(const Vector& z, const Vector& theta) const = 0;
  // dz/dtheta at z = g_theta(eps); latent_dim x param_dim.
  virtual Matrix jacobian_g_theta(const Vector& theta, const Vector& eps) const = 0;
  // J^T v without forming J.
  virtual Vector jacobian_transpose_times(const Vector& theta, const Vector& eps,
                                          const Vector& v) const;
  virtual Vector grad_z_log_q(const Vector& z, const Vector& theta) const = 0;
};

using FamilyPtr = std::shared_ptr<const VariationalFamily>;

// UNIF(pi/2 - theta pi/2, pi/2 + theta pi/2), theta in (0, 2].
class UniformWidthFamily final : public VariationalFamily {
 public:
  std::string name() const override { return "uniform_width"; }
  std::size_t param_dim() const override { return 1; }
  std::size_t latent_dim() const override { return 1; }
  CheckedTheta check_theta(const Vector& theta) const override;
  double log_q(const Vector& z, const Vector& theta) const override;
  Vector noise_sample(Rng& rng) const override;
  Vector transform(const Vector& theta, const Vector& eps) const override;
  Vector grad_theta_log_q(const Vector& z, const Vector& theta) const override;
  Matrix jacobian_g_theta(const Vector& theta, const Vector& eps) const override;
  Vector jacobian_transpose_times(const Vector& theta, const Vector& eps,
                                  const Vector& v) const override;
  Vector grad_z_log_q(const Vector& z, const Vector& theta) const override;
};

// N(mu, diag(exp(2 log_sigma))), theta = (mu, log_sigma).
class DiagGaussianFamily final : public VariationalFamily {
 public:
  explicit DiagGaussianFamily(std::size_t dim);

  std::string name() const override { return "diag_gaussian"; }
  std::size_t param_dim() const override { return 2 * dim_; }
  std::size_t latent_dim() const override { return dim_; }
  double log_q(const Vector& z, const Vector& theta) const override;
  Vector noise_sample(Rng& rng) const override;
  Vector transform(const Vector& theta, const Vector& eps) const override;
  Vector grad_theta_log_q(const Vector& z, const Vector& theta) const override;
  Matrix jacobian_g_theta(const Vector& theta, const Vector& eps) const override;
  Vector jacobian_transpose_times(const Vector& theta, const Vector& eps,
                                  const Vector& v) const override;
  Vector grad_z_log_q(const Vector& z, const Vector& theta) const override;

  static Vector pack(const Vector& mu, const Vector& sigma);

 private:
  std::size_t dim_;
};

std::shared_ptr<const UniformWidthFamily> uniform_width_family();
std::shared_ptr<const DiagGaussianFamily> diag_gaussian_family(std::size_t dim);

}  // namespace fvi
