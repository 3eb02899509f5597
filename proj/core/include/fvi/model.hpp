#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fvi/numeric.hpp"
#include "fvi/random.hpp"

namespace fvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Closed interval on the real line; ends may be infinite.
struct Range {
  double lo = -kInf;
  double hi = kInf;
};

// A latent-variable model bound to its dataset D = {x_1..x_N}.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t data_size() const = 0;

  virtual double log_prior(const Vector& z) const = 0;
  virtual double log_likelihood(std::size_t n, const Vector& z) const = 0;

  // Sum over the listed data points; models may override with a faster path.
  virtual double log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const;
  // Sum over the whole dataset.
  virtual double log_likelihood_sum(const Vector& z) const;
  double log_joint(const Vector& z) const;

  virtual bool has_gradient() const { return false; }
  virtual Vector grad_log_prior(const Vector& z) const;
  virtual Vector grad_log_likelihood_batch(const Vector& z, std::span<const std::size_t> idx) const;
  virtual Vector grad_log_likelihood_sum(const Vector& z) const;
  Vector grad_log_joint(const Vector& z) const;

  virtual bool can_sample_prior() const { return false; }
  virtual Vector sample_prior(Rng& rng) const;

  // Per-dimension window holding all but a negligible part of the posterior
  // mass, used by evidence quadrature. Defaults to the whole line.
  virtual std::vector<Range> quadrature_window() const;
};

using ModelPtr = std::shared_ptr<const LatentModel>;

// Average-likelihood view: full prior plus (N/M) times the likelihood of the
// batch. The view has data_size() = M and forwards gradients accordingly.
class MinibatchView final : public LatentModel {
 public:
  MinibatchView(const LatentModel& base, std::vector<std::size_t> batch);

  std::string name() const override { return base_.name() + "[minibatch]"; }
  std::size_t latent_dim() const override { return base_.latent_dim(); }
  std::size_t data_size() const override { return batch_.size(); }
  double log_prior(const Vector& z) const override { return base_.log_prior(z); }
  double log_likelihood(std::size_t n, const Vector& z) const override;
  double log_likelihood_sum(const Vector& z) const override;
  bool has_gradient() const override { return base_.has_gradient(); }
  Vector grad_log_prior(const Vector& z) const override { return base_.grad_log_prior(z); }
  Vector grad_log_likelihood_sum(const Vector& z) const override;
  bool can_sample_prior() const override { return base_.can_sample_prior(); }
  Vector sample_prior(Rng& rng) const override { return base_.sample_prior(rng); }
  std::vector<Range> quadrature_window() const override { return base_.quadrature_window(); }

  double scale() const { return scale_; }

 private:
  const LatentModel& base_;
  std::vector<std::size_t> batch_;
  double scale_;
  bool full_;
};

MinibatchView minibatch_adapter(const LatentModel& model, std::vector<std::size_t> batch,
                                std::size_t full_n);

}  // namespace fvi
