#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "fvi/divergence.hpp"
#include "fvi/model.hpp"
#include "fvi/random.hpp"

namespace fvi {

struct Density1D {
  std::function<double(double)> log_density;
  Range support;
  // Location and spread used to pick the integration window (mean and sd
  // for Gaussians).
  double center = 0.0;
  double scale = 1.0;
  std::function<double(Rng&)> sampler;

  double window_lo() const;
  double window_hi() const;

  static Density1D normal(double mean, double sd);
  static Density1D uniform(double a, double b);
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t nodes = 0;
  // log(value), kept separately so tiny evidences are not lost.
  double log_value = -kInf;
};

struct QuadratureOptions {
  std::size_t panels = 64;
  double panel_tolerance = 1e-13;
  unsigned max_depth = 15;
};

// Adaptive Gauss-Kronrod integral of f over [a, b], split into equal panels.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opt = {});

// reverse: integral of f(q/p) p;  forward: integral of f(p/q) q.
QuadratureResult divergence_quadrature(const DivergenceGenerator& g, const Density1D& q,
                                       const Density1D& p, Direction direction,
                                       const QuadratureOptions& opt = {});

// p(D) = integral of p(z, D) dz for latent dimension 1 or 2.
QuadratureResult evidence_quadrature(const LatentModel& model, const QuadratureOptions& opt = {});

struct EvidenceEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  double log_value = -kInf;
  std::size_t K = 0;
};

inline constexpr std::size_t kDefaultEvidenceSamples = 500000;

// Naive Monte Carlo (1/K) sum p(D | z_k), z_k drawn from the prior.
EvidenceEstimate evidence_mc(const LatentModel& model, std::size_t K = kDefaultEvidenceSamples,
                             std::uint64_t seed = 0, unsigned threads = 1);

// Closed forms for Gaussians q = N(mq, sq^2), p = N(mp, sp^2).
double gaussian_kl(double mq, double sq, double mp, double sp);
// integral of q^a p^(1-a); finite when a sp^2 + (1-a) sq^2 > 0.
double gaussian_power_moment(double a, double mq, double sq, double mp, double sp);

}  // namespace fvi
