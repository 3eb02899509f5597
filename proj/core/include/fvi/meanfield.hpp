#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fvi/divergence.hpp"
#include "fvi/model.hpp"

namespace fvi {

struct GaussianFactor {
  double mean = 0.0;
  double var = 1.0;
};

// Log density on a uniform grid, normalized by the trapezoid rule.
struct GridFactor {
  double lo = 0.0;
  double step = 1.0;
  std::vector<double> log_density;

  std::size_t size() const { return log_density.size(); }
  double z(std::size_t i) const { return lo + step * static_cast<double>(i); }
  double integral() const;  // trapezoid integral of the density
};

struct Factor {
  std::variant<GaussianFactor, GridFactor> rep;

  bool gridded() const { return std::holds_alternative<GridFactor>(rep); }
  double mean() const;
  double var() const;
};

struct MeanFieldOptions {
  std::size_t grid_points = 512;
  double grid_halfwidth = 8.0;  // in standard deviations of the current factor
  std::size_t gauss_hermite_nodes = 32;
  std::size_t max_product_nodes = std::size_t{1} << 20;
  std::size_t mc_samples = 10000;  // inner expectations when the product rule is too large
  std::uint64_t seed = 0;
  bool analytic = true;  // closed-form CAVI where the model allows it
};

enum class MeanFieldRule { reverse_f1, forward_f0 };
std::string to_string(MeanFieldRule r);

struct MeanFieldState {
  std::vector<Factor> factors;
  std::size_t iterations = 0;  // completed sweeps
  std::vector<double> bound_trace;   // after each sweep, index 0 = initial state
  std::vector<double> update_trace;  // after each coordinate update
  double max_update_increase = 0.0;  // largest bound increase over one update
  std::size_t clamped_points = 0;    // grid points where the inverse was clamped to 0
  bool converged = false;
  MeanFieldRule rule = MeanFieldRule::reverse_f1;
};

MeanFieldState initial_state(const std::vector<GaussianFactor>& factors);

// Quadrature nodes and weights for E_{N(0,1)}[h(x)].
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(std::size_t n);

// q_j ~ exp(E_{q-j}[log p(z, D)]). Closed form for CorrelatedGaussianTarget
// when opt.analytic is set, otherwise a grid update.
Factor cavi_update_kl(const MeanFieldState& state, std::size_t j, const LatentModel& model,
                      const MeanFieldOptions& opt = {});

// q_j ~ f*^-1(E_{q-j}[f*(p / q-j)]) for f in F1 (reverse bound).
Factor update_rule_f1(const MeanFieldState& state, std::size_t j, const LatentModel& model,
                      const DivergenceGenerator& g, const MeanFieldOptions& opt = {},
                      std::size_t* clamped = nullptr);

// q_j ~ f^-1(E_{q-j}[f(p / q-j)]) for f in F0 (forward bound).
Factor update_rule_f0(const MeanFieldState& state, std::size_t j, const LatentModel& model,
                      const DivergenceGenerator& g, const MeanFieldOptions& opt = {},
                      std::size_t* clamped = nullptr);

// F1 generators use the reverse rule, F0 the forward rule.
MeanFieldRule select_rule(const DivergenceGenerator& g);

// E_q[phi(p/q)] for the bound side of the rule.
double meanfield_bound(const MeanFieldState& state, const LatentModel& model,
                       const DivergenceGenerator& g, MeanFieldRule rule,
                       const MeanFieldOptions& opt = {});

MeanFieldState run_meanfield(const LatentModel& model, MeanFieldState init,
                             const DivergenceGenerator& g, std::size_t max_sweeps, double tol,
                             const MeanFieldOptions& opt = {});

// Density of a factor as CSV rows "z,density".
std::string factor_csv(const Factor& f, const MeanFieldOptions& opt = {});

}  // namespace fvi
