#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fvi/divergence.hpp"
#include "fvi/families.hpp"
#include "fvi/model.hpp"

namespace fvi {

enum class EstimatorKind { bound, iw_bound };
enum class GradientKind { score, reparam, iw_reparam };
// raw: the Monte Carlo bound itself. log: the conventional log-scale bound
// (ELBO, CUBO_n, RVB); biased but stable when ratios span many decades.
enum class Objective { raw, log };

std::string to_string(EstimatorKind k);
std::string to_string(GradientKind k);
std::string to_string(Objective o);
GradientKind parse_gradient_kind(std::string_view s);
Objective parse_objective(std::string_view s);

struct EstimatorOptions {
  unsigned threads = 1;
  std::size_t chunk = 1024;   // outer samples per RNG substream
  bool keep_samples = false;  // store per-sample log ratios in the estimate
};

struct BoundEstimate {
  double value = kNaN;
  double stderr_ = kNaN;
  std::size_t K = 0;
  std::size_t L = 1;
  std::string divergence;
  Direction direction = Direction::reverse;
  EstimatorKind kind = EstimatorKind::bound;

  bool degenerate = false;
  std::string degenerate_reason;
  std::size_t zero_ratio = 0;      // outer samples with (averaged) ratio 0
  std::size_t outside_domain = 0;  // ratios outside the generator's convex domain
  double log_ratio_min = kNaN;     // finite realized range of log ratios
  double log_ratio_max = kNaN;

  // Conventional log-scale evidence bound for -log and power generators.
  std::optional<double> log_evidence;
  std::optional<double> log_evidence_stderr;
  bool log_evidence_biased = false;

  std::vector<double> log_ratios;  // only with keep_samples
};

struct GradientEstimate {
  Vector value;
  Vector stderr_;
  GradientKind kind = GradientKind::reparam;
  Objective objective = Objective::raw;
  double objective_value = kNaN;  // raw bound or its log-scale transform
  BoundEstimate bound;            // bound estimate from the same draws
  std::size_t subgradient_hits = 0;
  std::size_t degenerate = 0;  // outer samples dropped from the gradient
};

BoundEstimate bound_mc(const DivergenceGenerator& g, Direction direction, const LatentModel& model,
                       const VariationalFamily& family, const Vector& theta, std::size_t K,
                       std::uint64_t seed, const EstimatorOptions& opt = {});

BoundEstimate iw_bound_mc(const DivergenceGenerator& g, Direction direction,
                          const LatentModel& model, const VariationalFamily& family,
                          const Vector& theta, std::size_t K, std::size_t L, std::uint64_t seed,
                          const EstimatorOptions& opt = {});

GradientEstimate grad_score(const DivergenceGenerator& g, Direction direction,
                            const LatentModel& model, const VariationalFamily& family,
                            const Vector& theta, std::size_t K, std::uint64_t seed,
                            const EstimatorOptions& opt = {}, Objective objective = Objective::raw);

GradientEstimate grad_reparam(const DivergenceGenerator& g, Direction direction,
                              const LatentModel& model, const VariationalFamily& family,
                              const Vector& theta, std::size_t K, std::uint64_t seed,
                              const EstimatorOptions& opt = {},
                              Objective objective = Objective::raw);

GradientEstimate grad_iw_reparam(const DivergenceGenerator& g, Direction direction,
                                 const LatentModel& model, const VariationalFamily& family,
                                 const Vector& theta, std::size_t K, std::size_t L,
                                 std::uint64_t seed, const EstimatorOptions& opt = {},
                                 Objective objective = Objective::raw);

// Dispatch on kind; L is ignored for score and reparam.
GradientEstimate estimate_gradient(GradientKind kind, const DivergenceGenerator& g,
                                   Direction direction, const LatentModel& model,
                                   const VariationalFamily& family, const Vector& theta,
                                   std::size_t K, std::size_t L, std::uint64_t seed,
                                   const EstimatorOptions& opt = {},
                                   Objective objective = Objective::raw);

// Which side of p(D) a bound can certify.
enum class EvidenceSide { lower, upper };

struct BoundSpec {
  DivergenceGenerator generator;
  Direction direction = Direction::reverse;
};

struct SandwichSide {
  std::string divergence;
  Direction direction = Direction::reverse;
  BoundEstimate bound;
  double evidence = kNaN;      // inverse of the bound on the matching branch
  double log_evidence = kNaN;  // computed in log space when the generator allows it
  double log_evidence_stderr = kNaN;
  bool valid = false;
  std::string reason;
  // Whether the integrand is monotone in the required direction over the
  // realized range of ratios (premise of the two-sided inversion).
  bool monotone_on_samples = false;
};

struct SandwichResult {
  SandwichSide lower;
  SandwichSide upper;
  bool ordered() const;  // lower <= upper when both are valid
};

// Both bounds are computed from one set of draws.
SandwichResult sandwich(const BoundSpec& upper, const BoundSpec& lower, const LatentModel& model,
                        const VariationalFamily& family, const Vector& theta, std::size_t K,
                        std::size_t L, std::uint64_t seed, const EstimatorOptions& opt = {});

// Evidence-scale inversion of a bound value (sublevel-set end of the convex
// integrand): lower -> smallest t with phi(t) <= B, upper -> largest.
std::optional<double> invert_bound(const GeneratorSide& side, double bound, EvidenceSide which);

}  // namespace fvi
