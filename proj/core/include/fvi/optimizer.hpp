#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fvi/divergence.hpp"
#include "fvi/estimators.hpp"
#include "fvi/families.hpp"
#include "fvi/model.hpp"

namespace fvi {

enum class OptimizerKind { adam, sgd };
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer_kind(std::string_view s);

struct AdamHyper {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  std::size_t t = 0;
};

// One bias-corrected Adam step on a minimized objective.
Vector adam_step(const Vector& theta, const Vector& grad, AdamState& state, const AdamHyper& h);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamHyper hyper;
  std::size_t epochs = 100;
  std::size_t batch_size = 0;  // 0: full batch
  std::size_t K = 100;
  std::size_t L = 1;
  std::uint64_t seed = 0;
  GradientKind gradient = GradientKind::reparam;
  Objective objective = Objective::raw;
  DivergenceGenerator generator;
  Direction direction = Direction::reverse;
  double tol = 1e-5;          // relative change of the smoothed bound
  std::size_t patience = 20;  // evaluations below tol before stopping; 0 disables
  double ema_decay = 0.9;
  double clip_norm = 1e3;
  std::size_t theta_every = 0;  // theta snapshot cadence in steps; 0: never
  EstimatorOptions estimator;

  void validate(std::size_t data_size) const;
};

struct TrainStep {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double bound = kNaN;  // raw bound on the minibatch view
  double bound_stderr = kNaN;
  double objective = kNaN;  // quantity being minimized
  double ema = kNaN;
  double grad_norm = 0.0;
  bool clipped = false;
  std::size_t degenerate = 0;
  std::optional<Vector> theta;
};

struct TrainTrace {
  std::vector<TrainStep> steps;
  std::size_t clip_count = 0;
  std::size_t degenerate_total = 0;
  bool converged = false;
  std::string stop_reason;
  double wall_seconds = 0.0;

  // One JSON object per line.
  std::string to_json_lines() const;
};

struct TrainResult {
  Vector theta;
  TrainTrace trace;
};

using StepCallback = std::function<void(const TrainStep&)>;

TrainResult train(const LatentModel& model, const VariationalFamily& family, const Vector& theta0,
                  const TrainConfig& config, const StepCallback& on_step = {});

}  // namespace fvi
