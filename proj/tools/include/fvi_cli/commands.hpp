#pragma once

#include <string>
#include <vector>

#include "fvi/divergence.hpp"
#include "fvi/families.hpp"
#include "fvi/models.hpp"
#include "fvi_cli/config.hpp"

namespace fvi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitInvariant = 3;

// Model plus an optional held-out copy (same spec, test observations).
struct ModelBundle {
  ModelPtr model;
  ModelPtr test;
  std::shared_ptr<const Dataset> train_data;
  std::shared_ptr<const Dataset> test_data;
};

// Builders read their section, fill every default back into it and reject
// unknown keys, so the echoed config is complete.
ModelBundle build_model(json& spec);
FamilyPtr build_family(json& spec, const LatentModel& model);
Vector build_theta(json& spec, const VariationalFamily& family);
DivergenceGenerator build_divergence(json& spec);
Direction build_direction(json& spec, const DivergenceGenerator& g);

// Each command resolves its config in place and returns a RunRecord:
// {config, version, results, timing, diagnostics}.
json cmd_bound(json config);
json cmd_sandwich(json config);
json cmd_train(json config);
json cmd_meanfield(json config);
json cmd_check(json config);
json cmd_dataset(json config);

// Dispatch on config["command"].
json run_command(json config);

// Exit status for a RunRecord (check failures map to kExitInvariant).
int record_exit_code(const json& record);

// Default seed: FVI_SEED if set, else 1.
std::uint64_t default_seed();

}  // namespace fvi::cli
