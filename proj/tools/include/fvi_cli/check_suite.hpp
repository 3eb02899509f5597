#pragma once

#include <vector>

#include "fvi/generator_checks.hpp"

namespace fvi::cli {

// Invariant ledger behind `fvi check`. The quick level covers generator
// algebra, quadrature oracles and cheap Monte Carlo identities; full adds
// gradient, mean-field and evidence cross-checks.
std::vector<InvariantResult> run_check_suite(bool full);

}  // namespace fvi::cli
