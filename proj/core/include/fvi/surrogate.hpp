#pragma once

#include <optional>
#include <vector>

#include "fvi/divergence.hpp"
#include "fvi/oracle.hpp"

namespace fvi {

struct SurrogateTracePoint {
  int n = 0;
  double lambda = 1.0;
  double gap = 0.0;  // |D_{f_lambda_n}(q||p) - D_f(q||p)|
};

struct SurrogateReport {
  double lambda = 1.0;
  double d_f = 0.0;
  double d_surrogate = 0.0;
  // |D_{f_lambda} - lambda^gamma D_f|; absent for unclassified generators.
  std::optional<double> discrepancy;
  std::vector<SurrogateTracePoint> trace;  // lambda_n = 1 + 2^-n
};

SurrogateReport check_surrogate_identity(const DivergenceGenerator& g, double lambda,
                                         const Density1D& p, const Density1D& q,
                                         int trace_steps = 10);

}  // namespace fvi
