#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fvi/divergence.hpp"

namespace fvi {

inline constexpr double kHomogeneityTolerance = 1e-9;

struct InvariantResult {
  std::string name;
  bool passed = true;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct InvariantReport {
  std::string subject;
  std::vector<InvariantResult> results;

  bool passed() const;
  void add(InvariantResult r) { results.push_back(std::move(r)); }
};

// Largest scaled residual of the shifted-homogeneity decomposition over
// log-uniform pairs (t, t~) in [0.1, 10]:
//   F0: f(t t~) = t^g f(t~) + f(t),  F1: f(t t~) = t^g f(t~) + f(t) t~.
double homogeneity_residual(const GeneratorSide& f, const HomogeneityClass& c,
                            std::size_t pairs = 100, std::uint64_t seed = 7);

// Tries both decompositions with gamma fitted by least squares and returns the
// first that verifies, otherwise Unclassified.
HomogeneityClass classify_homogeneity(const GeneratorSide& f);

// Full invariant suite on a log-spaced grid over each side's domain.
InvariantReport check_generator(const DivergenceGenerator& g, std::size_t grid_points = 200);

// Log-spaced grid over (lo, hi]; unbounded ends are truncated to [1e-3, 1e3].
std::vector<double> validity_grid(const Interval& domain, std::size_t n);

}  // namespace fvi
