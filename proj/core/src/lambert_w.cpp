#include <cmath>
#include <string>

#include "fvi/divergence.hpp"
#include "fvi/errors.hpp"

namespace fvi {

double lambert_w(double t) {
  constexpr double kBranch = -0.36787944117144232160;  // -1/e
  if (std::isnan(t) || t < kBranch)
    throw DomainError("lambert_w: argument " + std::to_string(t) + " is below -1/e");
  if (t == kBranch) return -1.0;
  if (t == 0.0) return 0.0;
  if (std::isinf(t)) return kInf;

  double w;
  if (t < -0.32) {
    // Series around the branch point.
    const double p = std::sqrt(2.0 * (std::exp(1.0) * t + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (t < 3.0) {
    w = std::log1p(t);
    w *= 1.0 - std::log1p(w) / (2.0 + w);
  } else {
    const double l1 = std::log(t);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  // Halley iteration on w e^w - t.
  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double r = w * ew - t;
    const double d1 = ew * (w + 1.0);
    if (d1 == 0.0) break;
    const double step = r / (d1 - (w + 2.0) * r / (2.0 * w + 2.0));
    w -= step;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace fvi
