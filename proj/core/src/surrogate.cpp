#include "fvi/surrogate.hpp"

#include <cmath>

namespace fvi {

SurrogateReport check_surrogate_identity(const DivergenceGenerator& g, double lambda,
                                         const Density1D& p, const Density1D& q,
                                         int trace_steps) {
  SurrogateReport rep;
  rep.lambda = lambda;
  rep.d_f = divergence_quadrature(g, q, p, Direction::reverse).value;
  const auto s = make_surrogate(g, lambda);
  rep.d_surrogate = divergence_quadrature(s, q, p, Direction::reverse).value;
  if (g.homogeneity.tag != HomogeneityTag::Unclassified)
    rep.discrepancy = std::abs(rep.d_surrogate - std::pow(lambda, g.homogeneity.gamma) * rep.d_f);
  for (int n = 1; n <= trace_steps; ++n) {
    const double ln = 1.0 + std::ldexp(1.0, -n);
    const auto sn = make_surrogate(g, ln);
    const double dn = divergence_quadrature(sn, q, p, Direction::reverse).value;
    rep.trace.push_back({n, ln, std::abs(dn - rep.d_f)});
  }
  return rep;
}

}  // namespace fvi
