#include <benchmark/benchmark.h>

#include "fvi/meanfield.hpp"
#include "fvi/models.hpp"
#include "fvi/oracle.hpp"

using namespace fvi;

static void BM_EvidenceQuadrature(benchmark::State& state) {
  const auto m = synthetic_sin_model(generate_sin_data(static_cast<std::size_t>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(evidence_quadrature(*m).log_value);
}
BENCHMARK(BM_EvidenceQuadrature)->Arg(1)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_DivergenceQuadrature(benchmark::State& state) {
  const auto g = registry_lookup("hellinger_alpha", {{"alpha", 3}});
  const auto p = Density1D::normal(0.0, 1.0), q = Density1D::normal(0.3, 1.1);
  for (auto _ : state) benchmark::DoNotOptimize(divergence_quadrature(g, q, p, Direction::reverse).value);
}
BENCHMARK(BM_DivergenceQuadrature)->Unit(benchmark::kMicrosecond);

namespace {

std::shared_ptr<const CorrelatedGaussianTarget> target(std::size_t J) {
  Matrix P = Matrix::Identity(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J)) * 2.0;
  for (Eigen::Index i = 0; i + 1 < P.rows(); ++i) P(i, i + 1) = P(i + 1, i) = 0.6;
  return correlated_gaussian_target(Vector::Zero(static_cast<Eigen::Index>(J)), P);
}

}  // namespace

static void BM_MeanfieldUpdate(benchmark::State& state) {
  const auto t = target(2);
  const auto s = initial_state({{0.1, 0.8}, {-0.2, 0.6}});
  const auto g = state.range(0) == 0 ? registry_lookup("kl") : registry_lookup("chi_n", {{"n", 2}});
  state.SetLabel(g.name);
  MeanFieldOptions opt;
  opt.analytic = false;
  for (auto _ : state) {
    const Factor f = state.range(0) == 0 ? update_rule_f1(s, 0, *t, g, opt) : update_rule_f0(s, 0, *t, g, opt);
    benchmark::DoNotOptimize(f.mean());
  }
}
BENCHMARK(BM_MeanfieldUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_CaviClosedForm(benchmark::State& state) {
  const auto t = target(static_cast<std::size_t>(state.range(0)));
  const auto s = initial_state(std::vector<GaussianFactor>(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(cavi_update_kl(s, 0, *t).mean());
}
BENCHMARK(BM_CaviClosedForm)->Arg(2)->Arg(64)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
