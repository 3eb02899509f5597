#include <benchmark/benchmark.h>

#include "fvi/estimators.hpp"
#include "fvi/families.hpp"
#include "fvi/models.hpp"

using namespace fvi;

namespace {

const auto& sin_model() {
  static const auto m = synthetic_sin_model(generate_sin_data(50, 1));
  return *m;
}

const auto& conj_model() {
  static const auto m = conjugate_gaussian_model(0.0, 1.0, 0.5, {0.3, -0.4, 0.8});
  return *m;
}

Vector one(double v) {
  Vector t(1);
  t << v;
  return t;
}

Vector diag_theta() {
  Vector t(2);
  t << 0.1, -0.8;
  return t;
}

}  // namespace

static void BM_BoundMc(benchmark::State& state) {
  const auto g = registry_lookup("chi_n", {{"n", 2}});
  const auto u = uniform_width_family();
  const auto K = static_cast<std::size_t>(state.range(0));
  EstimatorOptions opt;
  opt.threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(bound_mc(g, Direction::forward, sin_model(), *u, one(1.1), K, 1, opt).value);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BoundMc)->Args({10000, 1})->Args({100000, 1})->Args({100000, 4})->Unit(benchmark::kMillisecond);

static void BM_IwBound(benchmark::State& state) {
  const auto g = registry_lookup("kl");
  const auto u = uniform_width_family();
  const auto L = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(iw_bound_mc(g, Direction::reverse, sin_model(), *u, one(1.1), 10000, L, 1).value);
  state.SetItemsProcessed(state.iterations() * 10000 * state.range(0));
}
BENCHMARK(BM_IwBound)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_Gradient(benchmark::State& state) {
  const auto g = registry_lookup("hellinger_alpha", {{"alpha", 3}});
  const auto f = diag_gaussian_family(1);
  const auto kind = static_cast<GradientKind>(state.range(0));
  state.SetLabel(to_string(kind));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_gradient(kind, g, Direction::reverse, conj_model(), *f, diag_theta(), 10000, 4, 1).value);
}
BENCHMARK(BM_Gradient)
    ->Arg(static_cast<int>(GradientKind::score))
    ->Arg(static_cast<int>(GradientKind::reparam))
    ->Arg(static_cast<int>(GradientKind::iw_reparam))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
