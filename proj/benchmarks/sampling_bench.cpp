#include <benchmark/benchmark.h>

#include "stratcube/generator.hpp"
#include "stratcube/kernel.hpp"
#include "stratcube/stratified.hpp"

namespace {

using namespace stratcube;

void BM_KernelVector(benchmark::State& state) {
  const auto r = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  DenseMatrix b(r, r - 1);
  for (double& v : b.data()) v = rng.uniform() - 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(kernel_vector(b));
}
BENCHMARK(BM_KernelVector)->Arg(4)->Arg(16)->Arg(64);

BalanceSystem system_of(std::size_t strata, std::size_t units, double nh) {
  GeneratorSpec spec;
  spec.strata = strata;
  spec.units_per_stratum = units;
  spec.nh = nh;
  return build_system(generate_population(spec, 1));
}

void BM_Method(benchmark::State& state, Method method, double nh) {
  const auto system = system_of(static_cast<std::size_t>(state.range(0)), 3, nh);
  std::uint64_t r = 0;
  for (auto _ : state) {
    Rng rng = Rng::stream(2, r++);
    benchmark::DoNotOptimize(run_method(method, system, rng));
  }
}
BENCHMARK_CAPTURE(BM_Method, proposed_nh2, Method::proposed, 2.0)->Arg(50)->Arg(200);
BENCHMARK_CAPTURE(BM_Method, proposed_nh1_4, Method::proposed, 1.4)->Arg(50)->Arg(200);
BENCHMARK_CAPTURE(BM_Method, hasler_nh1_4, Method::hasler, 1.4)->Arg(50)->Arg(200);
BENCHMARK_CAPTURE(BM_Method, chauvet_nh1_4, Method::chauvet, 1.4)->Arg(50)->Arg(200);
BENCHMARK_CAPTURE(BM_Method, cube_nh2, Method::cube, 2.0)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
