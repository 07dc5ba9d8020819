// Serial reference GEMMs against the OpenMP kernels at shapes the desk model hits.
#include <vector>

#include <benchmark/benchmark.h>

#include "tsg/kernels.hpp"
#include "tsg/rng.hpp"

namespace {

using GemmFn = void (*)(const tsg::Real*, const tsg::Real*, tsg::Real*, std::size_t, std::size_t, std::size_t, bool);

std::vector<tsg::Real> fill(std::size_t n, std::uint64_t seed) {
  const tsg::CounterRng rng(seed);
  std::vector<tsg::Real> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<tsg::Real>(rng.uniform(0, i, -1, 1));
  return v;
}

template <GemmFn F>
void run(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto p = static_cast<std::size_t>(state.range(2));
  const auto a = fill(m * k, 1), b = fill(k * p, 2);
  std::vector<tsg::Real> c(m * p);
  for (auto _ : state) {
    F(a.data(), b.data(), c.data(), m, k, p, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * p));
}

// (tokens, in, out): stage-1 projections, stage-1 attention logits, MLP.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({256, 32, 32})->Args({256, 16, 256})->Args({256, 64, 256})->Args({256, 128, 64})->Args({64, 256, 64});
}

BENCHMARK(run<tsg::kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Apply(shapes);
BENCHMARK(run<tsg::kernels::gemm_nn>)->Name("gemm_nn/openmp")->Apply(shapes);
BENCHMARK(run<tsg::kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Apply(shapes);
BENCHMARK(run<tsg::kernels::gemm_nt>)->Name("gemm_nt/openmp")->Apply(shapes);
BENCHMARK(run<tsg::kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Apply(shapes);
BENCHMARK(run<tsg::kernels::gemm_tn>)->Name("gemm_tn/openmp")->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
