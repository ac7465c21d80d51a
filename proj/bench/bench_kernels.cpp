// Serial-vs-parallel comparison for the two hot kernels: dense gemm inside
// the network and the exhaustive assignment-table build behind the
// probabilistic evaluator.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "symcor/kernels.hpp"
#include "symcor/prob_eval.hpp"
#include "symcor/trainer.hpp"

namespace {

std::vector<double> random_matrix(size_t rows, size_t cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> m(rows * cols);
  for (double& v : m) v = dist(rng);
  return m;
}

template <auto Kernel>
void bm_gemm(benchmark::State& state) {
  const size_t m = static_cast<size_t>(state.range(0));
  const size_t k = static_cast<size_t>(state.range(1));
  const size_t n = static_cast<size_t>(state.range(2));
  const std::vector<double> a = random_matrix(m, k, 1);
  const std::vector<double> b = random_matrix(k, n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a.data(), b.data(), c.data(), m, k, n, false, false);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(m * k * n));
}

void gemm_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 512, 128});    // training batch through the first hidden layer
  b->Args({128, 128, 128});
  b->Args({512, 512, 512});
}

template <symcor::AssignmentTable::Build Mode>
void bm_table_build(benchmark::State& state) {
  const symcor::datalog::Program program =
      symcor::datalog::parse_program(symcor::builtin_addition_source());
  const symcor::GroupSpec spec = symcor::GroupSpec::from_program(program);
  for (auto _ : state) {
    symcor::AssignmentTable table(program, spec, Mode);
    benchmark::DoNotOptimize(&table);
  }
}

BENCHMARK(bm_gemm<symcor::kernels::gemm_serial>)->Apply(gemm_args)->Name("gemm_serial");
BENCHMARK(bm_gemm<symcor::kernels::gemm_parallel>)->Apply(gemm_args)->Name("gemm_parallel");
BENCHMARK(bm_table_build<symcor::AssignmentTable::Build::Serial>)->Name("table_build_serial");
BENCHMARK(bm_table_build<symcor::AssignmentTable::Build::Parallel>)->Name("table_build_parallel");

}  // namespace

BENCHMARK_MAIN();
