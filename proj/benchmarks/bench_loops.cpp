#include <benchmark/benchmark.h>

#include "biloop/aid.hpp"
#include "biloop/analysis.hpp"
#include "biloop/itd.hpp"
#include "biloop/problems.hpp"

namespace {

using biloop::CostCounters;
using biloop::DenseVector;

biloop::BilevelOracle make_oracle(std::size_t dim) {
  return biloop::problems::make_seeded_quadratic(dim, dim, 10.0, 12345);
}

void bench_inner_gd(benchmark::State& state) {
  const auto oracle = make_oracle(static_cast<std::size_t>(state.range(0)));
  const DenseVector x(oracle.dim_x, 0.3);
  const DenseVector y0(oracle.dim_y, 0.0);
  const double alpha = 1.0 / oracle.constants.L;
  for (auto _ : state) {
    CostCounters counters;
    benchmark::DoNotOptimize(biloop::aid::inner_gd(oracle, x, y0, 32, alpha, counters));
  }
}
BENCHMARK(bench_inner_gd)->Arg(5)->Arg(20)->Arg(80);

void bench_linear_system_gd(benchmark::State& state) {
  const auto oracle = make_oracle(static_cast<std::size_t>(state.range(0)));
  const DenseVector x(oracle.dim_x, 0.3);
  const DenseVector y = oracle.exact.y_star(x);
  const DenseVector v0(oracle.dim_y, 0.0);
  const double eta = 1.0 / oracle.constants.L;
  for (auto _ : state) {
    CostCounters counters;
    benchmark::DoNotOptimize(
        biloop::aid::linear_system_gd(oracle, x, y, v0, 32, eta, counters));
  }
}
BENCHMARK(bench_linear_system_gd)->Arg(5)->Arg(20)->Arg(80);

void bench_itd_reverse_pass(benchmark::State& state) {
  const auto oracle = make_oracle(5);
  const DenseVector x(oracle.dim_x, 0.3);
  const DenseVector y0(oracle.dim_y, 0.0);
  const double alpha = 1.0 / oracle.constants.L;
  CostCounters counters;
  const auto traj = biloop::itd::inner_gd_with_trajectory(
      oracle, x, y0, static_cast<std::size_t>(state.range(0)), alpha, counters);
  for (auto _ : state) {
    CostCounters scratch;
    benchmark::DoNotOptimize(
        biloop::itd::itd_hypergradient(oracle, x, traj, alpha, scratch));
  }
}
BENCHMARK(bench_itd_reverse_pass)->Arg(8)->Arg(64)->Arg(512);

void bench_run_aid(benchmark::State& state) {
  const auto oracle = make_oracle(5);
  biloop::aid::LoopConfig config;
  config.N = static_cast<std::size_t>(state.range(0));
  config.Q = config.N;
  config.K = 50;
  config.alpha = 1.0 / oracle.constants.L;
  config.eta = config.alpha;
  config.beta = 0.5 / biloop::analysis::smoothness_constant(oracle.constants);
  config.x0 = DenseVector(oracle.dim_x, 0.3);
  config.y0 = DenseVector(oracle.dim_y, 0.0);
  config.v0 = DenseVector(oracle.dim_y, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(biloop::aid::run_aid(oracle, config));
  }
}
BENCHMARK(bench_run_aid)->Arg(1)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
