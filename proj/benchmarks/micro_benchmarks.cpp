// Micro-benchmarks for the hot paths: batch expression evaluation, structure
// detection, library factor fits, and the end-to-end pipeline on a small
// target. Run with --benchmark_filter=<regex> to select a subset.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "bbp/engines.hpp"
#include "bbp/expr.hpp"
#include "bbp/harness.hpp"
#include "bbp/pipeline.hpp"
#include "bbp/sampling.hpp"
#include "bbp/separability.hpp"

namespace {

bbp::Matrix sample(int dim, int rows, std::uint64_t seed) {
  bbp::SamplingPlan plan;
  plan.dimension = dim;
  plan.box = bbp::Box(static_cast<std::size_t>(dim), bbp::Interval{-3.0, 3.0});
  plan.sample_count = rows;
  plan.seed = seed;
  return bbp::draw_base_sample(plan);
}

void evaluate_case1(benchmark::State& state) {
  const bbp::Expr expr = bbp::parse_expression("1.2 + 10*sin(2*x1 - x3) - 3*x2^2");
  const bbp::Matrix x = sample(3, static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    const bbp::EvalResult r = bbp::evaluate(expr, x);
    benchmark::DoNotOptimize(r.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(evaluate_case1)->Arg(100)->Arg(1000)->Arg(10000);

void evaluate_guarded_division(benchmark::State& state) {
  const bbp::Expr expr = bbp::parse_expression("5*sin(3*x1*x2)/(x3 + x4)");
  const bbp::Matrix x = sample(4, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    const bbp::EvalResult r = bbp::evaluate(expr, x);
    benchmark::DoNotOptimize(r.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(evaluate_guarded_division)->Arg(1000);

void detect_case5(benchmark::State& state) {
  const auto& c = bbp::builtin_cases()[4];
  const bbp::Oracle oracle = bbp::case_oracle(c);
  for (auto _ : state) {
    const bbp::SeparableStructure s = bbp::detect_structure(oracle, c.domain);
    benchmark::DoNotOptimize(s.blocks.data());
  }
}
BENCHMARK(detect_case5)->Unit(benchmark::kMillisecond);

void library_fit_sine(benchmark::State& state) {
  const bbp::Matrix x = sample(1, 300, 3);
  const bbp::Expr shape = bbp::parse_expression("4*sin(2*x1 - 0.5)");
  const bbp::EvalResult y = bbp::evaluate(shape, x);
  bbp::EngineConfig config;
  for (auto _ : state) {
    const bbp::FactorModel m = bbp::fit_library(x, y.values, bbp::FitMode::Scale, config);
    benchmark::DoNotOptimize(m.mse);
  }
}
BENCHMARK(library_fit_sine)->Unit(benchmark::kMillisecond);

void pipeline_case1(benchmark::State& state) {
  const auto& c = bbp::builtin_cases()[0];
  const bbp::Oracle oracle = bbp::case_oracle(c);
  bbp::PipelineConfig config;
  config.sample_count = c.sample_count;
  for (auto _ : state) {
    const bbp::BBPResult r = bbp::run_bbp(oracle, c.domain, config);
    benchmark::DoNotOptimize(r.model.validation_mse);
  }
}
BENCHMARK(pipeline_case1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
