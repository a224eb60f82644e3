#include <benchmark/benchmark.h>

#include "regalloc/corpus.hpp"

using namespace regalloc;

namespace {

const std::vector<MachineFunction>& corpus() {
  static const MachineDescription md = resolve_machine("x86like");
  static const std::vector<MachineFunction> c = generate_corpus(1, 64, GenParams{}, md);
  return c;
}

const MachineDescription& machine() {
  static const MachineDescription md = resolve_machine("x86like");
  return md;
}

void BM_EvaluateSerial(benchmark::State& state) {
  EvalOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus_serial(corpus(), machine(), opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus().size()));
}

void BM_EvaluateParallel(benchmark::State& state) {
  EvalOptions opts;
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_corpus_parallel(corpus(), machine(), opts, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus().size()));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
