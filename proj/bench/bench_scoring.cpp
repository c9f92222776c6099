// Parallel vs serial importance scoring over stores of growing size.

#include <benchmark/benchmark.h>

#include "abf/scoring_kernels.hpp"
#include "abf/rng.hpp"

namespace {

std::vector<abf::MemoryUnit> make_units(std::size_t n) {
  static const char* kWords[] = {"hotel", "area", "north", "price", "cheap", "train",
                                 "day",   "taxi", "time",  "the",   "is",    "which"};
  abf::SplitMix64 rng{n};
  std::vector<abf::MemoryUnit> units(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int w = 0; w < 5; ++w) text += std::string(kWords[rng.below(std::size(kWords))]) + " ";
    units[i].id = i;
    units[i].embedding = abf::embed(text);
    units[i].inserted_at = i;
    units[i].access_count = rng.below(10);
  }
  return units;
}

template <auto Kernel>
void score(benchmark::State& state) {
  const auto units = make_units(static_cast<std::size_t>(state.range(0)));
  const auto query = abf::Query::from_text("which hotel area", units.size());
  const abf::ScoreWeights weights;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(units, &query, units.size(), weights));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(score<abf::score_units_serial>)->Name("score_units_serial")->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK(score<abf::score_units>)->Name("score_units")->RangeMultiplier(8)->Range(64, 1 << 18);

BENCHMARK_MAIN();
