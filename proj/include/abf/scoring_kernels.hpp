#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "abf/memory_core.hpp"

namespace abf {

// Importance totals for every unit, parallelized over units with OpenMP.
// Each element is computed by the same scalar routine as importance(), so
// results are bit-identical to score_units_serial for any thread count.
std::vector<double> score_units(std::span<const MemoryUnit> units, const Query* query, Step t,
                                const ScoreWeights& weights);

// Single-threaded reference for score_units.
std::vector<double> score_units_serial(std::span<const MemoryUnit> units, const Query* query,
                                       Step t, const ScoreWeights& weights);

// Indices of the min(k, n) best units under ranks_before, best first.
std::vector<std::size_t> rank_top(std::span<const MemoryUnit> units,
                                  std::span<const double> scores, std::size_t k);

// Sequence size above which score_units actually forks threads.
inline constexpr std::size_t kParallelScoreThreshold = 512;

}  // namespace abf
