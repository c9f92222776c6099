#include "abf/scoring_kernels.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "abf/error.hpp"

namespace abf {
namespace {

// Checks done up front so the parallel loop body cannot throw.
void check_inputs(std::span<const MemoryUnit> units, const Query* query, Step t) {
  for (const auto& u : units) {
    if (t < u.inserted_at) throw Error("negative age");
    if (query != nullptr && query->embedding.size() != u.embedding.size()) {
      throw Error("embedding dimension mismatch");
    }
  }
}

// Query-side work hoisted out of the per-unit loop. The dot product visits
// only the query's nonzero coordinates in ascending order; since dot() skips
// zero terms this reproduces cosine() exactly.
struct PreparedQuery {
  std::vector<std::size_t> nonzero;
  double norm = 0.0;

  explicit PreparedQuery(const Query& q) : norm(l2_norm(q.embedding)) {
    for (std::size_t i = 0; i < q.embedding.size(); ++i) {
      if (q.embedding[i] != 0.0) nonzero.push_back(i);
    }
  }

  double similarity(std::span<const double> unit, std::span<const double> query) const {
    const double unit_norm = l2_norm(unit);
    if (unit_norm == 0.0 || norm == 0.0) return 0.0;
    double d = 0.0;
    for (const std::size_t i : nonzero) {
      if (unit[i] != 0.0) d += unit[i] * query[i];
    }
    return std::max(0.0, std::clamp(d / (unit_norm * norm), -1.0, 1.0));
  }
};

double score_one(const MemoryUnit& u, const Query* query, const PreparedQuery* prepared, Step t,
                 const ScoreWeights& weights) {
  const double r = recency(u, t, weights.lambda());
  const double f = frequency(u);
  const double s = prepared != nullptr ? prepared->similarity(u.embedding, query->embedding) : 0.0;
  return combine_importance(weights, r, f, s);
}

}  // namespace

std::vector<double> score_units(std::span<const MemoryUnit> units, const Query* query, Step t,
                                const ScoreWeights& weights) {
  check_inputs(units, query, t);
  std::optional<PreparedQuery> prepared;
  if (query != nullptr) prepared.emplace(*query);
  const PreparedQuery* pq = prepared ? &*prepared : nullptr;
  std::vector<double> scores(units.size());
  const auto n = static_cast<std::ptrdiff_t>(units.size());
#pragma omp parallel for schedule(static) if (units.size() > kParallelScoreThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    scores[i] = score_one(units[i], query, pq, t, weights);
  }
  return scores;
}

std::vector<double> score_units_serial(std::span<const MemoryUnit> units, const Query* query,
                                       Step t, const ScoreWeights& weights) {
  std::vector<double> scores;
  scores.reserve(units.size());
  for (const auto& u : units) scores.push_back(importance(u, query, t, weights).total);
  return scores;
}

std::vector<std::size_t> rank_top(std::span<const MemoryUnit> units,
                                  std::span<const double> scores, std::size_t k) {
  if (scores.size() != units.size()) throw Error("score count does not match unit count");
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    return ranks_before(scores[a], units[a], scores[b], units[b]);
  };
  const std::size_t m = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    better);
  order.resize(m);
  return order;
}

}  // namespace abf
