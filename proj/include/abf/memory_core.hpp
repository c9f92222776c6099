#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abf/embedding.hpp"

namespace abf {

using UnitId = std::uint64_t;
using Step = std::uint64_t;
using Metadata = std::map<std::string, std::string>;

// One stored memory element. Metadata is opaque to the core.
struct MemoryUnit {
  UnitId id = 0;
  std::string content;
  std::vector<double> embedding;
  Step inserted_at = 0;
  Step last_accessed_at = 0;
  std::uint64_t access_count = 0;
  Metadata metadata;

  bool operator==(const MemoryUnit&) const = default;
};

// Scoring coefficients. alpha, beta and gamma are normalized to sum to one
// on construction; lambda is the per-step decay rate and eta the
// memory-footprint penalty of the tradeoff metric.
class ScoreWeights {
 public:
  static constexpr double kDefaultLambda = 0.05;
  static constexpr double kDefaultEta = 0.1;

  ScoreWeights() : ScoreWeights(1.0, 1.0, 1.0) {}

  // Throws abf::Error("degenerate weights") when alpha + beta + gamma == 0,
  // or on any negative / non-finite coefficient.
  ScoreWeights(double alpha, double beta, double gamma,
               double lambda = kDefaultLambda, double eta = kDefaultEta);

  // Accepts values that are already normalized and stores them verbatim, so
  // a deserialized store keeps bit-identical weights.
  static ScoreWeights from_normalized(double alpha, double beta, double gamma,
                                      double lambda, double eta);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double lambda() const { return lambda_; }
  double eta() const { return eta_; }

  bool operator==(const ScoreWeights&) const = default;

 private:
  struct Raw {};
  ScoreWeights(Raw, double alpha, double beta, double gamma, double lambda, double eta)
      : alpha_(alpha), beta_(beta), gamma_(gamma), lambda_(lambda), eta_(eta) {}

  double alpha_;
  double beta_;
  double gamma_;
  double lambda_;
  double eta_;
};

// Cardinality budget B.
class Budget {
 public:
  static constexpr std::size_t kDefaultMaxItems = 128;

  explicit Budget(std::size_t max_items = kDefaultMaxItems);

  std::size_t max_items() const { return max_items_; }

  bool operator==(const Budget&) const = default;

 private:
  std::size_t max_items_;
};

struct Query {
  std::string text;
  std::vector<double> embedding;
  Step step = 0;

  static Query from_text(std::string text, Step step,
                         std::size_t dimension = kDefaultDimension);
};

struct ImportanceBreakdown {
  double recency = 0.0;
  double frequency = 0.0;
  double similarity = 0.0;
  double total = 0.0;
};

// exp(-lambda * (t - inserted_at)). Throws "negative age" if t < inserted_at.
double recency(const MemoryUnit& unit, Step t, double lambda);

// n / (n + 1) for n = access_count.
double frequency(const MemoryUnit& unit);

inline double combine_importance(const ScoreWeights& w, double recency, double frequency,
                                 double similarity) {
  return w.alpha() * recency + w.beta() * frequency + w.gamma() * similarity;
}

// Weighted sum of recency, frequency and clamped query similarity. With no
// query the similarity term is zero.
ImportanceBreakdown importance(const MemoryUnit& unit, const Query* query, Step t,
                               const ScoreWeights& weights);

// Strict ordering used everywhere a ranking is needed: higher score, then
// newer inserted_at, then smaller id.
bool ranks_before(double score_a, const MemoryUnit& a, double score_b, const MemoryUnit& b);

/// Exhaustive reference solver for budgeted retention: enumerates every
/// subset of at most `max_items` units and returns the one with the largest
/// total importance. Near-equal totals (within 1e-12 relative) are resolved
/// by preferring the larger subset, then by comparing members in rank order,
/// which makes the answer unique. Throws "oracle size limit" above 20 units.
std::set<UnitId> prune_oracle(std::span<const MemoryUnit> units, const Query* query, Step t,
                              std::size_t max_items, const ScoreWeights& weights);

// task_loss + eta * mem_size / max_items.
double tradeoff_metric(double task_loss, std::size_t mem_size, std::size_t max_items, double eta);

// Bounded memory store with a logical clock.
//
// Units are kept in insertion order; ids are handed out monotonically and
// never reused, so the unit vector is also sorted by id.
class MemoryStore {
 public:
  MemoryStore(std::size_t dimension = kDefaultDimension, ScoreWeights weights = {},
              Budget budget = Budget{});

  // Appends a unit embedded from `content`. May leave the store over budget;
  // pruning is a separate step.
  UnitId insert(std::string content, Metadata metadata, Step step);

  // Returns the new access count.
  std::uint64_t record_access(UnitId id, Step step);

  void advance_clock(Step step);

  // Keeps the top-B units by importance when over budget. Returns removed
  // ids in ascending order (empty when within budget).
  std::vector<UnitId> prune(const Query* query, Step t);

  // Drops every unit whose id is not in `keep`. Returns removed ids ascending.
  std::vector<UnitId> retain_only(const std::set<UnitId>& keep, Step t);

  const MemoryUnit* find(UnitId id) const;

  std::span<const MemoryUnit> units() const { return units_; }
  std::size_t size() const { return units_.size(); }
  Step clock() const { return clock_; }
  const ScoreWeights& weights() const { return weights_; }
  const Budget& budget() const { return budget_; }
  std::size_t dimension() const { return dimension_; }
  UnitId next_id() const { return next_id_; }

  // Versioned JSON document; doubles use shortest round-trip formatting.
  std::string snapshot() const;
  // Throws abf::Error("corrupt snapshot ...") on malformed input.
  static MemoryStore load(std::string_view bytes);

  bool operator==(const MemoryStore&) const = default;

 private:
  void require_step(Step step) const;
  MemoryUnit* find_mutable(UnitId id);

  std::size_t dimension_;
  ScoreWeights weights_;
  Budget budget_;
  Step clock_ = 0;
  UnitId next_id_ = 0;
  std::vector<MemoryUnit> units_;
};

}  // namespace abf
