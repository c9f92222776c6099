#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abf/memory_core.hpp"
#include "abf/policies.hpp"

namespace abf {

enum class EventKind { Observe, Update, Query, Tick };

std::string_view event_kind_name(EventKind kind);

// One workload step. Fields that do not apply to a kind stay empty / zero:
// TICK carries only the step, QUERY has no value or version.
struct TraceEvent {
  Step step = 0;
  EventKind kind = EventKind::Tick;
  std::string key;
  std::string value;
  std::string text;
  std::string expected_value;
  std::uint64_t version = 0;

  bool operator==(const TraceEvent&) const = default;
};

struct WorkloadConfig {
  std::uint64_t steps = 5000;
  std::uint64_t keys = 40;
  double update_rate = 0.15;
  double query_rate = 0.2;
  double distractor_rate = 0.3;
  std::uint64_t stages = 6;
  std::uint64_t seed = 1;
  std::uint64_t vocab = 512;

  // Throws abf::Error on out-of-range rates, rates summing above one,
  // zero stages, zero keys or zero vocab.
  void validate() const;

  bool operator==(const WorkloadConfig&) const = default;
};

struct Trace {
  WorkloadConfig config;
  std::vector<TraceEvent> events;

  bool operator==(const Trace&) const = default;
};

inline constexpr int kTraceVersion = 1;

/// Deterministic synthetic dialogue workload.
///
/// Each step draws UPDATE, QUERY or DISTRACTOR by the configured rates; the
/// residual probability is an OBSERVE of a uniformly chosen fact key, which
/// introduces the key on first sight and restates its current value after.
/// Query targets are weighted toward recently written and often-updated
/// keys. Distractors are OBSERVE events on throwaway keys that are never
/// queried. Steps run 1..steps.
Trace generate_workload(const WorkloadConfig& config);

// JSONL: a header line {"trace_version":1,"config":{...}} then one event per line.
std::string trace_to_jsonl(const Trace& trace);
// Throws abf::Error naming the offending line.
Trace trace_from_jsonl(std::string_view text);

// Checks every event invariant. Throws "malformed trace at event i (step s): ...".
void validate_trace(const Trace& trace);

struct MetricsReport {
  std::string policy;
  std::uint64_t seed = 0;         // workload seed of the trace
  std::uint64_t policy_seed = 0;  // RANDOM generator seed (echo only)
  std::uint64_t steps = 0;
  std::uint64_t events = 0;
  std::size_t budget = 0;
  std::size_t k = 0;
  ScoreWeights weights;

  std::uint64_t queries = 0;
  double recall_at_k = 0.0;
  double fmr = 0.0;
  std::vector<double> retention_by_stage;
  std::vector<std::uint64_t> queries_by_stage;
  double context_usage = 0.0;
  std::size_t peak_memory = 0;
  std::size_t final_memory = 0;
  double task_loss = 0.0;  // 1 - recall_at_k
  double tradeoff = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

std::string report_to_json(const MetricsReport& report);
std::string csv_header();
// policy,seed,steps,B,k,recall_at_k,fmr,context_usage,peak_memory,tradeoff,retention_by_stage
std::string csv_row(const MetricsReport& report);

// Top-k unit ids by importance under `weights`, best first.
std::vector<UnitId> retrieve_topk(const MemoryStore& store, const Query& query, std::size_t k,
                                  const ScoreWeights& weights);

struct ReplayOutcome {
  MetricsReport report;
  MemoryStore store;
  std::uint64_t units_created = 0;
  std::uint64_t units_removed = 0;
};

/// Replays a trace against a store governed by `policy`.
///
/// OBSERVE / UPDATE insert a unit tagged with fact_key / fact_version and
/// prune through the policy once the store exceeds the budget. QUERY
/// retrieves the top-k by importance under `weights` (for every policy),
/// reinforces each retrieved unit and scores recall and false memories.
/// TICK only advances the clock.
ReplayOutcome replay_detailed(const Trace& trace, Policy policy, const ScoreWeights& weights,
                              Budget budget, std::size_t k);

MetricsReport replay(const Trace& trace, Policy policy, const ScoreWeights& weights,
                     Budget budget, std::size_t k);

// One replay per policy on the same trace, reports in input order. Runs the
// policies concurrently.
std::vector<MetricsReport> compare(const Trace& trace, std::span<const Policy> policies,
                                   const ScoreWeights& weights, Budget budget, std::size_t k);

}  // namespace abf
