#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abf/memory_core.hpp"
#include "abf/rng.hpp"

namespace abf {

enum class PolicyKind { Abf, Fifo, Lru, Lfu, Random, None, RecencyOnly };

// A retention policy plus its parameters. RANDOM owns its generator state,
// so a Policy value is advanced by every select_retained call.
struct Policy {
  PolicyKind kind = PolicyKind::Abf;
  ScoreWeights weights;
  SplitMix64 rng;

  static Policy abf(const ScoreWeights& weights) { return {PolicyKind::Abf, weights, {}}; }
  static Policy fifo() { return {PolicyKind::Fifo, {}, {}}; }
  static Policy lru() { return {PolicyKind::Lru, {}, {}}; }
  static Policy lfu() { return {PolicyKind::Lfu, {}, {}}; }
  static Policy none() { return {PolicyKind::None, {}, {}}; }
  static Policy random(std::uint64_t seed) { return {PolicyKind::Random, {}, SplitMix64{seed}}; }
  // ABF with beta = gamma = 0; keeps the decay rate and eta of `base`.
  static Policy recency_only(const ScoreWeights& base = {}) {
    return {PolicyKind::RecencyOnly, ScoreWeights{1.0, 0.0, 0.0, base.lambda(), base.eta()}, {}};
  }

  std::string_view name() const;
  bool bounded() const { return kind != PolicyKind::None; }
};

std::string_view policy_name(PolicyKind kind);

// Names accepted by parse_policy, in canonical order.
std::span<const std::string_view> policy_names();

// Builds a policy from its CLI name (abf, fifo, lru, lfu, random, none,
// recency_only). Throws abf::Error listing valid names for anything else.
Policy parse_policy(std::string_view name, const ScoreWeights& weights, std::uint64_t seed);

/// Chooses which units survive a budget of `max_items`.
///
/// Bounded policies return exactly min(|units|, max_items) ids; NONE returns
/// all of them. Baselines rank by their primary key (inserted_at for FIFO,
/// last_accessed_at for LRU, access_count for LFU) and fall back to newer
/// inserted_at, then smaller id. ABF and RECENCY_ONLY rank by importance
/// under the policy's own weights.
std::set<UnitId> select_retained(Policy& policy, std::span<const MemoryUnit> units,
                                 const Query* query, Step t, std::size_t max_items);

}  // namespace abf
