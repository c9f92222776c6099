#include "abf/policies.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "abf/error.hpp"
#include "abf/scoring_kernels.hpp"

namespace abf {
namespace {

constexpr std::array<std::string_view, 7> kNames = {"abf",  "fifo", "lru",         "lfu",
                                                    "random", "none", "recency_only"};

// Primary key for the classical baselines; larger is kept.
std::uint64_t baseline_key(PolicyKind kind, const MemoryUnit& u) {
  switch (kind) {
    case PolicyKind::Fifo: return u.inserted_at;
    case PolicyKind::Lru: return u.last_accessed_at;
    case PolicyKind::Lfu: return u.access_count;
    default: return 0;
  }
}

std::set<UnitId> all_ids(std::span<const MemoryUnit> units) {
  std::set<UnitId> ids;
  for (const auto& u : units) ids.insert(u.id);
  return ids;
}

}  // namespace

std::string_view policy_name(PolicyKind kind) { return kNames[static_cast<std::size_t>(kind)]; }

std::string_view Policy::name() const { return policy_name(kind); }

std::span<const std::string_view> policy_names() { return kNames; }

Policy parse_policy(std::string_view name, const ScoreWeights& weights, std::uint64_t seed) {
  if (name == "abf") return Policy::abf(weights);
  if (name == "fifo") return Policy::fifo();
  if (name == "lru") return Policy::lru();
  if (name == "lfu") return Policy::lfu();
  if (name == "random") return Policy::random(seed);
  if (name == "none") return Policy::none();
  if (name == "recency_only") return Policy::recency_only(weights);
  std::string valid;
  for (const auto n : kNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw Error("unknown policy '" + std::string(name) + "' (valid: " + valid + ")");
}

std::set<UnitId> select_retained(Policy& policy, std::span<const MemoryUnit> units,
                                 const Query* query, Step t, std::size_t max_items) {
  if (max_items == 0) throw Error("budget must be >= 1");
  if (policy.kind == PolicyKind::None || units.size() <= max_items) return all_ids(units);

  std::set<UnitId> keep;
  switch (policy.kind) {
    case PolicyKind::Abf:
    case PolicyKind::RecencyOnly: {
      const auto scores = score_units(units, query, t, policy.weights);
      for (const std::size_t i : rank_top(units, scores, max_items)) keep.insert(units[i].id);
      break;
    }
    case PolicyKind::Fifo:
    case PolicyKind::Lru:
    case PolicyKind::Lfu: {
      std::vector<std::size_t> order(units.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const auto kind = policy.kind;
      const auto better = [&](std::size_t a, std::size_t b) {
        const auto ka = baseline_key(kind, units[a]);
        const auto kb = baseline_key(kind, units[b]);
        if (ka != kb) return ka > kb;
        return ranks_before(0.0, units[a], 0.0, units[b]);
      };
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(max_items),
                        order.end(), better);
      for (std::size_t i = 0; i < max_items; ++i) keep.insert(units[order[i]].id);
      break;
    }
    case PolicyKind::Random: {
      // Partial Fisher-Yates over positions.
      std::vector<std::size_t> pos(units.size());
      std::iota(pos.begin(), pos.end(), std::size_t{0});
      for (std::size_t i = 0; i < max_items; ++i) {
        const auto j = i + static_cast<std::size_t>(policy.rng.below(pos.size() - i));
        std::swap(pos[i], pos[j]);
        keep.insert(units[pos[i]].id);
      }
      break;
    }
    case PolicyKind::None: break;
  }
  return keep;
}

}  // namespace abf
