#pragma once

// Random instance generators shared by the property tests.

#include <cmath>
#include <string>
#include <vector>

#include "abf/memory_core.hpp"
#include "abf/rng.hpp"
#include "json.hpp"

namespace abf::testing {

inline std::string random_text(SplitMix64& rng, std::size_t max_tokens = 6) {
  static const char* kWords[] = {"hotel", "name", "area", "train", "day",  "price", "cheap",
                                 "north", "south", "taxi", "time", "seagull", "memory", "42"};
  std::string text;
  const auto n = rng.below(max_tokens + 1);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!text.empty()) text += ' ';
    text += kWords[rng.below(std::size(kWords))];
  }
  return text;
}

// Units with ids 0..n-1, inserted at or before `now`. Small step and count
// ranges make exact ties common so the tie-break chain is exercised.
inline std::vector<MemoryUnit> random_units(SplitMix64& rng, std::size_t n, Step now,
                                            std::size_t dimension = 16) {
  std::vector<MemoryUnit> units;
  for (std::size_t i = 0; i < n; ++i) {
    MemoryUnit u;
    u.id = i;
    u.content = random_text(rng);
    u.embedding = embed(u.content, EmbedderConfig{dimension});
    u.inserted_at = rng.below(now + 1);
    u.last_accessed_at = u.inserted_at + rng.below(now - u.inserted_at + 1);
    u.access_count = rng.below(4);
    units.push_back(std::move(u));
  }
  return units;
}

inline ScoreWeights random_weights(SplitMix64& rng) {
  for (;;) {
    const double a = rng.below(3) == 0 ? 0.0 : rng.uniform();
    const double b = rng.below(3) == 0 ? 0.0 : rng.uniform();
    const double g = rng.below(3) == 0 ? 0.0 : rng.uniform();
    if (a + b + g > 0.0) return ScoreWeights(a, b, g, 0.2 * rng.uniform(), rng.uniform());
  }
}

// Builds a store holding exactly `units` by going through the snapshot loader.
inline MemoryStore store_with(const std::vector<MemoryUnit>& units, std::size_t dimension,
                              const ScoreWeights& w, std::size_t budget, Step clock) {
  nlohmann::json ju = nlohmann::json::array();
  UnitId next = 0;
  for (const auto& u : units) {
    ju.push_back({{"id", u.id},
                  {"content", u.content},
                  {"embedding", u.embedding},
                  {"inserted_at", u.inserted_at},
                  {"last_accessed_at", u.last_accessed_at},
                  {"access_count", u.access_count},
                  {"metadata", u.metadata}});
    next = std::max(next, u.id + 1);
  }
  const nlohmann::json doc = {
      {"version", 1},
      {"dimension", dimension},
      {"clock", clock},
      {"next_id", next},
      {"weights",
       {{"alpha", w.alpha()}, {"beta", w.beta()}, {"gamma", w.gamma()}, {"lambda", w.lambda()},
        {"eta", w.eta()}}},
      {"budget", {{"max_items", budget}}},
      {"units", ju}};
  return MemoryStore::load(doc.dump());
}

// Unit with a two-dimensional embedding whose cosine with (1, 0) is `c`.
inline MemoryUnit unit_with_similarity(UnitId id, double c, Step inserted_at = 0) {
  MemoryUnit u;
  u.id = id;
  u.content = "u" + std::to_string(id);
  u.embedding = {c, std::sqrt(1.0 - c * c)};
  u.inserted_at = inserted_at;
  u.last_accessed_at = inserted_at;
  return u;
}

inline Query unit_axis_query(Step step) { return Query{"axis", {1.0, 0.0}, step}; }

}  // namespace abf::testing
