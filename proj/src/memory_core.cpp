#include "abf/memory_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "abf/error.hpp"
#include "abf/scoring_kernels.hpp"
#include "json.hpp"

namespace abf {
namespace {

using nlohmann::json;

bool valid_coefficient(double x) { return std::isfinite(x) && x >= 0.0; }

void check_coefficients(double alpha, double beta, double gamma, double lambda, double eta) {
  if (!valid_coefficient(alpha) || !valid_coefficient(beta) || !valid_coefficient(gamma) ||
      !valid_coefficient(lambda) || !valid_coefficient(eta)) {
    throw Error("weights must be finite and non-negative");
  }
}

}  // namespace

ScoreWeights::ScoreWeights(double alpha, double beta, double gamma, double lambda, double eta)
    : lambda_(lambda), eta_(eta) {
  check_coefficients(alpha, beta, gamma, lambda, eta);
  const double sum = alpha + beta + gamma;
  if (sum == 0.0) throw Error("degenerate weights: alpha + beta + gamma must be > 0");
  alpha_ = alpha / sum;
  beta_ = beta / sum;
  gamma_ = gamma / sum;
}

ScoreWeights ScoreWeights::from_normalized(double alpha, double beta, double gamma, double lambda,
                                           double eta) {
  check_coefficients(alpha, beta, gamma, lambda, eta);
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-12) {
    throw Error("weights are not normalized");
  }
  return ScoreWeights(Raw{}, alpha, beta, gamma, lambda, eta);
}

Budget::Budget(std::size_t max_items) : max_items_(max_items) {
  if (max_items_ == 0) throw Error("budget must be >= 1");
}

Query Query::from_text(std::string text, Step step, std::size_t dimension) {
  auto embedding = embed(text, EmbedderConfig{dimension});
  return Query{std::move(text), std::move(embedding), step};
}

double recency(const MemoryUnit& unit, Step t, double lambda) {
  if (t < unit.inserted_at) throw Error("negative age");
  const auto age = static_cast<double>(t - unit.inserted_at);
  return std::exp(-lambda * age);
}

double frequency(const MemoryUnit& unit) {
  const auto n = static_cast<double>(unit.access_count);
  return n / (n + 1.0);
}

ImportanceBreakdown importance(const MemoryUnit& unit, const Query* query, Step t,
                               const ScoreWeights& weights) {
  ImportanceBreakdown b;
  b.recency = recency(unit, t, weights.lambda());
  b.frequency = frequency(unit);
  if (query != nullptr) {
    if (query->embedding.size() != unit.embedding.size()) {
      throw Error("embedding dimension mismatch");
    }
    b.similarity = std::max(0.0, cosine(unit.embedding, query->embedding));
  }
  b.total = combine_importance(weights, b.recency, b.frequency, b.similarity);
  return b;
}

bool ranks_before(double score_a, const MemoryUnit& a, double score_b, const MemoryUnit& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.inserted_at != b.inserted_at) return a.inserted_at > b.inserted_at;
  return a.id < b.id;
}

std::set<UnitId> prune_oracle(std::span<const MemoryUnit> units, const Query* query, Step t,
                              std::size_t max_items, const ScoreWeights& weights) {
  constexpr std::size_t kMaxUnits = 20;
  if (units.size() > kMaxUnits) throw Error("oracle size limit: at most 20 units");
  if (max_items == 0) throw Error("budget must be >= 1");
  const std::size_t n = units.size();

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = importance(units[i], query, t, weights).total;

  // Rank positions, only used to resolve equal-valued subsets.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(scores[a], units[a], scores[b], units[b]);
  });
  std::vector<std::uint32_t> rank_bit(n);
  for (std::size_t pos = 0; pos < n; ++pos) rank_bit[order[pos]] = 1u << (n - 1 - pos);

  const std::uint32_t full = n == 0 ? 0u : static_cast<std::uint32_t>((1ull << n) - 1);
  std::uint32_t best_mask = 0;
  std::uint32_t best_rank_mask = 0;
  double best_sum = 0.0;
  for (std::uint32_t mask = 1; mask != 0 && mask <= full; ++mask) {
    const auto count = static_cast<std::size_t>(std::popcount(mask));
    if (count > max_items) continue;
    double sum = 0.0;
    std::uint32_t rank_mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sum += scores[i];
        rank_mask |= rank_bit[i];
      }
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(best_sum));
    bool better = false;
    if (sum > best_sum + tol) {
      better = true;
    } else if (std::abs(sum - best_sum) <= tol) {
      const auto best_count = static_cast<std::size_t>(std::popcount(best_mask));
      // Same cardinality: a larger rank mask holds better-ranked members first.
      better = count > best_count || (count == best_count && rank_mask > best_rank_mask);
    }
    if (better) {
      best_sum = sum;
      best_mask = mask;
      best_rank_mask = rank_mask;
    }
  }

  std::set<UnitId> retained;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask & (1u << i)) retained.insert(units[i].id);
  }
  return retained;
}

double tradeoff_metric(double task_loss, std::size_t mem_size, std::size_t max_items,
                       double eta) {
  if (max_items == 0) throw Error("budget must be >= 1");
  return task_loss + eta * static_cast<double>(mem_size) / static_cast<double>(max_items);
}

MemoryStore::MemoryStore(std::size_t dimension, ScoreWeights weights, Budget budget)
    : dimension_(dimension), weights_(weights), budget_(budget) {
  if (dimension_ == 0) throw Error("dimension must be >= 1");
}

void MemoryStore::require_step(Step step) const {
  if (step < clock_) {
    throw Error("clock regression: step " + std::to_string(step) + " < clock " +
                std::to_string(clock_));
  }
}

UnitId MemoryStore::insert(std::string content, Metadata metadata, Step step) {
  require_step(step);
  MemoryUnit unit;
  unit.id = next_id_;
  unit.embedding = embed(content, EmbedderConfig{dimension_});
  unit.content = std::move(content);
  unit.inserted_at = step;
  unit.last_accessed_at = step;
  unit.metadata = std::move(metadata);
  units_.push_back(std::move(unit));
  clock_ = step;
  return next_id_++;
}

MemoryUnit* MemoryStore::find_mutable(UnitId id) {
  auto it = std::lower_bound(units_.begin(), units_.end(), id,
                             [](const MemoryUnit& u, UnitId v) { return u.id < v; });
  return it != units_.end() && it->id == id ? &*it : nullptr;
}

const MemoryUnit* MemoryStore::find(UnitId id) const {
  return const_cast<MemoryStore*>(this)->find_mutable(id);
}

std::uint64_t MemoryStore::record_access(UnitId id, Step step) {
  MemoryUnit* unit = find_mutable(id);
  if (unit == nullptr) throw Error("no such unit: " + std::to_string(id));
  require_step(step);
  ++unit->access_count;
  unit->last_accessed_at = step;
  clock_ = step;
  return unit->access_count;
}

void MemoryStore::advance_clock(Step step) {
  require_step(step);
  clock_ = step;
}

std::vector<UnitId> MemoryStore::prune(const Query* query, Step t) {
  require_step(t);
  if (units_.size() <= budget_.max_items()) {
    clock_ = t;
    return {};
  }
  const auto scores = score_units(units_, query, t, weights_);
  std::set<UnitId> keep;
  for (const std::size_t i : rank_top(units_, scores, budget_.max_items())) {
    keep.insert(units_[i].id);
  }
  return retain_only(keep, t);
}

std::vector<UnitId> MemoryStore::retain_only(const std::set<UnitId>& keep, Step t) {
  require_step(t);
  clock_ = t;
  std::vector<UnitId> removed;
  std::erase_if(units_, [&](const MemoryUnit& u) {
    if (keep.contains(u.id)) return false;
    removed.push_back(u.id);
    return true;
  });
  return removed;
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

constexpr int kSnapshotVersion = 1;

[[noreturn]] void corrupt(const std::string& detail) {
  throw Error("corrupt snapshot: " + detail);
}

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) corrupt(where + " is not an object");
  auto it = obj.find(name);
  if (it == obj.end()) corrupt(where + "." + name + " missing");
  return *it;
}

std::uint64_t as_u64(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) corrupt(where + " is not a non-negative integer");
  return v.get<std::uint64_t>();
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) corrupt(where + " is not a number");
  return v.get<double>();
}

}  // namespace

std::string MemoryStore::snapshot() const {
  json units = json::array();
  for (const auto& u : units_) {
    units.push_back({
        {"id", u.id},
        {"content", u.content},
        {"embedding", u.embedding},
        {"inserted_at", u.inserted_at},
        {"last_accessed_at", u.last_accessed_at},
        {"access_count", u.access_count},
        {"metadata", u.metadata},
    });
  }
  json doc = {
      {"version", kSnapshotVersion},
      {"dimension", dimension_},
      {"clock", clock_},
      {"next_id", next_id_},
      {"weights",
       {{"alpha", weights_.alpha()},
        {"beta", weights_.beta()},
        {"gamma", weights_.gamma()},
        {"lambda", weights_.lambda()},
        {"eta", weights_.eta()}}},
      {"budget", {{"max_items", budget_.max_items()}}},
      {"units", std::move(units)},
  };
  return doc.dump();
}

MemoryStore MemoryStore::load(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    corrupt("parse error at offset " + std::to_string(e.byte) + ": " + e.what());
  }
  if (as_u64(field(doc, "version", "$"), "$.version") != kSnapshotVersion) {
    corrupt("unsupported version");
  }
  const auto dimension = as_u64(field(doc, "dimension", "$"), "$.dimension");
  const auto clock = as_u64(field(doc, "clock", "$"), "$.clock");
  const auto next_id = as_u64(field(doc, "next_id", "$"), "$.next_id");
  const json& w = field(doc, "weights", "$");
  const json& b = field(doc, "budget", "$");

  MemoryStore store = [&] {
    try {
      auto weights = ScoreWeights::from_normalized(
          as_double(field(w, "alpha", "$.weights"), "$.weights.alpha"),
          as_double(field(w, "beta", "$.weights"), "$.weights.beta"),
          as_double(field(w, "gamma", "$.weights"), "$.weights.gamma"),
          as_double(field(w, "lambda", "$.weights"), "$.weights.lambda"),
          as_double(field(w, "eta", "$.weights"), "$.weights.eta"));
      Budget budget{as_u64(field(b, "max_items", "$.budget"), "$.budget.max_items")};
      return MemoryStore(dimension, weights, budget);
    } catch (const Error& e) {
      if (std::string_view(e.what()).starts_with("corrupt snapshot")) throw;
      corrupt(e.what());
    }
  }();
  store.clock_ = clock;
  store.next_id_ = next_id;

  const json& units = field(doc, "units", "$");
  if (!units.is_array()) corrupt("$.units is not an array");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string where = "$.units[" + std::to_string(i) + "]";
    const json& ju = units[i];
    MemoryUnit u;
    u.id = as_u64(field(ju, "id", where), where + ".id");
    const json& content = field(ju, "content", where);
    if (!content.is_string()) corrupt(where + ".content is not a string");
    u.content = content.get<std::string>();
    const json& emb = field(ju, "embedding", where);
    if (!emb.is_array() || emb.size() != dimension) corrupt(where + ".embedding has wrong dimension");
    u.embedding.reserve(dimension);
    for (const auto& x : emb) u.embedding.push_back(as_double(x, where + ".embedding"));
    u.inserted_at = as_u64(field(ju, "inserted_at", where), where + ".inserted_at");
    u.last_accessed_at = as_u64(field(ju, "last_accessed_at", where), where + ".last_accessed_at");
    u.access_count = as_u64(field(ju, "access_count", where), where + ".access_count");
    const json& meta = field(ju, "metadata", where);
    if (!meta.is_object()) corrupt(where + ".metadata is not an object");
    for (const auto& [k, v] : meta.items()) {
      if (!v.is_string()) corrupt(where + ".metadata values must be strings");
      u.metadata.emplace(k, v.get<std::string>());
    }
    if (!(u.inserted_at <= u.last_accessed_at && u.last_accessed_at <= clock)) {
      corrupt(where + " timestamps out of order");
    }
    if (u.id >= next_id) corrupt(where + ".id not below next_id");
    if (!store.units_.empty() && store.units_.back().id >= u.id) {
      corrupt(where + ".id not strictly increasing");
    }
    store.units_.push_back(std::move(u));
  }
  return store;
}

}  // namespace abf
