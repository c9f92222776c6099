#include "abf/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <exception>
#include <map>
#include <optional>
#include <sstream>

#include "abf/error.hpp"
#include "abf/scoring_kernels.hpp"
#include "json.hpp"

namespace abf {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kKindNames = {"OBSERVE", "UPDATE", "QUERY", "TICK"};

constexpr std::array<std::string_view, 8> kDomains = {
    "hotel", "restaurant", "train", "taxi", "attraction", "hospital", "police", "bus"};
constexpr std::array<std::string_view, 8> kSlots = {"name",   "area",  "price", "day",
                                                    "time", "people", "stars", "type"};
constexpr std::array<std::string_view, 20> kSyllables = {
    "ba", "ko", "ri", "te", "mu", "sa", "lo", "ve", "ni", "do",
    "pa", "zu", "fe", "gi", "ha", "jo", "ke", "wu", "xi", "yo"};

// Scale (in steps) of the recency bias in query targeting.
constexpr double kQueryRecencyScale = 25.0;

std::string fact_key_name(std::uint64_t index) {
  std::string key(kDomains[index % kDomains.size()]);
  key += ' ';
  key += kSlots[(index / kDomains.size()) % kSlots.size()];
  const auto round = index / (kDomains.size() * kSlots.size());
  if (round > 0) key += " " + std::to_string(round + 1);
  return key;
}

// Pseudo-word for vocabulary entry i; distinct for every i.
std::string vocab_word(std::uint64_t i) {
  std::string word;
  const auto n = kSyllables.size();
  word += kSyllables[i % n];
  word += kSyllables[(i / n) % n];
  word += kSyllables[(i / (n * n)) % n];
  if (const auto rest = i / (n * n * n); rest > 0) word += std::to_string(rest);
  return word;
}

std::string fact_text(std::string_view key, std::string_view value) {
  return "the " + std::string(key) + " is " + std::string(value);
}

std::string question_text(std::string_view key) { return "which " + std::string(key); }

struct FactState {
  std::string value;
  std::uint64_t version = 0;
  Step last_write = 0;
};

[[noreturn]] void malformed(std::size_t index, Step step, const std::string& why) {
  throw Error("malformed trace at event " + std::to_string(index) + " (step " +
              std::to_string(step) + "): " + why);
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

json config_to_json(const WorkloadConfig& c) {
  return {{"steps", c.steps},
          {"keys", c.keys},
          {"update_rate", c.update_rate},
          {"query_rate", c.query_rate},
          {"distractor_rate", c.distractor_rate},
          {"stages", c.stages},
          {"seed", c.seed},
          {"vocab", c.vocab}};
}

WorkloadConfig config_from_json(const json& j) {
  WorkloadConfig c;
  c.steps = j.at("steps").get<std::uint64_t>();
  c.keys = j.at("keys").get<std::uint64_t>();
  c.update_rate = j.at("update_rate").get<double>();
  c.query_rate = j.at("query_rate").get<double>();
  c.distractor_rate = j.at("distractor_rate").get<double>();
  c.stages = j.at("stages").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.vocab = j.at("vocab").get<std::uint64_t>();
  return c;
}

std::optional<EventKind> parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

void WorkloadConfig::validate() const {
  const auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(update_rate) || !in_unit(query_rate) || !in_unit(distractor_rate)) {
    throw Error("rates must lie in [0, 1]");
  }
  if (update_rate + query_rate + distractor_rate > 1.0) throw Error("rates exceed 1");
  if (stages == 0) throw Error("stages must be >= 1");
  if (keys == 0) throw Error("keys must be >= 1");
  if (vocab < 2) throw Error("vocab must be >= 2");
}

// ---------------------------------------------------------------------------
// Workload generation

Trace generate_workload(const WorkloadConfig& config) {
  config.validate();
  SplitMix64 rng{config.seed};
  Trace trace{config, {}};
  trace.events.reserve(config.steps);

  std::vector<std::optional<FactState>> facts(config.keys);
  std::vector<std::uint64_t> observed;  // key indices in order of introduction
  std::vector<std::uint64_t> updates(config.keys, 0);
  std::uint64_t distractors = 0;

  const auto draw_value = [&] { return vocab_word(rng.below(config.vocab)); };

  const auto observe = [&](Step step) {
    const auto idx = rng.below(config.keys);
    const auto key = fact_key_name(idx);
    auto& fact = facts[idx];
    if (!fact) {
      fact = FactState{draw_value(), 1, step};
      observed.push_back(idx);
    }
    fact->last_write = step;
    return TraceEvent{step, EventKind::Observe, key, fact->value,
                      fact_text(key, fact->value), {}, fact->version};
  };

  for (Step step = 1; step <= config.steps; ++step) {
    const double u = rng.uniform();
    TraceEvent event;
    if (u < config.update_rate) {
      if (observed.empty()) {
        event = observe(step);
      } else {
        const auto idx = observed[rng.below(observed.size())];
        auto& fact = *facts[idx];
        std::string value = draw_value();
        while (value == fact.value) value = draw_value();
        fact.value = std::move(value);
        ++fact.version;
        fact.last_write = step;
        ++updates[idx];
        const auto key = fact_key_name(idx);
        event = TraceEvent{step, EventKind::Update, key, fact.value,
                           fact_text(key, fact.value), {}, fact.version};
      }
    } else if (u < config.update_rate + config.query_rate) {
      if (observed.empty()) {
        event = TraceEvent{step, EventKind::Tick, {}, {}, {}, {}, 0};
      } else {
        // Recently written and often updated keys are asked about more.
        std::vector<double> cumulative;
        cumulative.reserve(observed.size());
        double total = 0.0;
        for (const auto idx : observed) {
          const double age = static_cast<double>(step - facts[idx]->last_write);
          total += (1.0 + static_cast<double>(updates[idx])) / (1.0 + age / kQueryRecencyScale);
          cumulative.push_back(total);
        }
        const double pick = rng.uniform() * total;
        const auto pos = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        const auto idx = observed[std::min(pos, observed.size() - 1)];
        const auto key = fact_key_name(idx);
        event = TraceEvent{step, EventKind::Query, key, {}, question_text(key),
                           facts[idx]->value, 0};
      }
    } else if (u < config.update_rate + config.query_rate + config.distractor_rate) {
      const std::string subject = vocab_word(rng.below(config.vocab)) + " " +
                                  vocab_word(rng.below(config.vocab));
      const std::string value = draw_value();
      event = TraceEvent{step, EventKind::Observe, "distractor-" + std::to_string(distractors++),
                         value, fact_text(subject, value), {}, 1};
    } else {
      event = observe(step);
    }
    trace.events.push_back(std::move(event));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Trace file format

std::string trace_to_jsonl(const Trace& trace) {
  std::string out = json{{"trace_version", kTraceVersion}, {"config", config_to_json(trace.config)}}.dump();
  out += '\n';
  for (const auto& e : trace.events) {
    json j = {{"step", e.step}, {"kind", event_kind_name(e.kind)}};
    if (e.kind != EventKind::Tick) {
      j["key"] = e.key;
      j["text"] = e.text;
    }
    if (e.kind == EventKind::Observe || e.kind == EventKind::Update) {
      j["value"] = e.value;
      j["version"] = e.version;
    }
    if (e.kind == EventKind::Query) j["expected_value"] = e.expected_value;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Trace trace_from_jsonl(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.at("trace_version").get<int>() != kTraceVersion) throw Error("unsupported trace_version");
        trace.config = config_from_json(j.at("config"));
        have_header = true;
        continue;
      }
      TraceEvent e;
      e.step = j.at("step").get<std::uint64_t>();
      const auto kind = parse_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error("unknown kind");
      e.kind = *kind;
      if (e.kind != EventKind::Tick) {
        e.key = j.at("key").get<std::string>();
        e.text = j.at("text").get<std::string>();
      }
      if (e.kind == EventKind::Observe || e.kind == EventKind::Update) {
        e.value = j.at("value").get<std::string>();
        e.version = j.at("version").get<std::uint64_t>();
      }
      if (e.kind == EventKind::Query) e.expected_value = j.at("expected_value").get<std::string>();
      trace.events.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw Error("trace line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (!have_header) throw Error("trace is missing its header line");
  return trace;
}

void validate_trace(const Trace& trace) {
  std::map<std::string, FactState, std::less<>> facts;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    if (i > 0 && e.step <= trace.events[i - 1].step) malformed(i, e.step, "steps not strictly increasing");
    if (e.kind == EventKind::Tick) continue;
    if (e.key.empty()) malformed(i, e.step, "missing key");
    if (e.text.empty()) malformed(i, e.step, "missing text");
    auto it = facts.find(e.key);
    switch (e.kind) {
      case EventKind::Observe:
        if (it == facts.end()) {
          if (e.version != 1) malformed(i, e.step, "first observation must have version 1");
          facts.emplace(e.key, FactState{e.value, 1, e.step});
        } else if (e.version != it->second.version || e.value != it->second.value) {
          malformed(i, e.step, "observation disagrees with current fact");
        }
        break;
      case EventKind::Update:
        if (it == facts.end()) malformed(i, e.step, "update of unobserved key '" + e.key + "'");
        if (e.version != it->second.version + 1) malformed(i, e.step, "update must bump version by one");
        it->second.value = e.value;
        it->second.version = e.version;
        break;
      case EventKind::Query:
        if (it == facts.end()) malformed(i, e.step, "query of unobserved key '" + e.key + "'");
        if (e.expected_value != it->second.value) malformed(i, e.step, "expected_value is not the current value");
        break;
      case EventKind::Tick: break;
    }
  }
}

// ---------------------------------------------------------------------------
// Replay

std::vector<UnitId> retrieve_topk(const MemoryStore& store, const Query& query, std::size_t k,
                                  const ScoreWeights& weights) {
  if (k == 0) throw Error("k must be >= 1");
  const auto units = store.units();
  const auto scores = score_units(units, &query, query.step, weights);
  std::vector<UnitId> ids;
  for (const std::size_t i : rank_top(units, scores, k)) ids.push_back(units[i].id);
  return ids;
}

ReplayOutcome replay_detailed(const Trace& trace, Policy policy, const ScoreWeights& weights,
                              Budget budget, std::size_t k) {
  if (k == 0) throw Error("k must be >= 1");
  validate_trace(trace);
  const std::uint64_t stages = std::max<std::uint64_t>(trace.config.stages, 1);
  const std::size_t n = trace.events.size();
  const std::size_t max_items = budget.max_items();

  ReplayOutcome out{MetricsReport{}, MemoryStore(kDefaultDimension, weights, budget), 0, 0};
  MetricsReport& r = out.report;
  r.policy = std::string(policy.name());
  r.seed = trace.config.seed;
  r.policy_seed = policy.rng.state();
  r.steps = trace.config.steps;
  r.events = n;
  r.budget = max_items;
  r.k = k;
  r.weights = weights;

  MemoryStore& store = out.store;
  std::map<std::string, std::uint64_t, std::less<>> current_version;
  std::vector<std::uint64_t> stage_hits(stages, 0);
  r.queries_by_stage.assign(stages, 0);
  std::uint64_t hits = 0;
  std::uint64_t retrieved = 0;
  std::uint64_t superseded = 0;
  double size_sum = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = trace.events[i];
    const auto stage = static_cast<std::size_t>(static_cast<std::uint64_t>(i) * stages / n);
    switch (e.kind) {
      case EventKind::Observe:
      case EventKind::Update: {
        store.insert(e.text, {{"fact_key", e.key}, {"fact_version", std::to_string(e.version)}},
                     e.step);
        ++out.units_created;
        current_version[e.key] = e.version;
        if (policy.bounded() && store.size() > max_items) {
          const auto keep = select_retained(policy, store.units(), nullptr, e.step, max_items);
          out.units_removed += store.retain_only(keep, e.step).size();
        }
        break;
      }
      case EventKind::Query: {
        store.advance_clock(e.step);
        const Query query = Query::from_text(e.text, e.step, store.dimension());
        const auto ids = retrieve_topk(store, query, k, weights);
        const auto gold = current_version.at(e.key);
        bool hit = false;
        for (const UnitId id : ids) {
          store.record_access(id, e.step);
          const MemoryUnit& unit = *store.find(id);
          const auto& key = unit.metadata.at("fact_key");
          const auto version = parse_u64(unit.metadata.at("fact_version"));
          if (key == e.key && version == gold) hit = true;
          if (version < current_version.at(key)) ++superseded;
        }
        retrieved += ids.size();
        ++r.queries;
        ++r.queries_by_stage[stage];
        if (hit) {
          ++hits;
          ++stage_hits[stage];
        }
        break;
      }
      case EventKind::Tick:
        store.advance_clock(e.step);
        break;
    }
    size_sum += static_cast<double>(store.size());
    r.peak_memory = std::max(r.peak_memory, store.size());
  }

  r.recall_at_k = r.queries == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(r.queries);
  r.fmr = retrieved == 0 ? 0.0 : static_cast<double>(superseded) / static_cast<double>(retrieved);
  r.retention_by_stage.resize(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    r.retention_by_stage[s] = r.queries_by_stage[s] == 0
                                  ? 0.0
                                  : static_cast<double>(stage_hits[s]) /
                                        static_cast<double>(r.queries_by_stage[s]);
  }
  r.context_usage = n == 0 ? 0.0 : size_sum / (static_cast<double>(n) * static_cast<double>(max_items));
  r.final_memory = store.size();
  r.task_loss = 1.0 - r.recall_at_k;
  r.tradeoff = tradeoff_metric(r.task_loss, r.final_memory, max_items, weights.eta());
  return out;
}

MetricsReport replay(const Trace& trace, Policy policy, const ScoreWeights& weights,
                     Budget budget, std::size_t k) {
  return replay_detailed(trace, std::move(policy), weights, budget, k).report;
}

std::vector<MetricsReport> compare(const Trace& trace, std::span<const Policy> policies,
                                   const ScoreWeights& weights, Budget budget, std::size_t k) {
  std::vector<MetricsReport> reports(policies.size());
  std::vector<std::exception_ptr> errors(policies.size());
  const auto n = static_cast<std::ptrdiff_t>(policies.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      reports[i] = replay(trace, policies[i], weights, budget, k);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Report serialization

std::string report_to_json(const MetricsReport& r) {
  const json j = {
      {"policy", r.policy},
      {"seed", r.seed},
      {"policy_seed", r.policy_seed},
      {"steps", r.steps},
      {"events", r.events},
      {"budget", r.budget},
      {"k", r.k},
      {"weights",
       {{"alpha", r.weights.alpha()},
        {"beta", r.weights.beta()},
        {"gamma", r.weights.gamma()},
        {"lambda", r.weights.lambda()},
        {"eta", r.weights.eta()}}},
      {"queries", r.queries},
      {"recall_at_k", r.recall_at_k},
      {"fmr", r.fmr},
      {"retention_by_stage", r.retention_by_stage},
      {"queries_by_stage", r.queries_by_stage},
      {"context_usage", r.context_usage},
      {"peak_memory", r.peak_memory},
      {"final_memory", r.final_memory},
      {"task_loss", r.task_loss},
      {"task_loss_definition", "1 - recall_at_k"},
      {"tradeoff", r.tradeoff},
  };
  return j.dump(2);
}

std::string csv_header() {
  return "policy,seed,steps,B,k,recall_at_k,fmr,context_usage,peak_memory,tradeoff,retention_by_stage";
}

std::string csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << r.policy << ',' << r.seed << ',' << r.steps << ',' << r.budget << ',' << r.k << ','
     << format_double(r.recall_at_k) << ',' << format_double(r.fmr) << ','
     << format_double(r.context_usage) << ',' << r.peak_memory << ','
     << format_double(r.tradeoff) << ',';
  for (std::size_t s = 0; s < r.retention_by_stage.size(); ++s) {
    if (s > 0) os << ';';
    os << format_double(r.retention_by_stage[s]);
  }
  return os.str();
}

}  // namespace abf
