#include <algorithm>
#include <map>
#include <numeric>

#include "abf/error.hpp"
#include "abf/harness.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace abf;

namespace {

TraceEvent observe(Step s, std::string key, std::string value, std::uint64_t version = 1) {
  return {s, EventKind::Observe, key, value, "the " + key + " is " + value, "", version};
}

TraceEvent update(Step s, std::string key, std::string value, std::uint64_t version) {
  return {s, EventKind::Update, key, value, "the " + key + " is " + value, "", version};
}

TraceEvent question(Step s, std::string key, std::string expected) {
  return {s, EventKind::Query, key, "", "which " + key, expected, 0};
}

Trace small_trace(std::vector<TraceEvent> events) {
  Trace t;
  t.config.steps = events.empty() ? 0 : events.back().step;
  t.config.stages = 2;
  t.events = std::move(events);
  return t;
}

WorkloadConfig small_config(std::uint64_t seed) {
  WorkloadConfig c;
  c.steps = 800;
  c.keys = 15;
  c.seed = seed;
  return c;
}

std::size_t count_kind(const Trace& t, EventKind kind) {
  return static_cast<std::size_t>(
      std::count_if(t.events.begin(), t.events.end(), [&](const TraceEvent& e) { return e.kind == kind; }));
}

}  // namespace

TEST_CASE("workload config validation") {
  WorkloadConfig c;
  CHECK_NOTHROW(c.validate());
  c.update_rate = 0.6;
  c.query_rate = 0.6;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("rates exceed 1"), Error);
  c = {};
  c.query_rate = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.stages = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("empty workload") {
  WorkloadConfig c;
  c.steps = 0;
  const auto t = generate_workload(c);
  CHECK(t.events.empty());
  CHECK(trace_to_jsonl(t).find('\n') == trace_to_jsonl(t).size() - 1);

  const auto r = replay(t, Policy::abf({}), {}, Budget{8}, 5);
  CHECK(r.queries == 0);
  CHECK(r.recall_at_k == 0.0);
  CHECK(r.fmr == 0.0);
  CHECK(r.peak_memory == 0);
  CHECK(r.context_usage == 0.0);
}

TEST_CASE("workload is deterministic and well formed") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = generate_workload(small_config(seed));
    const auto b = generate_workload(small_config(seed));
    CHECK(trace_to_jsonl(a) == trace_to_jsonl(b));
    CHECK_NOTHROW(validate_trace(a));
    CHECK(a.events.size() == 800);
    for (std::size_t i = 0; i < a.events.size(); ++i) CHECK(a.events[i].step == i + 1);
    CHECK(count_kind(a, EventKind::Update) > 0);
    CHECK(count_kind(a, EventKind::Query) > 0);
  }
  CHECK(trace_to_jsonl(generate_workload(small_config(1))) !=
        trace_to_jsonl(generate_workload(small_config(2))));
}

TEST_CASE("JSONL round trip") {
  const auto t = generate_workload(small_config(3));
  const auto text = trace_to_jsonl(t);
  const auto back = trace_from_jsonl(text);
  CHECK(back == t);
  CHECK(trace_to_jsonl(back) == text);

  CHECK_THROWS_WITH_AS(trace_from_jsonl(text.substr(text.find('\n') + 1)), doctest::Contains("trace line 1"),
                       Error);
  auto broken = text;
  broken.insert(text.find('\n') + 1, "{not json}\n");
  CHECK_THROWS_WITH_AS(trace_from_jsonl(broken), doctest::Contains("line 2"), Error);
}

TEST_CASE("malformed traces are rejected with their position") {
  auto t = small_trace({observe(1, "hotel area", "north"), update(2, "taxi time", "ten", 2)});
  CHECK_THROWS_WITH_AS(validate_trace(t), doctest::Contains("malformed trace at event 1 (step 2)"), Error);
  CHECK_THROWS_AS(replay(t, Policy::fifo(), {}, Budget{4}, 1), Error);

  t = small_trace({observe(2, "hotel area", "north"), observe(2, "taxi time", "ten")});
  CHECK_THROWS_WITH_AS(validate_trace(t), doctest::Contains("event 1"), Error);

  t = small_trace({observe(1, "hotel area", "north"), question(2, "hotel area", "south")});
  CHECK_THROWS_AS(validate_trace(t), Error);

  t = small_trace({observe(1, "hotel area", "north"), update(2, "hotel area", "south", 3)});
  CHECK_THROWS_AS(validate_trace(t), Error);
}

TEST_CASE("single observation is recalled") {
  const auto t = small_trace({observe(1, "hotel area", "north"), question(2, "hotel area", "north")});
  const auto r = replay(t, Policy::abf({}), {}, Budget{4}, 1);
  CHECK(r.queries == 1);
  CHECK(r.recall_at_k == 1.0);
  CHECK(r.fmr == 0.0);
  CHECK(r.task_loss == 0.0);
}

TEST_CASE("superseded versions count as false memories") {
  const auto t = small_trace({observe(1, "hotel area", "north"), update(2, "hotel area", "south", 2),
                              question(3, "hotel area", "south")});
  const auto r = replay(t, Policy::none(), {}, Budget{4}, 2);
  CHECK(r.recall_at_k == 1.0);
  CHECK(r.fmr == 0.5);
  CHECK(r.peak_memory == 2);
}

TEST_CASE("replay rejects k = 0") {
  CHECK_THROWS_AS(replay(small_trace({}), Policy::fifo(), {}, Budget{4}, 0), Error);
}

TEST_CASE("retrieve_topk") {
  MemoryStore s;
  const auto north = s.insert("the hotel area is north", {}, 1);
  const auto taxi = s.insert("the taxi time is ten", {}, 2);
  const auto q = Query::from_text("which hotel area", 3);
  CHECK(retrieve_topk(s, q, 1, s.weights()) == std::vector<UnitId>{north});
  CHECK(retrieve_topk(s, q, 5, s.weights()) == std::vector<UnitId>{north, taxi});
  CHECK_THROWS_AS(retrieve_topk(s, q, 0, s.weights()), Error);
  MemoryStore empty;
  CHECK(retrieve_topk(empty, q, 3, empty.weights()).empty());
}

TEST_CASE("update-free workloads have no false memories") {
  auto c = small_config(4);
  c.update_rate = 0.0;
  const auto t = generate_workload(c);
  CHECK(count_kind(t, EventKind::Update) == 0);
  for (auto policy : {Policy::abf({}), Policy::fifo(), Policy::lru(), Policy::lfu(), Policy::random(4),
                      Policy::none()}) {
    CHECK(replay(t, policy, {}, Budget{16}, 5).fmr == 0.0);
  }
}

TEST_CASE("replay invariants") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto t = generate_workload(small_config(seed));
    for (auto policy : {Policy::abf({}), Policy::fifo(), Policy::lru(), Policy::lfu(),
                        Policy::random(seed), Policy::none(), Policy::recency_only()}) {
      const auto out = replay_detailed(t, policy, {}, Budget{20}, 5);
      const auto& r = out.report;
      CAPTURE(r.policy);
      CHECK(out.units_created == count_kind(t, EventKind::Observe) + count_kind(t, EventKind::Update));
      CHECK(out.units_created == out.store.size() + out.units_removed);
      if (policy.bounded()) {
        CHECK(r.peak_memory <= 20);
        CHECK(r.context_usage <= 1.0);
      } else {
        CHECK(r.peak_memory == out.units_created);
      }
      CHECK(r.final_memory == out.store.size());
      CHECK(r.recall_at_k >= 0.0);
      CHECK(r.recall_at_k <= 1.0);
      CHECK(r.fmr >= 0.0);
      CHECK(r.fmr <= 1.0);

      // Per-stage recall reassembles the overall figure.
      double weighted = 0.0;
      std::uint64_t total = 0;
      for (std::size_t s = 0; s < r.retention_by_stage.size(); ++s) {
        weighted += r.retention_by_stage[s] * static_cast<double>(r.queries_by_stage[s]);
        total += r.queries_by_stage[s];
      }
      CHECK(total == r.queries);
      CHECK(std::abs(weighted / static_cast<double>(total) - r.recall_at_k) <= 1e-12);
      CHECK(r.tradeoff == doctest::Approx(r.task_loss + 0.1 * r.final_memory / 20.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("ample budget and k recall everything without distractors") {
  auto c = small_config(6);
  c.steps = 300;
  c.distractor_rate = 0.0;
  const auto t = generate_workload(c);
  const auto r = replay(t, Policy::abf({}), {}, Budget{400}, 400);
  CHECK(r.queries > 0);
  CHECK(r.recall_at_k == 1.0);
}

TEST_CASE("compare") {
  const auto t = generate_workload(small_config(7));
  CHECK(compare(t, {}, {}, Budget{16}, 5).empty());

  const std::vector<Policy> policies = {Policy::lfu(), Policy::abf({}), Policy::none(), Policy::fifo()};
  const auto reports = compare(t, policies, {}, Budget{16}, 5);
  REQUIRE(reports.size() == 4);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    CHECK(reports[i] == replay(t, policies[i], {}, Budget{16}, 5));
  }
  CHECK(reports[2].context_usage > 1.0);

  // ABF with recency alone ranks exactly like FIFO.
  const std::vector<Policy> pair = {Policy::abf(ScoreWeights(1, 0, 0)), Policy::fifo()};
  const auto two = compare(t, pair, {}, Budget{16}, 5);
  CHECK(two[0].recall_at_k == two[1].recall_at_k);
  CHECK(two[0].fmr == two[1].fmr);
  CHECK(two[0].retention_by_stage == two[1].retention_by_stage);
}

TEST_CASE("report serialization") {
  const auto t = small_trace({observe(1, "hotel area", "north"), question(2, "hotel area", "north")});
  const auto r = replay(t, Policy::fifo(), {}, Budget{4}, 1);
  CHECK(csv_header() == "policy,seed,steps,B,k,recall_at_k,fmr,context_usage,peak_memory,tradeoff,"
                        "retention_by_stage");
  CHECK(csv_row(r) == "fifo,1,2,4,1,1,0,0.25,1,0.025,0;1");
  const auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j.at("policy") == "fifo");
  CHECK(j.at("recall_at_k") == 1.0);
  CHECK(j.at("retention_by_stage") == nlohmann::json::array({0.0, 1.0}));
}
