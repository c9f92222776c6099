#include "abf/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "abf/error.hpp"
#include "abf/harness.hpp"
#include "json.hpp"

namespace abf::cli {
namespace {

using nlohmann::json;

// Thrown for bad flag values; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Thrown for unreadable/unwritable files and malformed data; exit code 1.
class DataError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw DataError("write failed for '" + path + "'");
}

// Config-file values fill any option the command line left unset. Keys are
// the long flag names without dashes prefix, e.g. "budget", "update-rate".
class Defaults {
 public:
  template <typename T>
  void bind(CLI::Option* opt, T& target) {
    fills_.push_back([opt, &target](const json& config) {
      if (opt->count() > 0) return;
      const auto& names = opt->get_lnames();
      if (names.empty()) return;
      if (auto it = config.find(names.front()); it != config.end()) target = it->get<T>();
    });
  }

  void apply(const json& config) const {
    for (const auto& fill : fills_) fill(config);
  }

 private:
  std::vector<std::function<void(const json&)>> fills_;
};

struct WorkloadFlags {
  WorkloadConfig config;

  void add(CLI::App* app, Defaults& d) {
    d.bind(app->add_option("--steps", config.steps, "Trace length in events"), config.steps);
    d.bind(app->add_option("--keys", config.keys, "Distinct fact keys"), config.keys);
    d.bind(app->add_option("--update-rate", config.update_rate, "P(UPDATE) per step"), config.update_rate);
    d.bind(app->add_option("--query-rate", config.query_rate, "P(QUERY) per step"), config.query_rate);
    d.bind(app->add_option("--distractor-rate", config.distractor_rate, "P(distractor) per step"),
           config.distractor_rate);
    d.bind(app->add_option("--stages", config.stages, "Segments of the retention curve"), config.stages);
    d.bind(app->add_option("--vocab", config.vocab, "Word pool size for values and distractors"),
           config.vocab);
  }
};

struct ScoringFlags {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double lambda = ScoreWeights::kDefaultLambda;
  double eta = ScoreWeights::kDefaultEta;
  std::size_t budget = Budget::kDefaultMaxItems;
  std::size_t k = 5;

  void add(CLI::App* app, Defaults& d) {
    d.bind(app->add_option("--alpha", alpha, "Recency weight"), alpha);
    d.bind(app->add_option("--beta", beta, "Frequency weight"), beta);
    d.bind(app->add_option("--gamma", gamma, "Similarity weight"), gamma);
    d.bind(app->add_option("--lambda", lambda, "Decay rate per step"), lambda);
    d.bind(app->add_option("--eta", eta, "Memory penalty of the tradeoff metric"), eta);
    d.bind(app->add_option("--budget", budget, "Cardinality budget B"), budget);
    d.bind(app->add_option("--k", k, "Retrieval depth"), k);
  }

  ScoreWeights weights() const {
    try {
      return ScoreWeights(alpha, beta, gamma, lambda, eta);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

  Budget max_items() const {
    if (budget == 0) throw UsageError("budget must be >= 1");
    return Budget{budget};
  }

  void check_k() const {
    if (k == 0) throw UsageError("k must be >= 1");
  }
};

json weights_json(const ScoreWeights& w) {
  return {{"alpha", w.alpha()}, {"beta", w.beta()}, {"gamma", w.gamma()},
          {"lambda", w.lambda()}, {"eta", w.eta()}};
}

json workload_json(const WorkloadConfig& c) {
  return {{"steps", c.steps},
          {"keys", c.keys},
          {"update_rate", c.update_rate},
          {"query_rate", c.query_rate},
          {"distractor_rate", c.distractor_rate},
          {"stages", c.stages},
          {"seed", c.seed},
          {"vocab", c.vocab}};
}

void validate_workload(const WorkloadConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Policy make_policy(const std::string& name, const ScoreWeights& w, std::uint64_t seed) {
  try {
    return parse_policy(name, w, seed);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::uint64_t parse_seed(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("bad seed '" + s + "'");
  return v;
}

// "7", "1..20" or "1,4,9".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = parse_seed(text.substr(0, dots));
    const auto hi = parse_seed(text.substr(dots + 2));
    if (hi < lo) throw UsageError("empty seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  } else {
    for (const auto& s : split_list(text)) seeds.push_back(parse_seed(s));
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

Trace load_trace(const std::string& path) {
  try {
    return trace_from_jsonl(read_file(path));
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string summary_line(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << "policy=" << r.policy << " seed=" << r.seed << " B=" << r.budget
     << " k=" << r.k << " queries=" << r.queries << " recall@" << r.k << "=" << r.recall_at_k
     << " fmr=" << r.fmr << " context_usage=" << r.context_usage
     << " peak_memory=" << r.peak_memory << " tradeoff=" << r.tradeoff;
  return os.str();
}

// ---------------------------------------------------------------------------

struct GenCommand {
  WorkloadFlags workload;
  std::string out_path;

  int execute(std::ostream& out) {
    validate_workload(workload.config);
    const Trace trace = generate_workload(workload.config);
    write_file(out_path, trace_to_jsonl(trace));
    std::map<EventKind, std::uint64_t> counts;
    for (const auto& e : trace.events) ++counts[e.kind];
    out << "wrote " << trace.events.size() << " events to " << out_path
        << " (observe=" << counts[EventKind::Observe] << " update=" << counts[EventKind::Update]
        << " query=" << counts[EventKind::Query] << " tick=" << counts[EventKind::Tick] << ")\n";
    return kExitOk;
  }
};

struct RunCommand {
  ScoringFlags scoring;
  std::string trace_path;
  std::string policy = "abf";
  std::optional<std::uint64_t> policy_seed;
  std::string json_path;
  std::string csv_path;

  int execute(std::ostream& out) {
    scoring.check_k();
    const auto weights = scoring.weights();
    const auto budget = scoring.max_items();
    make_policy(policy, weights, 0);
    const Trace trace = load_trace(trace_path);
    const auto seed = policy_seed.value_or(trace.config.seed);
    auto pol = make_policy(policy, weights, seed);
    MetricsReport report;
    try {
      report = replay(trace, pol, weights, budget, scoring.k);
    } catch (const Error& e) {
      throw DataError(trace_path + ": " + e.what());
    }
    json doc = json::parse(report_to_json(report));
    doc["manifest"] = {{"trace", trace_path}, {"workload", workload_json(trace.config)}};
    if (!json_path.empty()) write_file(json_path, doc.dump(2) + "\n");
    if (!csv_path.empty()) write_file(csv_path, csv_header() + "\n" + csv_row(report) + "\n");
    if (json_path.empty() && csv_path.empty()) out << doc.dump(2) << "\n";
    out << summary_line(report) << "\n";
    return kExitOk;
  }
};

struct CompareCommand {
  WorkloadFlags workload;
  ScoringFlags scoring;
  std::string policies;
  std::string seeds = "1";
  std::string trace_path;
  std::string csv_path;

  int execute(std::ostream& out) {
    scoring.check_k();
    const auto weights = scoring.weights();
    const auto budget = scoring.max_items();
    const auto names = split_list(policies);
    if (names.empty()) throw UsageError("--policies is empty");
    for (const auto& n : names) make_policy(n, weights, 0);

    std::vector<Trace> traces;
    if (!trace_path.empty()) {
      traces.push_back(load_trace(trace_path));
    } else {
      validate_workload(workload.config);
      for (const auto seed : parse_seeds(seeds)) {
        auto config = workload.config;
        config.seed = seed;
        traces.push_back(generate_workload(config));
      }
    }

    // Rows in (policy as listed, seed ascending) order regardless of which
    // cell finishes first.
    const std::size_t cells = names.size() * traces.size();
    std::vector<MetricsReport> reports(cells);
    std::vector<std::exception_ptr> errors(cells);
    const auto n = static_cast<std::ptrdiff_t>(cells);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
      const auto p = static_cast<std::size_t>(c) / traces.size();
      const auto s = static_cast<std::size_t>(c) % traces.size();
      try {
        const auto& trace = traces[s];
        reports[c] = replay(trace, parse_policy(names[p], weights, trace.config.seed), weights,
                            budget, scoring.k);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const Error& ex) {
        throw DataError(ex.what());
      }
    }

    std::string csv = csv_header() + "\n";
    for (const auto& r : reports) csv += csv_row(r) + "\n";
    if (!csv_path.empty()) {
      write_file(csv_path, csv);
    } else {
      out << csv;
    }

    out << std::left << std::setw(14) << "policy" << std::setw(8) << "seeds" << std::setw(12)
        << "recall@k" << std::setw(12) << "fmr" << std::setw(12) << "ctx_usage" << std::setw(12)
        << "peak_mem" << std::setw(12) << "tradeoff" << "\n";
    out << std::fixed << std::setprecision(4);
    for (std::size_t p = 0; p < names.size(); ++p) {
      double recall = 0, fmr = 0, usage = 0, peak = 0, tradeoff = 0;
      for (std::size_t s = 0; s < traces.size(); ++s) {
        const auto& r = reports[p * traces.size() + s];
        recall += r.recall_at_k;
        fmr += r.fmr;
        usage += r.context_usage;
        peak += static_cast<double>(r.peak_memory);
        tradeoff += r.tradeoff;
      }
      const auto m = static_cast<double>(traces.size());
      out << std::setw(14) << names[p] << std::setw(8) << traces.size() << std::setw(12)
          << recall / m << std::setw(12) << fmr / m << std::setw(12) << usage / m << std::setw(12)
          << peak / m << std::setw(12) << tradeoff / m << "\n";
    }
    out.unsetf(std::ios::floatfield);
    return kExitOk;
  }
};

struct ScoreCommand {
  ScoringFlags scoring;
  std::string content;
  std::optional<std::string> query;
  Step age = 0;
  std::uint64_t count = 0;

  int execute(std::ostream& out) {
    const auto weights = scoring.weights();
    MemoryUnit unit;
    unit.content = content;
    unit.embedding = embed(content);
    unit.access_count = count;
    std::optional<Query> q;
    if (query) q = Query::from_text(*query, age);
    const auto b = importance(unit, q ? &*q : nullptr, age, weights);
    const json doc = {{"content", content},
                      {"query", query ? json(*query) : json(nullptr)},
                      {"age", age},
                      {"access_count", count},
                      {"weights", weights_json(weights)},
                      {"recency", b.recency},
                      {"frequency", b.frequency},
                      {"similarity", b.similarity},
                      {"total", b.total}};
    out << doc.dump(2) << "\n";
    return kExitOk;
  }
};

struct SnapshotDumpCommand {
  ScoringFlags scoring;
  std::string trace_path;
  std::string policy = "abf";
  std::optional<std::uint64_t> policy_seed;
  std::string out_path;

  int execute(std::ostream& out) {
    scoring.check_k();
    const auto weights = scoring.weights();
    const auto budget = scoring.max_items();
    make_policy(policy, weights, 0);
    const Trace trace = load_trace(trace_path);
    auto pol = make_policy(policy, weights, policy_seed.value_or(trace.config.seed));
    std::optional<ReplayOutcome> outcome;
    try {
      outcome.emplace(replay_detailed(trace, pol, weights, budget, scoring.k));
    } catch (const Error& e) {
      throw DataError(trace_path + ": " + e.what());
    }
    write_file(out_path, outcome->store.snapshot() + "\n");
    out << "wrote snapshot of " << outcome->store.size() << " units (clock "
        << outcome->store.clock() << ") to " << out_path << "\n";
    return kExitOk;
  }
};

struct SnapshotLoadCommand {
  std::string in_path;
  std::string out_path;

  int execute(std::ostream& out) {
    std::optional<MemoryStore> store;
    try {
      store.emplace(MemoryStore::load(read_file(in_path)));
    } catch (const DataError&) {
      throw;
    } catch (const Error& e) {
      throw DataError(in_path + ": " + e.what());
    }
    if (!out_path.empty()) write_file(out_path, store->snapshot() + "\n");
    out << "units=" << store->size() << " clock=" << store->clock()
        << " dimension=" << store->dimension() << " next_id=" << store->next_id()
        << " budget=" << store->budget().max_items() << "\n";
    return kExitOk;
  }
};

std::optional<json> load_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) {
    if (const char* env = std::getenv("ABF_DEFAULT_CONFIG"); env != nullptr) path = env;
  }
  if (path.empty()) return std::nullopt;
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("config '" + path + "': " + e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Budgeted agent-memory engine: trace generation, replay and policy comparison", "abf"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file of flag defaults (also via ABF_DEFAULT_CONFIG); flags always win");

  Defaults defaults;

  GenCommand gen;
  auto* gen_app = app.add_subcommand("gen", "Generate a synthetic JSONL trace");
  gen.workload.add(gen_app, defaults);
  defaults.bind(gen_app->add_option("--seed", gen.workload.config.seed, "Workload seed"),
                gen.workload.config.seed);
  gen_app->add_option("--out", gen.out_path, "Output trace path")->required();

  RunCommand run_cmd;
  auto* run_app = app.add_subcommand("run", "Replay a trace under one policy");
  run_cmd.scoring.add(run_app, defaults);
  run_app->add_option("--trace", run_cmd.trace_path, "Input trace")->required();
  defaults.bind(run_app->add_option("--policy", run_cmd.policy, "abf|fifo|lru|lfu|random|none|recency_only"),
                run_cmd.policy);
  run_app->add_option("--seed", run_cmd.policy_seed, "RANDOM policy seed (default: trace seed)");
  run_app->add_option("--json", run_cmd.json_path, "Write the report as JSON");
  run_app->add_option("--csv", run_cmd.csv_path, "Write the report as a CSV row");

  CompareCommand cmp;
  auto* cmp_app = app.add_subcommand("compare", "Replay several policies over several seeds");
  cmp.workload.add(cmp_app, defaults);
  cmp.scoring.add(cmp_app, defaults);
  defaults.bind(cmp_app->add_option("--policies", cmp.policies, "Comma-separated policy names"),
                cmp.policies);
  defaults.bind(cmp_app->add_option("--seeds", cmp.seeds, "Seed list or range, e.g. 1..20"), cmp.seeds);
  cmp_app->add_option("--trace", cmp.trace_path, "Use this trace instead of generating per seed");
  cmp_app->add_option("--csv", cmp.csv_path, "Write rows here instead of stdout");

  ScoreCommand score;
  auto* score_app = app.add_subcommand("score", "Print the importance breakdown of one unit");
  score.scoring.add(score_app, defaults);
  score_app->add_option("--content", score.content, "Unit text")->required();
  score_app->add_option("--query", score.query, "Query text");
  score_app->add_option("--age", score.age, "Steps since insertion");
  score_app->add_option("--count", score.count, "Access count");

  auto* snap_app = app.add_subcommand("snapshot", "Dump or load a store snapshot");
  snap_app->require_subcommand(1);
  SnapshotDumpCommand dump;
  auto* dump_app = snap_app->add_subcommand("dump", "Replay a trace and write the final store");
  dump.scoring.add(dump_app, defaults);
  dump_app->add_option("--trace", dump.trace_path, "Input trace")->required();
  defaults.bind(dump_app->add_option("--policy", dump.policy, "Retention policy"), dump.policy);
  dump_app->add_option("--seed", dump.policy_seed, "RANDOM policy seed");
  dump_app->add_option("--out", dump.out_path, "Snapshot path")->required();
  SnapshotLoadCommand load;
  auto* load_app = snap_app->add_subcommand("load", "Validate a snapshot and print a summary");
  load_app->add_option("--in", load.in_path, "Snapshot path")->required();
  load_app->add_option("--out", load.out_path, "Re-serialize to this path");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (const auto config = load_config(config_path)) {
      if (!config->is_object()) throw DataError("config file must hold a JSON object");
      try {
        defaults.apply(*config);
      } catch (const json::exception& e) {
        throw UsageError(std::string("config value has the wrong type: ") + e.what());
      }
    }
    if (gen_app->parsed()) return gen.execute(out);
    if (run_app->parsed()) return run_cmd.execute(out);
    if (cmp_app->parsed()) return cmp.execute(out);
    if (score_app->parsed()) return score.execute(out);
    if (dump_app->parsed()) return dump.execute(out);
    if (load_app->parsed()) return load.execute(out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace abf::cli
