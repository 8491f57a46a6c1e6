#include "searchgym/pipeline.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "searchgym/retrieval.hpp"
#include "searchgym/rlmath.hpp"
#include "searchgym/text.hpp"
#include "searchgym/verification.hpp"

namespace searchgym {

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw Error("BAD_CONFIG", "unknown key '" + k + "' in " + where);
  }
}

nlohmann::ordered_json ok(const std::string& stage) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["status"] = "ok";
  return j;
}

void require(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw Error("MISSING_ARTIFACT", "missing artifact " + p.string());
}

KnowledgeGraph load_graph(const std::filesystem::path& p) {
  require(p);
  return graph_from_jsonl(read_file(p));
}

Corpus load_corpus(const std::filesystem::path& p) {
  require(p);
  return corpus_from_jsonl(read_file(p));
}

SearchIndex load_index(const std::filesystem::path& p) {
  require(p);
  return SearchIndex::deserialize(read_file(p));
}

std::vector<Task> load_tasks(const std::filesystem::path& p) {
  require(p);
  return tasks_from_jsonl(read_file(p));
}

constexpr std::array<std::string_view, 6> kStages = {"gen-world",   "build-corpus", "build-index",
                                                     "verify-edges", "gen-tasks",    "stats"};

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    reject_unknown(j, {"seed", "schema", "nodes", "counts", "templates", "generator_url", "threads", "mix", "serve", "root"},
                   "config");
    read_key(j, "seed", c.seed);
    if (j.contains("schema")) c.schema_path = j["schema"].get<std::string>();
    read_key(j, "nodes", c.nodes);
    if (j.contains("counts")) c.counts = j["counts"].get<TypeCounts>();
    read_key(j, "templates", c.templates);
    if (j.contains("generator_url")) c.generator_url = j["generator_url"].get<std::string>();
    read_key(j, "threads", c.threads);
    if (j.contains("mix")) {
      const auto& m = j["mix"];
      reject_unknown(m, {"total", "cells", "bench", "combo_min_hops", "max_hops"}, "mix");
      read_key(m, "total", c.mix.total);
      read_key(m, "cells", c.mix.cells);
      read_key(m, "bench", c.mix.bench);
      read_key(m, "combo_min_hops", c.mix.combo_min_hops);
      read_key(m, "max_hops", c.mix.max_hops);
    }
    if (j.contains("serve")) {
      const auto& s = j["serve"];
      reject_unknown(s, {"host", "port", "profile"}, "serve");
      read_key(s, "host", c.host);
      read_key(s, "port", c.port);
      read_key(s, "profile", c.profile);
    }
    if (j.contains("root")) c.root = j["root"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_CONFIG", e.what());
  }
  max_turns_for(c.profile);
  if (c.templates < 1 || c.templates > kTemplateCount)
    throw Error("BAD_CONFIG", "templates must lie in 1.." + std::to_string(kTemplateCount));
  return c;
}

nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  if (c.schema_path) j["schema"] = c.schema_path->string();
  j["nodes"] = c.nodes;
  if (!c.counts.empty()) j["counts"] = c.counts;
  j["templates"] = c.templates;
  if (c.generator_url) j["generator_url"] = *c.generator_url;
  j["threads"] = c.threads;
  j["mix"] = {{"total", c.mix.total},
              {"cells", c.mix.cells},
              {"bench", c.mix.bench},
              {"combo_min_hops", c.mix.combo_min_hops},
              {"max_hops", c.mix.max_hops}};
  j["serve"] = {{"host", c.host}, {"port", c.port}, {"profile", c.profile}};
  j["root"] = c.root.string();
  return j;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path) {
  PipelineConfig c;
  if (path) {
    const auto text = read_file(*path);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("BAD_CONFIG", path->string() + " is not a JSON object");
    c = config_from_json(j);
  }
  if (const char* home = std::getenv("SEARCHGYM_HOME"); home != nullptr && *home != '\0') c.root = home;
  return c;
}

WorldSchema load_schema(const PipelineConfig& c) {
  if (!c.schema_path) return bundled_schema();
  require(*c.schema_path);
  return parse_schema(read_file(*c.schema_path));
}

TypeCounts effective_counts(const PipelineConfig& c) { return c.counts.empty() ? scaled_counts(c.nodes) : c.counts; }

double fact_coverage(const WorldSchema& schema, const KnowledgeGraph& graph, const Corpus& corpus) {
  RenderContext ctx{schema, graph, nullptr};
  std::size_t total = 0;
  std::size_t covered = 0;
  for (const auto& n : graph.nodes()) {
    const auto* doc = corpus.find_entity(n.id);
    for (const auto& f : renderable_facts(schema, graph, n.id)) {
      ++total;
      if (doc != nullptr && doc->body.find(fact_clause(ctx, f)) != std::string::npos) ++covered;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
}

nlohmann::ordered_json stage_gen_world(const PipelineConfig& c) {
  auto r = ok("gen-world");
  const auto schema = load_schema(c);
  const auto graph = synthesize_graph(schema, effective_counts(c), c.seed);
  const auto violations = check_graph(schema, graph);
  std::filesystem::create_directories(c.root);
  write_file_atomic(c.world(), graph_to_jsonl(graph));
  r["nodes"] = graph.size();
  r["edges"] = graph.edges().size();
  r["violations"] = violations.size();
  if (!violations.empty()) {
    r["status"] = "failed";
    r["code"] = "GRAPH_INVALID";
    r["message"] = violations.front().code + " " + violations.front().path + ": " + violations.front().message;
  }
  return r;
}

nlohmann::ordered_json stage_build_corpus(const PipelineConfig& c) {
  auto r = ok("build-corpus");
  const auto schema = load_schema(c);
  const auto graph = load_graph(c.world());
  std::optional<GeneratorHook> hook;
  if (c.generator_url) hook = http_generator_hook(*c.generator_url);
  const auto corpus = build_corpus(schema, graph, c.templates, derive_seed(c.seed, "corpus"), hook ? &*hook : nullptr);
  write_file_atomic(c.corpus(), corpus_to_jsonl(corpus));
  std::size_t words = 0;
  std::size_t longest = 0;
  for (const auto& d : corpus.documents()) {
    const auto w = word_count(plain_text(d.body));
    words += w;
    longest = std::max(longest, w);
  }
  r["documents"] = corpus.size();
  r["mean_words"] = corpus.empty() ? 0.0 : static_cast<double>(words) / static_cast<double>(corpus.size());
  r["max_words"] = longest;
  r["fact_coverage"] = fact_coverage(schema, graph, corpus);
  return r;
}

nlohmann::ordered_json stage_build_index(const PipelineConfig& c) {
  auto r = ok("build-index");
  const auto corpus = load_corpus(c.corpus());
  const auto index = build_index(corpus);
  write_file_atomic(c.index(), index.serialize());
  r["documents"] = index.document_count();
  r["terms"] = index.vocabulary().size();
  r["checksum"] = to_hex(index.checksum());
  return r;
}

nlohmann::ordered_json stage_verify_edges(const PipelineConfig& c) {
  auto r = ok("verify-edges");
  const auto schema = load_schema(c);
  const auto graph = load_graph(c.world());
  const auto corpus = load_corpus(c.corpus());
  const auto index = load_index(c.index());
  const auto result = filter_graph(schema, graph, index, corpus, c.threads);
  write_file_atomic(c.probes(), probe_report_jsonl(result.report));
  write_file_atomic(c.verified(), graph_to_jsonl(result.verified));
  r["retained"] = result.retained;
  r["dropped"] = result.dropped;
  r["retention"] = result.retention();
  return r;
}

nlohmann::ordered_json bucket_table(const std::vector<Task>& tasks) {
  nlohmann::ordered_json j;
  for (auto kind : {TaskKind::Simple, TaskKind::Parallel, TaskKind::Combo}) {
    nlohmann::ordered_json row = {{"1-3", 0}, {"4-6", 0}, {"7+", 0}};
    for (const auto& t : tasks) {
      if (t.kind == kind) row[hop_bucket(t.hops)] = row[hop_bucket(t.hops)].get<std::size_t>() + 1;
    }
    j[std::string(to_string(kind))] = std::move(row);
  }
  return j;
}

nlohmann::ordered_json stage_gen_tasks(const PipelineConfig& c) {
  auto r = ok("gen-tasks");
  const auto schema = load_schema(c);
  const auto full = load_graph(c.world());
  const auto verified = load_graph(c.verified());
  const auto ds = build_dataset(schema, verified, full, c.mix, derive_seed(c.seed, "tasks"));
  write_file_atomic(c.tasks(), tasks_to_jsonl(ds.train));
  write_file_atomic(c.bench(), tasks_to_jsonl(ds.bench));
  r["train"] = ds.train.size();
  r["bench"] = ds.bench.size();
  r["requested"] = ds.requested;
  r["realized"] = ds.realized;
  r["shortfall"] = ds.shortfall;
  std::vector<Task> all = ds.train;
  all.insert(all.end(), ds.bench.begin(), ds.bench.end());
  r["buckets"] = bucket_table(all);
  return r;
}

nlohmann::ordered_json stage_stats(const PipelineConfig& c) {
  auto r = ok("stats");
  const auto graph = load_graph(c.world());
  const auto verified = load_graph(c.verified());
  const auto corpus = load_corpus(c.corpus());
  auto tasks = load_tasks(c.tasks());
  const auto bench = load_tasks(c.bench());
  r["nodes"] = graph.size();
  r["edges"] = graph.edges().size();
  r["verified_edges"] = verified.edges().size();
  r["retention"] = graph.edges().empty() ? 1.0
                                         : static_cast<double>(verified.edges().size()) /
                                               static_cast<double>(graph.edges().size());
  r["documents"] = corpus.size();
  r["train"] = tasks.size();
  r["bench"] = bench.size();
  tasks.insert(tasks.end(), bench.begin(), bench.end());
  r["buckets"] = bucket_table(tasks);
  std::map<std::string, double> share;
  for (const auto& t : tasks) share[std::string(to_string(t.kind))] += 1.0;
  for (auto& [k, v] : share) v /= static_cast<double>(tasks.size());
  r["kind_share"] = share;
  return r;
}

nlohmann::ordered_json run_stage(const std::string& name, const PipelineConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::ordered_json r;
  try {
    if (name == "gen-world") r = stage_gen_world(c);
    else if (name == "build-corpus") r = stage_build_corpus(c);
    else if (name == "build-index") r = stage_build_index(c);
    else if (name == "verify-edges") r = stage_verify_edges(c);
    else if (name == "gen-tasks") r = stage_gen_tasks(c);
    else if (name == "stats") r = stage_stats(c);
    else throw Error("UNKNOWN_STAGE", "no stage named " + name);
  } catch (const Error& e) {
    r = {{"stage", name}, {"status", "failed"}, {"code", e.code()}, {"message", e.what()}};
  } catch (const std::exception& e) {
    r = {{"stage", name}, {"status", "failed"}, {"code", "INTERNAL"}, {"message", e.what()}};
  }
  r["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r["status"] == "failed") spdlog::error("stage {} failed: {} {}", name, r["code"].get<std::string>(),
                                             r["message"].get<std::string>());
  else spdlog::info("stage {} done in {:.2f}s", name, r["seconds"].get<double>());
  return r;
}

nlohmann::ordered_json run_pipeline(const PipelineConfig& c) {
  nlohmann::ordered_json report;
  report["config"] = config_to_json(c);
  auto stages = nlohmann::ordered_json::array();
  std::size_t failures = 0;
  for (auto name : kStages) {
    auto r = run_stage(std::string(name), c);
    const bool failed = r["status"] == "failed";
    stages.push_back(std::move(r));
    if (failed) {
      ++failures;
      break;
    }
  }
  report["stages"] = stages;
  report["failures"] = failures;
  if (failures == 0) report["summary"] = stages.back();
  std::filesystem::create_directories(c.root);
  write_file_atomic(c.report(), report.dump(2) + "\n");
  return report;
}

AgentRun remote_agent(Environment& env, const Task& task, const std::string& url, std::size_t max_turns) {
  // Split "http://host:port/prefix" into the client origin and a path prefix.
  std::string origin = url;
  std::string prefix;
  if (auto scheme = url.find("://"); scheme != std::string::npos) {
    if (auto slash = url.find('/', scheme + 3); slash != std::string::npos) {
      origin = url.substr(0, slash);
      prefix = url.substr(slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);

  AgentRun run{env.start_episode(task, max_turns), {}};
  auto& s = run.state;
  nlohmann::ordered_json observation = nullptr;
  while (s.status == EpisodeStatus::Active) {
    nlohmann::ordered_json req;
    req["task_id"] = task.id;
    req["question"] = task.question;
    req["turn"] = s.turn;
    req["max_turns"] = s.max_turns;
    req["observation"] = observation;
    auto res = client.Post(prefix + "/act", req.dump(), "application/json");
    if (!res) throw Error("REMOTE_UNREACHABLE", "agent endpoint " + url + " did not answer");
    Action action;
    try {
      action = action_from_json(nlohmann::json::parse(res->body));
    } catch (const std::exception& e) {
      run.diagnostics.push_back(std::string("unusable agent reply: ") + e.what());
      action = Action::search("");
    }
    observation = observation_to_json(env.step(s, action));
  }
  return run;
}

nlohmann::ordered_json run_eval(const PipelineConfig& c, const EvalOptions& o) {
  const auto schema = load_schema(c);
  const auto corpus = load_corpus(c.corpus());
  const auto index = load_index(c.index());
  // Without a held-out split the training tasks are the only thing to evaluate.
  auto tasks = load_tasks(o.dataset.value_or(c.bench()));
  if (!o.dataset && tasks.empty()) tasks = load_tasks(c.tasks());
  if (o.limit > 0 && tasks.size() > o.limit) tasks.resize(o.limit);
  if (o.agent == "remote" && !o.remote_url) throw Error("BAD_CONFIG", "remote agent needs a url");
  if (o.agent != "oracle" && o.agent != "random" && o.agent != "remote")
    throw Error("BAD_CONFIG", "unknown agent " + o.agent);

  const auto max_turns = max_turns_for(c.profile);
  Environment env(schema, corpus, index, tasks);
  std::string log;
  std::size_t diagnostics = 0;
  for (const auto& t : env.tasks()) {
    AgentRun run = o.agent == "oracle"   ? oracle_solve(env, t, max_turns)
                   : o.agent == "random" ? random_agent(env, t, c.seed, max_turns)
                                         : remote_agent(env, t, *o.remote_url, max_turns);
    diagnostics += run.diagnostics.size();
    log += trajectory_record(run.state, t).dump();
    log += '\n';
  }
  auto metrics = score_trajectories(log);
  nlohmann::ordered_json out;
  out["agent"] = o.agent;
  out["profile"] = c.profile;
  out["max_turns"] = max_turns;
  out["diagnostics"] = diagnostics;
  for (auto& [k, v] : metrics.items()) out[k] = v;
  std::filesystem::create_directories(o.out);
  write_file_atomic(o.out / "trajectories.jsonl", log);
  write_file_atomic(o.out / "metrics.json", out.dump(2) + "\n");
  return out;
}

}  // namespace searchgym
