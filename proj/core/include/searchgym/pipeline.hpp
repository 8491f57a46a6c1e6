#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/envsim.hpp"
#include "searchgym/graph.hpp"
#include "searchgym/tasks.hpp"

namespace searchgym {

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::optional<std::filesystem::path> schema_path;  // bundled schema when unset
  std::size_t nodes = 300;                            // scaled_counts(nodes) unless counts is set
  TypeCounts counts;
  int templates = kTemplateCount;
  std::optional<std::string> generator_url;
  unsigned threads = 1;
  MixConfig mix;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string profile = "eval";
  std::filesystem::path root = "artifacts";

  std::filesystem::path world() const { return root / "world.jsonl"; }
  std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
  std::filesystem::path index() const { return root / "index.bin"; }
  std::filesystem::path probes() const { return root / "probes.jsonl"; }
  std::filesystem::path verified() const { return root / "verified.jsonl"; }
  std::filesystem::path tasks() const { return root / "tasks.jsonl"; }
  std::filesystem::path bench() const { return root / "bench.jsonl"; }
  std::filesystem::path report() const { return root / "report.json"; }
};

/// Reads a JSON config. Unknown keys are rejected with Error("BAD_CONFIG").
/// SEARCHGYM_HOME, when set, replaces `root`.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path);
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const PipelineConfig& c);

WorldSchema load_schema(const PipelineConfig& c);
TypeCounts effective_counts(const PipelineConfig& c);

/// Share of renderable facts whose clause appears verbatim in the owning document.
double fact_coverage(const WorldSchema& schema, const KnowledgeGraph& graph, const Corpus& corpus);

/// Stage results: {"stage", "status":"ok"|"failed", "code"?, "message"?, ...}.
/// Stages read upstream artifacts from disk and throw
/// Error("MISSING_ARTIFACT") naming the file when one is absent.
nlohmann::ordered_json stage_gen_world(const PipelineConfig& c);
nlohmann::ordered_json stage_build_corpus(const PipelineConfig& c);
nlohmann::ordered_json stage_build_index(const PipelineConfig& c);
nlohmann::ordered_json stage_verify_edges(const PipelineConfig& c);
nlohmann::ordered_json stage_gen_tasks(const PipelineConfig& c);
nlohmann::ordered_json stage_stats(const PipelineConfig& c);

/// Runs one stage by name, turning exceptions into a failure record.
nlohmann::ordered_json run_stage(const std::string& name, const PipelineConfig& c);

/// Every stage in dependency order; stops at the first failure. The report
/// is {"stages":[...], "failures":n, "summary":{...}} and is also written to
/// report.json.
nlohmann::ordered_json run_pipeline(const PipelineConfig& c);

/// Hop-bucket table of a task set: kind -> {"1-3","4-6","7+"} counts.
nlohmann::ordered_json bucket_table(const std::vector<Task>& tasks);

struct EvalOptions {
  std::string agent = "oracle";  // oracle | random | remote
  std::optional<std::filesystem::path> dataset;  // bench file when unset
  std::optional<std::string> remote_url;
  std::size_t limit = 0;  // 0: all tasks
  std::filesystem::path out = "eval";
};

/// Runs an agent over a task file (bench, or tasks when bench is empty). Writes trajectories.jsonl and
/// metrics.json under `out`; returns the metrics.
nlohmann::ordered_json run_eval(const PipelineConfig& c, const EvalOptions& options);

/// Agent behind an HTTP endpoint: POST {url}/act with
/// {"question","turn","max_turns","observation"} -> action JSON.
/// Throws Error("REMOTE_UNREACHABLE").
AgentRun remote_agent(Environment& env, const Task& task, const std::string& url, std::size_t max_turns);

}  // namespace searchgym
