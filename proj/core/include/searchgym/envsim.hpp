#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "searchgym/corpus.hpp"
#include "searchgym/retrieval.hpp"
#include "searchgym/schema.hpp"
#include "searchgym/tasks.hpp"

namespace searchgym {

inline constexpr std::size_t kTrainTurns = 16;
inline constexpr std::size_t kEvalTurns = 64;

/// "train" -> 16, "eval" -> 64; Error("BAD_PROFILE") otherwise.
std::size_t max_turns_for(std::string_view profile);

struct Action {
  enum class Type { Search, Access, Answer };
  Type type = Type::Search;
  std::string text;  // query, url or answer

  static Action search(std::string q) { return {Type::Search, std::move(q)}; }
  static Action access(std::string u) { return {Type::Access, std::move(u)}; }
  static Action answer(std::string a) { return {Type::Answer, std::move(a)}; }

  friend bool operator==(const Action&, const Action&) = default;
};

std::string_view to_string(Action::Type t);
nlohmann::ordered_json action_to_json(const Action& a);
/// Wire form {"type":"search","query"} / {"type":"access","url"} /
/// {"type":"answer","text"}. Throws Error("BAD_REQUEST") for unknown types
/// or missing fields; empty strings are accepted here and rejected by step().
Action action_from_json(const nlohmann::json& j);

struct Observation {
  enum class Kind { Hits, Document, NotFound, Invalid, Final };
  Kind kind = Kind::Hits;
  std::vector<SearchHit> hits;
  std::optional<Document> document;
  std::string message;  // url for NotFound, reason for Invalid
  std::optional<double> reward;

  friend bool operator==(const Observation&, const Observation&) = default;
};

nlohmann::ordered_json observation_to_json(const Observation& o);

enum class EpisodeStatus { Active, Answered, Exhausted };
std::string_view to_string(EpisodeStatus s);

struct EpisodeState {
  std::string episode_id;
  std::string task_id;
  std::size_t turn = 0;
  std::size_t max_turns = kEvalTurns;
  std::vector<std::pair<Action, Observation>> history;
  EpisodeStatus status = EpisodeStatus::Active;
  std::optional<double> terminal_reward;
  std::optional<std::string> prediction;

  std::size_t count(Action::Type t) const;
};

nlohmann::ordered_json episode_to_json(const EpisodeState& s, bool with_history = true);

/// Flat record for offline scoring (see score_trajectories).
nlohmann::ordered_json trajectory_record(const EpisodeState& s, const Task& task);

/// Shared, read-only world plus the task pool. step() may be called from
/// many threads on distinct episodes.
class Environment {
 public:
  Environment(const WorldSchema& schema, const Corpus& corpus, const SearchIndex& index,
              std::vector<Task> tasks);

  const WorldSchema& schema() const noexcept { return schema_; }
  const Corpus& corpus() const noexcept { return corpus_; }
  const SearchIndex& index() const noexcept { return index_; }
  const std::vector<Task>& tasks() const noexcept { return tasks_; }
  /// nullptr for unknown ids.
  const Task* find_task(std::string_view id) const;

  /// Throws Error("BAD_TURNS") for max_turns < 1 and Error("UNKNOWN_TASK")
  /// for tasks outside the pool.
  EpisodeState start_episode(const Task& task, std::size_t max_turns);
  EpisodeState start_episode(std::string_view task_id, std::size_t max_turns);

  /// Throws Error("EPISODE_FINISHED") on a non-active episode.
  Observation step(EpisodeState& state, const Action& action) const;

 private:
  const WorldSchema& schema_;
  const Corpus& corpus_;
  const SearchIndex& index_;
  std::vector<Task> tasks_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::atomic<std::uint64_t> next_episode_{0};
};

/// Re-runs a recorded action list on a fresh episode.
EpisodeState replay(Environment& env, const Task& task, const std::vector<Action>& actions,
                    std::size_t max_turns);

// ---------------------------------------------------------------------------
// Curriculum

struct CurriculumConfig {
  Stage stage = Stage::Stage1;
  std::array<double, 3> weights = {0.5, 0.3, 0.2};  // Simple, Parallel, Combo (Stage2)
  double long_horizon = 0.5;                        // Stage2 share of 6-12 hop tasks

  /// Throws Error("BAD_CURRICULUM") unless weights are non-negative and sum
  /// to 1 and long_horizon lies in [0, 1].
  void validate() const;
};

CurriculumConfig curriculum_from_json(const nlohmann::json& j);

/// Deterministic in (seed, counter). Throws Error("EMPTY_POOL").
const Task& next_task(const CurriculumConfig& config, const std::vector<Task>& tasks, std::uint64_t seed,
                      std::uint64_t counter);

// ---------------------------------------------------------------------------
// Reference agents

struct AgentRun {
  EpisodeState state;
  std::vector<std::string> diagnostics;
};

/// Solves a task by walking its provenance through Search/Access only. Uses
/// each path's anchor and step kinds/attributes, never the stored answer or
/// intermediate nodes.
AgentRun oracle_solve(Environment& env, const Task& task, std::size_t max_turns = kEvalTurns);

/// Random queries and accesses; answers a random snippet token on its last turn.
AgentRun random_agent(Environment& env, const Task& task, std::uint64_t seed,
                      std::size_t max_turns = kEvalTurns);

}  // namespace searchgym
