#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "searchgym/graph.hpp"
#include "searchgym/schema.hpp"

namespace searchgym {

enum class StepKind { Forward, Reverse, ScalarStart, ScalarEnd };
enum class TaskKind { Simple, Parallel, Combo };
enum class Stage { Stage1, Stage2 };
enum class Composition { Simple, Sum, AbsDiff, Compare, Combo };

std::string_view to_string(StepKind k);
std::string_view to_string(TaskKind k);
std::string_view to_string(Stage s);
std::string_view to_string(Composition c);
TaskKind task_kind_from_string(std::string_view s);
Stage stage_from_string(std::string_view s);

/// One traversal. For Forward/Reverse `edge` is the stored edge walked
/// (source -> target as stored); for scalar steps `attribute` names the
/// literal and `subject_type` the type holding it.
struct PathStep {
  StepKind kind = StepKind::Forward;
  std::string attribute;     // relation or scalar attribute name
  std::string subject_type;  // type whose schema declares `attribute`
  std::optional<RelationEdge> edge;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// A walk v0 .. vk over entity nodes, optionally opened by a literal value
/// (ScalarStart) and/or closed by reading a literal (ScalarEnd).
struct ReasoningPath {
  std::string anchor;              // display name of nodes[0], or the start value
  std::vector<std::string> nodes;  // entity ids, never repeated
  std::vector<PathStep> steps;
  std::optional<std::string> start_value;  // ScalarStart value text
  std::optional<std::string> end_value;    // ScalarEnd value text

  std::size_t hops() const noexcept { return steps.size(); }
  bool scalar_start() const { return !steps.empty() && steps.front().kind == StepKind::ScalarStart; }
  bool scalar_end() const { return !steps.empty() && steps.back().kind == StepKind::ScalarEnd; }
  std::vector<RelationEdge> edges() const;
  /// Identity used for de-duplication.
  std::string signature() const;

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
};

struct Task {
  std::string id;
  TaskKind kind = TaskKind::Simple;
  std::string question;
  std::string answer;
  std::string answer_type;  // entity type name, or "number:<unit>" / "name:<label>"
  std::size_t hops = 0;
  Stage stage = Stage::Stage1;
  Composition mode = Composition::Simple;
  std::vector<ReasoningPath> paths;
  std::optional<std::string> compare_attribute;  // Sum/AbsDiff/Compare over an entity attribute
  std::optional<std::string> direction;          // Compare: "greater" or "smaller"
  std::string expression;  // core noun phrase (Simple tasks)
  int template_family = 0;

  friend bool operator==(const Task&, const Task&) = default;
};

/// Stage1 iff Simple and at most 6 hops.
Stage stage_for(TaskKind kind, std::size_t hops);

// ---------------------------------------------------------------------------
// Path sampling

struct PathConstraint {
  enum class End { Any, Entity, Scalar };
  End end = End::Any;
  std::optional<std::string> start_id;       // forces an entity start
  bool allow_scalar_start = true;
  std::optional<std::string> end_type;       // entity type of the final node
  std::optional<std::string> end_attribute;  // Scalar ends: attribute to read
  bool numeric_end = false;                  // Scalar ends: int/year domains only
  std::set<std::string> avoid;               // node ids that may not appear
};

/// Samples acyclic paths over the verified graph. Reverse steps and scalar
/// starts are admitted only when they identify a unique entity in the full
/// world graph.
class PathSampler {
 public:
  PathSampler(const WorldSchema& schema, const KnowledgeGraph& verified, const KnowledgeGraph& full);

  std::optional<ReasoningPath> sample(std::size_t hops, const PathConstraint& constraint, Rng& rng) const;

  /// Valid moves out of `node` (entity steps only).
  std::vector<PathStep> entity_moves(const std::string& node) const;
  bool unique_scalar(const std::string& value) const;

 private:
  bool extend(ReasoningPath& path, std::size_t remaining, const PathConstraint& constraint,
              std::set<std::string>& used, Rng& rng, std::size_t& budget) const;

  const WorldSchema& schema_;
  const KnowledgeGraph& verified_;
  const KnowledgeGraph& full_;
  std::map<std::string, std::size_t> value_counts_;
};

struct PathSample {
  std::vector<ReasoningPath> paths;
  std::map<std::size_t, std::size_t> shortfall;  // hops -> missing count
};

/// Paths per requested hop length (1..12), de-duplicated, deterministic in seed.
PathSample sample_paths(const WorldSchema& schema, const KnowledgeGraph& verified,
                        const KnowledgeGraph& full, const std::map<std::size_t, std::size_t>& histogram,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Verbalization and composition

inline constexpr int kTemplateFamilies = 3;  // plain, instruction, scenario

struct Verbalizer {
  const WorldSchema& schema;
  const KnowledgeGraph& graph;

  /// Nested noun phrase for the path's answer. With `chained` the start
  /// anchor is replaced by a reference to the previous question's answer.
  std::string expression(const ReasoningPath& path, bool chained = false) const;
  std::string answer(const ReasoningPath& path) const;
  std::string answer_type(const ReasoningPath& path) const;
  /// Plain "Which city is ...?" / "What is ...?" question for an expression.
  std::string plain_question(const ReasoningPath& path, const std::string& expression) const;
};

/// Throws Error("CONCEALMENT") if the question would leak the answer or an
/// intermediate node.
Task verbalize_simple(const WorldSchema& schema, const KnowledgeGraph& graph,
                      const ReasoningPath& path, int template_family, std::uint64_t seed);

/// Throws Error("INCOMPATIBLE") for mismatched answer types and
/// Error("COMPARE_TIE") when a Compare has no strict winner.
Task compose_parallel(const WorldSchema& schema, const KnowledgeGraph& graph, const Task& t1,
                      const Task& t2, Composition mode, const std::optional<std::string>& attribute,
                      const std::string& direction = "greater");

/// Throws Error("ANCHOR_MISMATCH") unless t1's answer is t2's start anchor.
Task compose_combo(const WorldSchema& schema, const KnowledgeGraph& graph, const Task& t1,
                   const Task& t2);

/// Names of intermediate and end entities (everything the question must hide).
std::vector<std::string> hidden_names(const KnowledgeGraph& graph, const Task& task);

/// True when the question mentions none of the hidden names, nor the answer.
bool concealed(const KnowledgeGraph& graph, const Task& task);

/// Re-derives a task's answer by walking its provenance over `graph`,
/// independently of how the task was built. nullopt when the walk fails.
std::optional<std::string> evaluate_provenance(const WorldSchema& schema, const KnowledgeGraph& graph,
                                               const Task& task);

// ---------------------------------------------------------------------------
// Dataset

/// Cells of the kind x hop-bucket table: Simple 1-3, Simple 4-6,
/// Parallel 1-3, Parallel 4-6, Parallel 7+, Combo 7+.
inline constexpr std::array<std::size_t, 6> kTableCells = {20384, 11264, 2913, 2019, 1870, 2622};

struct MixConfig {
  std::size_t total = 1000;
  std::array<std::size_t, 6> cells = kTableCells;  // relative weights
  std::array<std::size_t, 3> bench = {0, 0, 0};   // Simple, Parallel, Combo
  std::size_t combo_min_hops = 7;
  std::size_t max_hops = 12;
};

/// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights);

struct Dataset {
  std::vector<Task> train;
  std::vector<Task> bench;
  std::map<std::string, std::size_t> shortfall;  // cell name -> missing
  std::array<std::size_t, 6> requested{};
  std::array<std::size_t, 6> realized{};
};

/// Hop bucket name: "1-3", "4-6" or "7+".
std::string hop_bucket(std::size_t hops);
/// Index into kTableCells for a task, or nullopt for cells the table lacks.
std::optional<std::size_t> table_cell(TaskKind kind, std::size_t hops);

/// Builds the task mix over the verified graph. Every provenance path is
/// used by exactly one task, so train and bench never share a path. Every
/// answer is re-derived by evaluate_provenance; a disagreement throws
/// Error("UNSOLVABLE").
Dataset build_dataset(const WorldSchema& schema, const KnowledgeGraph& verified,
                      const KnowledgeGraph& full, const MixConfig& mix, std::uint64_t seed);

nlohmann::ordered_json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);
std::string tasks_to_jsonl(const std::vector<Task>& tasks);
std::vector<Task> tasks_from_jsonl(std::string_view text);

}  // namespace searchgym
