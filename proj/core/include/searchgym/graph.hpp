#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "searchgym/common.hpp"
#include "searchgym/schema.hpp"

namespace searchgym {

/// Position of a node inside KnowledgeGraph::nodes(). Kept distinct from
/// plain integers so edge indices and node indices cannot be swapped.
enum class NodeIndex : std::uint32_t {};

constexpr std::size_t to_size(NodeIndex i) noexcept { return static_cast<std::size_t>(i); }

/// A literal attribute value. `number` is set for int and year domains;
/// `text` is the canonical rendering (decimal digits, no separators).
struct ScalarValue {
  std::string text;
  std::optional<std::int64_t> number;

  friend bool operator==(const ScalarValue&, const ScalarValue&) = default;
};

struct EntityNode {
  std::string id;  // 16 lowercase hex digits
  std::string display_name;
  std::string type_name;
  std::map<std::string, ScalarValue> scalar_attrs;

  friend bool operator==(const EntityNode&, const EntityNode&) = default;
};

struct RelationEdge {
  std::string source;
  std::string relation;
  std::string target;

  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
  friend auto operator<=>(const RelationEdge&, const RelationEdge&) = default;
};

/// One entry of an entity's local fact set. For scalar facts `object` holds
/// the value text; for edge facts it holds the target entity id.
struct Fact {
  std::string subject;
  std::string relation;
  std::string object;
  bool is_edge = false;

  friend bool operator==(const Fact&, const Fact&) = default;
};

/// Immutable entity/relation store. Edges are kept sorted by
/// (source, relation, target); adjacency lists hold indices into edges().
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<EntityNode> nodes, std::vector<RelationEdge> edges);

  const std::vector<EntityNode>& nodes() const noexcept { return nodes_; }
  const std::vector<RelationEdge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::optional<NodeIndex> find(std::string_view id) const;
  std::optional<NodeIndex> find_by_name(std::string_view display_name) const;
  const EntityNode& node(NodeIndex i) const { return nodes_[to_size(i)]; }
  /// Throws Error("UNKNOWN_ENTITY") for ids not in the graph.
  const EntityNode& node(std::string_view id) const;

  std::span<const std::size_t> outgoing(NodeIndex i) const { return out_[to_size(i)]; }
  std::span<const std::size_t> incoming(NodeIndex i) const { return in_[to_size(i)]; }

  /// Targets of `relation` leaving `id` (0 or 1 for stored relations).
  std::vector<std::string> targets(std::string_view id, std::string_view relation) const;
  /// Sources of `relation` edges pointing at `id`.
  std::vector<std::string> sources(std::string_view id, std::string_view relation) const;

  /// Members of a 1-n attribute, derived from the n-1 relation it views.
  std::vector<std::string> derived_targets(const WorldSchema& schema, std::string_view id,
                                           std::string_view attribute) const;

  std::vector<NodeIndex> of_type(std::string_view type_name) const;

  /// Same nodes, different edge set (used by the verification filter).
  KnowledgeGraph with_edges(std::vector<RelationEdge> edges) const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<EntityNode> nodes_;
  std::vector<RelationEdge> edges_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::unordered_map<std::string, NodeIndex> by_name_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

/// Node counts per entity type, keyed by type name.
using TypeCounts = std::map<std::string, std::size_t>;

/// Counts scaled from the 300-node desk world (Person 120, City 50,
/// Country 14, Company 44, University 40, Museum 32) to roughly `total`.
TypeCounts scaled_counts(std::size_t total);

/// Throws Error("INFEASIBLE_CARDINALITY") naming the offending relation when
/// the counts cannot satisfy a Compulsory relation, and Error("INVALID_SCHEMA")
/// when validate_schema reports violations.
KnowledgeGraph synthesize_graph(const WorldSchema& schema, const TypeCounts& counts,
                                std::uint64_t seed);

/// Codes: CARDINALITY, SYMMETRY, DOMAIN, MISSING_COMPULSORY, SELF_LOOP,
/// FAN_IN, UNKNOWN_RELATION, TYPE_MISMATCH, DANGLING_EDGE, DUP_NAME, DUP_ID.
std::vector<Violation> check_graph(const WorldSchema& schema, const KnowledgeGraph& graph);

/// Scalar facts first (by attribute name), then outgoing edges, then incoming.
std::vector<Fact> neighborhood(const KnowledgeGraph& graph, std::string_view id);

/// JSONL: one record per node then one per edge.
std::string graph_to_jsonl(const KnowledgeGraph& graph);
KnowledgeGraph graph_from_jsonl(std::string_view text);

/// Fictional-name generator shared by worldgen. Every word it hands out is
/// unique for the generator's lifetime and never equals a reserved word.
class NameGenerator {
 public:
  explicit NameGenerator(std::uint64_t seed);

  void reserve(std::string_view word);
  /// A fresh capitalized word of 2 to 4 syllables.
  std::string word();
  /// A display name styled for the entity type.
  std::string name_for(std::string_view type_name);

 private:
  Rng rng_;
  std::unordered_map<std::string, bool> used_;  // lowercase words
};

}  // namespace searchgym
