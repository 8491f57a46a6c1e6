#pragma once

#include <string>
#include <vector>

#include "searchgym/corpus.hpp"
#include "searchgym/graph.hpp"
#include "searchgym/retrieval.hpp"

namespace searchgym {

inline constexpr std::size_t kQueriesPerEdge = 15;
inline constexpr int kRetainThreshold = 5;
inline constexpr std::size_t kVerifyTopK = 5;

struct EdgeProbe {
  RelationEdge edge;
  std::vector<std::string> queries;
  int hit_count = 0;
  bool retained = false;
};

/// Retention rule for a probe: at least 5 of the 15 queries must surface the
/// target document in the top 5.
constexpr bool retained_for(int hit_count) noexcept { return hit_count >= kRetainThreshold; }

/// Five phrasings x three variants (name + target noun, name + relation
/// phrase, distinguishing scalar + relation phrase), all distinct.
std::vector<std::string> generate_edge_queries(const WorldSchema& schema,
                                               const KnowledgeGraph& graph,
                                               const RelationEdge& edge);

/// Throws Error("UNKNOWN_ENTITY") when the edge target has no document.
EdgeProbe verify_edge(const SearchIndex& index, const Corpus& corpus,
                      std::vector<std::string> queries, const RelationEdge& edge);

struct FilterResult {
  KnowledgeGraph verified;
  std::vector<EdgeProbe> report;  // edge sort order
  std::size_t retained = 0;
  std::size_t dropped = 0;

  double retention() const {
    const auto total = retained + dropped;
    return total == 0 ? 1.0 : static_cast<double>(retained) / static_cast<double>(total);
  }
};

/// Probes every edge. `threads` > 1 spreads probes over worker threads; the
/// report order does not depend on it.
FilterResult filter_graph(const WorldSchema& schema, const KnowledgeGraph& graph,
                          const SearchIndex& index, const Corpus& corpus, unsigned threads = 1);

/// JSONL {"src","rel","dst","hits","retained"} per probe.
std::string probe_report_jsonl(const std::vector<EdgeProbe>& report);

}  // namespace searchgym
