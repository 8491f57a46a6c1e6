#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "searchgym/graph.hpp"
#include "searchgym/schema.hpp"

namespace searchgym {

/// Byte range [begin, end) of the body sentence that states `fact`.
struct FactSpan {
  Fact fact;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const FactSpan&, const FactSpan&) = default;
};

struct Document {
  std::string entity_id;
  std::string url;
  std::string title;
  std::string abstract;
  std::string body;
  std::vector<FactSpan> fact_spans;  // not persisted

  friend bool operator==(const Document&, const Document&) = default;
};

class Corpus {
 public:
  Corpus() = default;
  /// Throws Error("DUPLICATE_URL") when two documents share a url.
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }

  const Document* find_url(std::string_view url) const;
  const Document* find_entity(std::string_view entity_id) const;

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_url_;
  std::unordered_map<std::string, std::size_t> by_entity_;
};

inline constexpr int kTemplateCount = 8;
inline constexpr std::string_view kUrlPrefix = "https://searchgym.local/wiki/";

/// Lowercase, hyphen-joined, ASCII-folded rendering of a display name.
std::string slugify(std::string_view display_name);
std::string assign_url(const EntityNode& entity);

/// External text generator. Receives {"entity","facts","template_id"} and
/// returns the generated body, or nullopt on failure.
using GeneratorHook = std::function<std::optional<std::string>(const nlohmann::json& request)>;

/// POSTs the request as JSON to `url` and reads {"body": ...} back.
GeneratorHook http_generator_hook(std::string url, int timeout_seconds = 10);

struct RenderContext {
  const WorldSchema& schema;
  const KnowledgeGraph& graph;
  const GeneratorHook* hook = nullptr;
};

/// Sentence core for a fact, e.g. "Elara Vance graduated from Astral
/// University" or "Silverwind has a population of 51234 residents".
std::string fact_clause(const RenderContext& ctx, const Fact& fact);

/// Throws Error("UNKNOWN_TEMPLATE") for template ids outside [0, kTemplateCount).
Document render_document(const RenderContext& ctx, const EntityNode& entity,
                         const std::vector<Fact>& facts, int template_id, std::uint64_t seed);

Corpus build_corpus(const WorldSchema& schema, const KnowledgeGraph& graph, int template_count,
                    std::uint64_t seed, const GeneratorHook* hook = nullptr);

/// Facts the corpus renders for an entity: its scalars, outgoing edges and
/// incoming edges, with incoming mirrors of symmetric relations dropped.
std::vector<Fact> renderable_facts(const WorldSchema& schema, const KnowledgeGraph& graph,
                                   std::string_view entity_id);

/// Every word that appears in bundled template text. Name generation
/// avoids these so filler prose can never mention an entity.
std::vector<std::string_view> template_vocabulary();

/// Filler sentences a template can emit (for audits).
std::vector<std::string> sample_filler(int template_id, std::uint64_t seed, std::size_t count);

std::string corpus_to_jsonl(const Corpus& corpus);
Corpus corpus_from_jsonl(std::string_view text);

}  // namespace searchgym
