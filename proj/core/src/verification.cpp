#include "searchgym/verification.hpp"

#include <atomic>
#include <map>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

namespace searchgym {

namespace {

// "the person that was born in the year 1968" style description of a node
// through one of its scalars, preferring a value unique within its type.
std::string describe_by_scalar(const WorldSchema& schema, const KnowledgeGraph& graph,
                               const EntityNode& node) {
  const auto* type = schema.find(node.type_name);
  if (type == nullptr || node.scalar_attrs.empty()) return node.display_name;

  const AttributeSpec* chosen = nullptr;
  for (const auto& a : type->attributes) {
    if (a.is_entity() || !node.scalar_attrs.contains(a.name)) continue;
    if (chosen == nullptr) chosen = &a;
    const auto& value = node.scalar_attrs.at(a.name).text;
    std::size_t same = 0;
    for (auto idx : graph.of_type(node.type_name)) {
      const auto& other = graph.node(idx).scalar_attrs;
      if (auto it = other.find(a.name); it != other.end() && it->second.text == value) ++same;
    }
    if (same == 1) {
      chosen = &a;
      break;
    }
  }
  std::string out = type->noun_or_default() + " that " + chosen->phrase_or_default() + " " +
                    node.scalar_attrs.at(chosen->name).text;
  if (auto unit = chosen->unit_or_empty(); !unit.empty()) out += " " + unit;
  return out;
}

}  // namespace

std::vector<std::string> generate_edge_queries(const WorldSchema& schema,
                                               const KnowledgeGraph& graph,
                                               const RelationEdge& edge) {
  const auto& src = graph.node(edge.source);
  const auto& dst = graph.node(edge.target);
  const auto* spec = schema.attribute(src.type_name, edge.relation);
  if (spec == nullptr) throw Error("UNKNOWN_RELATION", src.type_name + "." + edge.relation);
  const auto* dst_type = schema.find(dst.type_name);
  const std::string noun = dst_type ? dst_type->noun_or_default() : to_lower_ascii(dst.type_name);
  const std::string phrase = spec->phrase_or_default();
  const std::string name = src.display_name;
  const std::string label = spec->role ? *spec->role : noun;
  const std::string described = describe_by_scalar(schema, graph, src);

  std::vector<std::string> q = {
      // full name + what is sought
      name + " " + noun,
      noun + " of " + name,
      name + " " + label,
      "which " + noun + " is connected to " + name,
      name + " related " + noun,
      // name + relation phrase
      name + " " + phrase,
      noun + " that " + name + " " + phrase,
      "what " + name + " " + phrase,
      name + " " + phrase + " which " + noun,
      "find the " + noun + " " + name + " " + phrase,
      // distinguishing scalar + relation phrase
      "the " + described + " " + phrase,
      described + " " + phrase + " which " + noun,
      noun + " that the " + described + " " + phrase,
      phrase + " " + described,
      "which " + noun + " " + described + " " + phrase,
  };
  // Identical descriptions can only arise from pathological schemas; make
  // every string distinct without changing its tokens' meaning.
  std::set<std::string> seen;
  for (auto& s : q) {
    while (!seen.insert(s).second) s += " " + noun;
  }
  return q;
}

EdgeProbe verify_edge(const SearchIndex& index, const Corpus& corpus,
                      std::vector<std::string> queries, const RelationEdge& edge) {
  const auto* target = corpus.find_entity(edge.target);
  if (target == nullptr) throw Error("UNKNOWN_ENTITY", "no document for " + edge.target);
  EdgeProbe probe;
  probe.edge = edge;
  for (const auto& q : queries) {
    for (const auto& h : rank(index, q, kVerifyTopK)) {
      if (index.document(h.doc).url == target->url) {
        ++probe.hit_count;
        break;
      }
    }
  }
  probe.queries = std::move(queries);
  probe.retained = retained_for(probe.hit_count);
  return probe;
}

FilterResult filter_graph(const WorldSchema& schema, const KnowledgeGraph& graph,
                          const SearchIndex& index, const Corpus& corpus, unsigned threads) {
  const auto& edges = graph.edges();
  FilterResult result;
  result.report.resize(edges.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < edges.size(); i = next++) {
      result.report[i] =
          verify_edge(index, corpus, generate_edge_queries(schema, graph, edges[i]), edges[i]);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<RelationEdge> kept;
  for (const auto& p : result.report) {
    if (p.retained) {
      kept.push_back(p.edge);
      ++result.retained;
    } else {
      ++result.dropped;
    }
  }
  result.verified = graph.with_edges(std::move(kept));
  return result;
}

std::string probe_report_jsonl(const std::vector<EdgeProbe>& report) {
  std::string out;
  for (const auto& p : report) {
    nlohmann::ordered_json j;
    j["src"] = p.edge.source;
    j["rel"] = p.edge.relation;
    j["dst"] = p.edge.target;
    j["hits"] = p.hit_count;
    j["retained"] = p.retained;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace searchgym
