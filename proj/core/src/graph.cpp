#include "searchgym/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"

namespace searchgym {

KnowledgeGraph::KnowledgeGraph(std::vector<EntityNode> nodes, std::vector<RelationEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  by_id_.reserve(nodes_.size());
  by_name_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto idx = static_cast<NodeIndex>(i);
    by_id_.emplace(nodes_[i].id, idx);
    by_name_.emplace(nodes_[i].display_name, idx);
  }
  out_.assign(nodes_.size(), {});
  in_.assign(nodes_.size(), {});
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (auto s = find(edges_[e].source)) out_[to_size(*s)].push_back(e);
    if (auto t = find(edges_[e].target)) in_[to_size(*t)].push_back(e);
  }
}

std::optional<NodeIndex> KnowledgeGraph::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeIndex> KnowledgeGraph::find_by_name(std::string_view display_name) const {
  auto it = by_name_.find(std::string(display_name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

const EntityNode& KnowledgeGraph::node(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw Error("UNKNOWN_ENTITY", "unknown entity id " + std::string(id));
  return nodes_[to_size(*idx)];
}

std::vector<std::string> KnowledgeGraph::targets(std::string_view id,
                                                 std::string_view relation) const {
  std::vector<std::string> out;
  if (auto idx = find(id)) {
    for (auto e : out_[to_size(*idx)]) {
      if (edges_[e].relation == relation) out.push_back(edges_[e].target);
    }
  }
  return out;
}

std::vector<std::string> KnowledgeGraph::sources(std::string_view id,
                                                 std::string_view relation) const {
  std::vector<std::string> out;
  if (auto idx = find(id)) {
    for (auto e : in_[to_size(*idx)]) {
      if (edges_[e].relation == relation) out.push_back(edges_[e].source);
    }
  }
  return out;
}

std::vector<std::string> KnowledgeGraph::derived_targets(const WorldSchema& schema,
                                                         std::string_view id,
                                                         std::string_view attribute) const {
  const auto& n = node(id);
  const auto* spec = schema.attribute(n.type_name, attribute);
  if (spec == nullptr || spec->cardinality != Cardinality::OneToMany || !spec->inverse_of) {
    return {};
  }
  return sources(id, *spec->inverse_of);
}

std::vector<NodeIndex> KnowledgeGraph::of_type(std::string_view type_name) const {
  std::vector<NodeIndex> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].type_name == type_name) out.push_back(static_cast<NodeIndex>(i));
  }
  return out;
}

KnowledgeGraph KnowledgeGraph::with_edges(std::vector<RelationEdge> edges) const {
  return KnowledgeGraph(nodes_, std::move(edges));
}

// ---------------------------------------------------------------------------
// Names

namespace {

constexpr std::array<std::string_view, 64> kSyllables = {
    "ka",  "lo",  "ri",  "ven", "dar", "mi",  "sol", "tha", "bel", "cor", "dun",
    "el",  "fa",  "gor", "hal", "is",  "jor", "kel", "lum", "mor", "nar", "os",
    "pel", "qui", "ras", "sen", "tor", "ul",  "vor", "wen", "xan", "yel", "zar",
    "bri", "cal", "dra", "eth", "fin", "gal", "hes", "ith", "jun", "kor", "lia",
    "mar", "nev", "ore", "pra", "ques", "rin", "sta", "tem", "una", "vel", "wyn",
    "xo",  "yar", "zen", "ael", "bor", "cyn", "dov", "ery", "fal"};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

NameGenerator::NameGenerator(std::uint64_t seed) : rng_(seed) {}

void NameGenerator::reserve(std::string_view word) { used_[to_lower_ascii(word)] = true; }

std::string NameGenerator::word() {
  for (;;) {
    const auto syllables = 2 + rng_.below(3);
    std::string w;
    for (std::uint64_t i = 0; i < syllables; ++i) w += kSyllables[rng_.below(kSyllables.size())];
    if (w.size() < 4) continue;
    auto [it, inserted] = used_.emplace(w, true);
    if (inserted) return capitalize(std::move(w));
  }
}

std::string NameGenerator::name_for(std::string_view type_name) {
  static constexpr std::array<std::string_view, 6> kCompanySuffix = {
      "Industries", "Systems", "Holdings", "Labs", "Group", "Works"};
  static constexpr std::array<std::string_view, 3> kUniversitySuffix = {"University",
                                                                       "Institute", "College"};
  static constexpr std::array<std::string_view, 2> kMuseumSuffix = {"Museum", "Gallery"};

  if (type_name == "Person") return word() + " " + word();
  if (type_name == "Company") {
    auto w = word();
    return w + " " + std::string(kCompanySuffix[rng_.below(kCompanySuffix.size())]);
  }
  if (type_name == "University") {
    auto w = word();
    return w + " " + std::string(kUniversitySuffix[rng_.below(kUniversitySuffix.size())]);
  }
  if (type_name == "Museum") {
    auto w = word();
    return w + " " + std::string(kMuseumSuffix[rng_.below(kMuseumSuffix.size())]);
  }
  return word();
}

// ---------------------------------------------------------------------------
// Synthesis

TypeCounts scaled_counts(std::size_t total) {
  static const std::array<std::pair<const char*, std::size_t>, 6> kDesk = {{
      {"Person", 120}, {"City", 50}, {"Country", 14},
      {"Company", 44}, {"University", 40}, {"Museum", 32}}};
  TypeCounts out;
  for (const auto& [type, n] : kDesk) {
    const double scaled = static_cast<double>(n) * static_cast<double>(total) / 300.0;
    out[type] = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(scaled)));
  }
  return out;
}

namespace {

void reserve_words(NameGenerator& names, std::string_view text) {
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      cur += c;
    } else if (!cur.empty()) {
      names.reserve(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) names.reserve(cur);
}

void reserve_schema_vocabulary(NameGenerator& names, const WorldSchema& schema) {
  for (const auto& t : schema.entity_types) {
    reserve_words(names, t.type_name);
    reserve_words(names, t.noun_or_default());
    for (const auto& a : t.attributes) {
      reserve_words(names, a.name);
      reserve_words(names, a.phrase_or_default());
      reserve_words(names, a.label_or_default());
      if (a.role) reserve_words(names, *a.role);
      reserve_words(names, a.unit_or_empty());
    }
  }
  for (auto w : template_vocabulary()) reserve_words(names, w);
}

[[noreturn]] void infeasible(const std::string& type, const AttributeSpec& a,
                             const std::string& why) {
  throw Error("INFEASIBLE_CARDINALITY", type + "." + a.name + ": " + why);
}

struct Builder {
  const WorldSchema& schema;
  const TypeCounts& counts;
  Rng rng;
  NameGenerator names;
  std::vector<EntityNode> nodes;
  std::map<std::string, std::vector<std::size_t>> by_type;
  std::vector<RelationEdge> edges;

  Builder(const WorldSchema& s, const TypeCounts& c, std::uint64_t seed)
      : schema(s),
        counts(c),
        rng(derive_seed(seed, "worldgen")),
        names(derive_seed(seed, "worldgen:names")) {}

  std::size_t count_of(const std::string& type) const {
    auto it = counts.find(type);
    return it == counts.end() ? 0 : it->second;
  }

  ScalarValue draw_scalar(const AttributeSpec& a) {
    const auto& d = *a.domain;
    if (d.type == DomainType::Name) return {names.word(), std::nullopt};
    const auto v = rng.between(d.min_or_default(), d.max_or_default());
    return {std::to_string(v), v};
  }

  bool present(const AttributeSpec& a) {
    return a.is_compulsory() || rng.chance(a.presence_or_default());
  }

  void make_nodes(std::uint64_t seed) {
    std::set<std::string> ids;
    for (const auto& t : schema.entity_types) {
      const auto n = count_of(t.type_name);
      for (std::size_t i = 0; i < n; ++i) {
        EntityNode node;
        std::uint64_t salt = 0;
        do {
          node.id = to_hex(derive_seed(seed, "node:" + t.type_name + ":" + std::to_string(i) +
                                                 ":" + std::to_string(salt++)));
        } while (!ids.insert(node.id).second);
        node.display_name = names.name_for(t.type_name);
        node.type_name = t.type_name;
        for (const auto& a : t.attributes) {
          if (a.is_entity()) continue;
          if (present(a)) node.scalar_attrs[a.name] = draw_scalar(a);
        }
        by_type[t.type_name].push_back(nodes.size());
        nodes.push_back(std::move(node));
      }
    }
  }

  void add(std::size_t s, const std::string& rel, std::size_t t) {
    edges.push_back({nodes[s].id, rel, nodes[t].id});
  }

  void wire_many_to_one(const EntityTypeSpec& type, const AttributeSpec& a) {
    const auto& sources = by_type[type.type_name];
    const auto& targets = by_type[*a.target_type];
    const std::size_t cap = a.max_fan_in ? static_cast<std::size_t>(*a.max_fan_in) : SIZE_MAX;
    std::vector<std::size_t> fan_in(nodes.size(), 0);
    for (auto s : sources) {
      if (!present(a)) continue;
      std::vector<std::size_t> open;
      for (auto t : targets) {
        if (t != s && fan_in[t] < cap) open.push_back(t);
      }
      if (open.empty()) {
        if (a.is_compulsory()) infeasible(type.type_name, a, "fan-in caps exhausted");
        continue;
      }
      const auto t = rng.pick(open);
      ++fan_in[t];
      add(s, a.name, t);
    }
  }

  void wire_one_to_one(const EntityTypeSpec& type, const AttributeSpec& a) {
    std::vector<std::size_t> sources;
    for (auto s : by_type[type.type_name]) {
      if (present(a)) sources.push_back(s);
    }
    auto pool = by_type[*a.target_type];
    rng.shuffle(pool);
    std::size_t next = 0;
    for (auto s : sources) {
      // Skip over self so the assignment stays loop-free.
      if (next < pool.size() && pool[next] == s) {
        if (next + 1 < pool.size()) std::swap(pool[next], pool[next + 1]);
      }
      if (next >= pool.size() || pool[next] == s) {
        if (a.is_compulsory()) infeasible(type.type_name, a, "not enough distinct targets");
        break;
      }
      add(s, a.name, pool[next++]);
    }
  }

  void wire_symmetric(const EntityTypeSpec& type, const AttributeSpec& a) {
    std::vector<std::size_t> members;
    for (auto s : by_type[type.type_name]) {
      if (present(a)) members.push_back(s);
    }
    if (members.size() % 2 == 1) {
      if (a.is_compulsory()) infeasible(type.type_name, a, "odd number of symmetric participants");
      members.pop_back();
    }
    rng.shuffle(members);
    for (std::size_t i = 0; i + 1 < members.size(); i += 2) {
      add(members[i], a.name, members[i + 1]);
      add(members[i + 1], a.name, members[i]);
    }
  }

  void make_edges() {
    for (const auto& t : schema.entity_types) {
      if (count_of(t.type_name) == 0) continue;
      for (const auto& a : t.attributes) {
        if (!a.is_entity() || a.cardinality == Cardinality::OneToMany) continue;
        if (count_of(*a.target_type) == 0) {
          if (a.is_compulsory()) infeasible(t.type_name, a, "target type has no nodes");
          continue;
        }
        if (a.cardinality == Cardinality::ManyToOne) {
          wire_many_to_one(t, a);
        } else if (a.is_symmetric()) {
          wire_symmetric(t, a);
        } else {
          wire_one_to_one(t, a);
        }
      }
    }
  }
};

}  // namespace

KnowledgeGraph synthesize_graph(const WorldSchema& schema, const TypeCounts& counts,
                                std::uint64_t seed) {
  if (auto v = validate_schema(schema); !v.empty()) {
    throw Error("INVALID_SCHEMA", "schema has " + std::to_string(v.size()) +
                                      " violation(s), first: " + v.front().code + " at " +
                                      v.front().path);
  }
  for (const auto& [type, n] : counts) {
    if (schema.find(type) == nullptr) throw Error("UNKNOWN_TYPE", "counts name unknown type " + type);
  }
  Builder b(schema, counts, seed);
  reserve_schema_vocabulary(b.names, schema);
  b.make_nodes(seed);
  b.make_edges();
  return KnowledgeGraph(std::move(b.nodes), std::move(b.edges));
}

// ---------------------------------------------------------------------------
// Checking

std::vector<Violation> check_graph(const WorldSchema& schema, const KnowledgeGraph& graph) {
  std::vector<Violation> out;
  auto report = [&out](const char* code, std::string path, std::string message) {
    out.push_back({code, std::move(path), std::move(message)});
  };

  std::set<std::string> ids;
  std::set<std::string> names;
  for (const auto& n : graph.nodes()) {
    if (!ids.insert(n.id).second) report("DUP_ID", n.id, "entity id repeated");
    if (!names.insert(n.display_name).second) {
      report("DUP_NAME", n.id, "display name \"" + n.display_name + "\" repeated");
    }
    const auto* type = schema.find(n.type_name);
    if (type == nullptr) {
      report("DOMAIN", n.id, "unknown entity type " + n.type_name);
      continue;
    }
    for (const auto& [attr, value] : n.scalar_attrs) {
      const auto* a = type->find(attr);
      if (a == nullptr || a->is_entity() || !a->domain) {
        report("DOMAIN", n.id + "." + attr, "not a literal attribute of " + n.type_name);
        continue;
      }
      if (a->domain->type == DomainType::Name) {
        if (value.text.empty()) report("DOMAIN", n.id + "." + attr, "empty name value");
      } else if (!value.number || *value.number < a->domain->min_or_default() ||
                 *value.number > a->domain->max_or_default() ||
                 value.text != std::to_string(*value.number)) {
        report("DOMAIN", n.id + "." + attr, "value " + value.text + " outside domain");
      }
    }
    for (const auto& a : type->attributes) {
      if (!a.is_compulsory() || a.cardinality == Cardinality::OneToMany) continue;
      if (!a.is_entity()) {
        if (!n.scalar_attrs.contains(a.name)) {
          report("MISSING_COMPULSORY", n.id + "." + a.name, "compulsory value missing");
        }
      } else if (graph.targets(n.id, a.name).empty()) {
        report("MISSING_COMPULSORY", n.id + "." + a.name, "compulsory relation missing");
      }
    }
  }

  std::map<std::pair<std::string, std::string>, int> per_source;
  // Fan-in is bounded per (target, source type, relation): two types may
  // reuse an attribute name with different caps.
  std::map<std::tuple<std::string, std::string, std::string>, int> per_target;
  std::set<RelationEdge> edge_set(graph.edges().begin(), graph.edges().end());
  for (const auto& e : graph.edges()) {
    const std::string path = e.source + "." + e.relation;
    auto s = graph.find(e.source);
    auto t = graph.find(e.target);
    if (!s || !t) {
      report("DANGLING_EDGE", path, "edge endpoint not in graph");
      continue;
    }
    if (e.source == e.target) report("SELF_LOOP", path, "edge points at its own source");
    const auto& src = graph.node(*s);
    const auto& dst = graph.node(*t);
    const auto* a = schema.attribute(src.type_name, e.relation);
    if (a == nullptr || !a->is_entity() || a->cardinality == Cardinality::OneToMany) {
      report("UNKNOWN_RELATION", path, "not a stored relation of " + src.type_name);
      continue;
    }
    if (a->target_type != dst.type_name) {
      report("TYPE_MISMATCH", path, "target has type " + dst.type_name);
    }
    ++per_source[{e.source, e.relation}];
    ++per_target[{e.target, src.type_name, e.relation}];
    if (a->is_symmetric() && !edge_set.contains({e.target, e.relation, e.source})) {
      report("SYMMETRY", path, "mirror edge missing");
    }
  }
  for (const auto& [key, n] : per_source) {
    if (n > 1) report("CARDINALITY", key.first + "." + key.second, "relation has multiple targets");
  }
  for (const auto& [key, n] : per_target) {
    const auto& [target, src_type, relation] = key;
    const auto* a = schema.attribute(src_type, relation);
    const std::string path = target + "." + src_type + "." + relation;
    if (a->cardinality == Cardinality::OneToOne && n > 1) {
      report(a->is_symmetric() ? "SYMMETRY" : "CARDINALITY", path,
             "one-to-one target shared by " + std::to_string(n) + " sources");
    } else if (a->max_fan_in && n > *a->max_fan_in) {
      report("FAN_IN", path, "fan-in " + std::to_string(n) + " exceeds cap");
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Fact> neighborhood(const KnowledgeGraph& graph, std::string_view id) {
  const auto idx = graph.find(id);
  if (!idx) throw Error("UNKNOWN_ENTITY", "unknown entity id " + std::string(id));
  const auto& n = graph.node(*idx);
  std::vector<Fact> facts;
  for (const auto& [attr, value] : n.scalar_attrs) facts.push_back({n.id, attr, value.text, false});
  for (auto e : graph.outgoing(*idx)) {
    const auto& edge = graph.edges()[e];
    facts.push_back({edge.source, edge.relation, edge.target, true});
  }
  for (auto e : graph.incoming(*idx)) {
    const auto& edge = graph.edges()[e];
    facts.push_back({edge.source, edge.relation, edge.target, true});
  }
  return facts;
}

// ---------------------------------------------------------------------------
// Persistence

std::string graph_to_jsonl(const KnowledgeGraph& graph) {
  std::string out;
  for (const auto& n : graph.nodes()) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["type"] = n.type_name;
    j["name"] = n.display_name;
    auto attrs = nlohmann::ordered_json::object();
    for (const auto& [k, v] : n.scalar_attrs) {
      if (v.number) {
        attrs[k] = *v.number;
      } else {
        attrs[k] = v.text;
      }
    }
    j["attrs"] = std::move(attrs);
    out += j.dump();
    out += '\n';
  }
  for (const auto& e : graph.edges()) {
    nlohmann::ordered_json j;
    j["src"] = e.source;
    j["rel"] = e.relation;
    j["dst"] = e.target;
    out += j.dump();
    out += '\n';
  }
  return out;
}

KnowledgeGraph graph_from_jsonl(std::string_view text) {
  std::vector<EntityNode> nodes;
  std::vector<RelationEdge> edges;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("src")) {
        edges.push_back({j.at("src").get<std::string>(), j.at("rel").get<std::string>(),
                         j.at("dst").get<std::string>()});
        continue;
      }
      EntityNode n;
      n.id = j.at("id").get<std::string>();
      n.type_name = j.at("type").get<std::string>();
      n.display_name = j.at("name").get<std::string>();
      for (const auto& [k, v] : j.at("attrs").items()) {
        if (v.is_number_integer()) {
          n.scalar_attrs[k] = {std::to_string(v.get<std::int64_t>()), v.get<std::int64_t>()};
        } else {
          n.scalar_attrs[k] = {v.get<std::string>(), std::nullopt};
        }
      }
      nodes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw Error("BAD_ARTIFACT", "graph line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return KnowledgeGraph(std::move(nodes), std::move(edges));
}

}  // namespace searchgym
