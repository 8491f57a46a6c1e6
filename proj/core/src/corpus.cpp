#include "searchgym/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace searchgym {

namespace {
#include "templates.inc"

constexpr std::size_t kMinWords = 300;
constexpr std::size_t kMaxWords = 400;

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string filler_sentence(const TemplateSpec& t, Rng& rng) {
  std::string s(kFillerOpeners[rng.below(kFillerOpeners.size())]);
  s += ' ';
  s += t.subjects[rng.below(t.subjects.size())];
  s += ' ';
  s += kFillerPredicates[rng.below(kFillerPredicates.size())];
  s += kFillerClosers[rng.below(kFillerClosers.size())];
  s += '.';
  return s;
}

// Split generator output into sentences so it can stand in for filler.
std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n' || c == '\r') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || text[i + 1] == ' ')) {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

nlohmann::json hook_request(const RenderContext& ctx, const EntityNode& entity,
                            const std::vector<Fact>& facts, int template_id) {
  nlohmann::json attrs = nlohmann::json::object();
  for (const auto& [k, v] : entity.scalar_attrs) attrs[k] = v.text;
  nlohmann::json fj = nlohmann::json::array();
  for (const auto& f : facts) fj.push_back(fact_clause(ctx, f));
  return {{"entity",
           {{"id", entity.id}, {"name", entity.display_name}, {"type", entity.type_name},
            {"attrs", attrs}}},
          {"facts", fj},
          {"template_id", template_id}};
}

}  // namespace

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  by_url_.reserve(documents_.size());
  by_entity_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!by_url_.emplace(documents_[i].url, i).second) {
      throw Error("DUPLICATE_URL", "url assigned twice: " + documents_[i].url);
    }
    by_entity_.emplace(documents_[i].entity_id, i);
  }
}

const Document* Corpus::find_url(std::string_view url) const {
  auto it = by_url_.find(std::string(url));
  return it == by_url_.end() ? nullptr : &documents_[it->second];
}

const Document* Corpus::find_entity(std::string_view entity_id) const {
  auto it = by_entity_.find(std::string(entity_id));
  return it == by_entity_.end() ? nullptr : &documents_[it->second];
}

namespace {

// ASCII spelling of U+00C0..U+017F (Latin-1 letters and Latin Extended-A).
constexpr std::array<const char*, 192> kLatinFold = {
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "", "o", "u", "u", "u", "u", "y", "th", "y",
    "a", "a", "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",
    "d", "d", "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",
    "g", "g", "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",
    "i", "i", "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",
    "l", "l", "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",
    "o", "o", "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",
    "s", "s", "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",
    "u", "u", "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s",
};

}  // namespace

std::string slugify(std::string_view display_name) {
  std::string slug;
  bool pending_hyphen = false;
  auto put = [&](std::string_view letters) {
    if (letters.empty()) {
      pending_hyphen = true;
      return;
    }
    if (pending_hyphen && !slug.empty()) slug += '-';
    pending_hyphen = false;
    slug += letters;
  };
  for (std::size_t i = 0; i < display_name.size(); ++i) {
    const auto c = static_cast<unsigned char>(display_name[i]);
    if (c < 0x80) {
      if (std::isalnum(c) != 0) {
        const char lower = static_cast<char>(std::tolower(c));
        put(std::string_view(&lower, 1));
      } else {
        pending_hyphen = true;
      }
      continue;
    }
    // Two-byte sequences in the folding table; any other non-ASCII character is dropped.
    if ((c & 0xE0) == 0xC0 && i + 1 < display_name.size()) {
      const auto next = static_cast<unsigned char>(display_name[i + 1]);
      const unsigned cp = ((c & 0x1Fu) << 6) | (next & 0x3Fu);
      if ((next & 0xC0) == 0x80 && cp >= 0xC0 && cp < 0x180) {
        put(kLatinFold[cp - 0xC0]);
        ++i;
      }
    }
  }
  return slug.empty() ? "entity" : slug;
}

std::string assign_url(const EntityNode& entity) {
  return std::string(kUrlPrefix) + slugify(entity.display_name) + "-" + entity.id.substr(0, 8);
}

std::string fact_clause(const RenderContext& ctx, const Fact& fact) {
  const auto& subject = ctx.graph.node(fact.subject);
  const auto* spec = ctx.schema.attribute(subject.type_name, fact.relation);
  if (spec == nullptr) {
    throw Error("UNKNOWN_RELATION", subject.type_name + " has no attribute " + fact.relation);
  }
  std::string s = subject.display_name + " " + spec->phrase_or_default() + " ";
  if (fact.is_edge) {
    s += ctx.graph.node(fact.object).display_name;
  } else {
    s += fact.object;
    if (auto unit = spec->unit_or_empty(); !unit.empty()) s += " " + unit;
  }
  return s;
}

std::vector<Fact> renderable_facts(const WorldSchema& schema, const KnowledgeGraph& graph,
                                   std::string_view entity_id) {
  const auto idx = graph.find(entity_id);
  if (!idx) throw Error("UNKNOWN_ENTITY", "unknown entity id " + std::string(entity_id));
  const auto& n = graph.node(*idx);
  const auto* type = schema.find(n.type_name);
  if (type == nullptr) throw Error("UNKNOWN_TYPE", "unknown entity type " + n.type_name);

  std::vector<Fact> facts;
  for (const auto& a : type->attributes) {
    if (!a.is_entity()) {
      if (auto it = n.scalar_attrs.find(a.name); it != n.scalar_attrs.end()) {
        facts.push_back({n.id, a.name, it->second.text, false});
      }
      continue;
    }
    for (const auto& t : graph.targets(n.id, a.name)) facts.push_back({n.id, a.name, t, true});
  }
  for (auto e : graph.incoming(*idx)) {
    const auto& edge = graph.edges()[e];
    const auto& src = graph.node(edge.source);
    const auto* a = schema.attribute(src.type_name, edge.relation);
    if (a != nullptr && a->is_symmetric() &&
        src.type_name == n.type_name) {
      const auto back = graph.targets(n.id, edge.relation);
      if (std::find(back.begin(), back.end(), edge.source) != back.end()) continue;
    }
    facts.push_back({edge.source, edge.relation, edge.target, true});
  }
  return facts;
}

Document render_document(const RenderContext& ctx, const EntityNode& entity,
                         const std::vector<Fact>& facts, int template_id, std::uint64_t seed) {
  if (template_id < 0 || template_id >= kTemplateCount) {
    throw Error("UNKNOWN_TEMPLATE", "template id " + std::to_string(template_id) +
                                        " outside [0, " + std::to_string(kTemplateCount) + ")");
  }
  const auto& tpl = kTemplates[static_cast<std::size_t>(template_id)];
  Rng rng(seed);

  const auto* type = ctx.schema.find(entity.type_name);
  const std::string noun = type ? type->noun_or_default() : to_lower_ascii(entity.type_name);

  std::string opener(tpl.openers[rng.below(tpl.openers.size())]);
  opener = replace_all(std::move(opener), "{name}", entity.display_name);
  opener = replace_all(std::move(opener), "{noun}", noun);

  // Decorations are drawn up front so the compact fallback keeps the stream aligned.
  struct Line {
    const Fact* fact;
    std::string clause;
    std::string lead;
    std::string tail;
    bool outgoing;
  };
  std::vector<Line> lines;
  for (const auto& f : facts) {
    Line l{&f, fact_clause(ctx, f), "", "", f.subject == entity.id};
    if (rng.chance(0.3)) l.lead = tpl.lead_ins[rng.below(tpl.lead_ins.size())];
    if (rng.chance(0.2)) l.tail = tpl.tails[rng.below(tpl.tails.size())];
    lines.push_back(std::move(l));
  }

  auto sentence = [](const Line& l, bool compact) {
    if (compact) return l.clause + ".";
    return l.lead + l.clause + l.tail + ".";
  };

  std::size_t heading_words = 0;
  for (auto h : tpl.headings) heading_words += word_count(h);
  auto base_words = [&](bool compact) {
    std::size_t n = heading_words + word_count(opener);
    for (const auto& l : lines) n += word_count(sentence(l, compact));
    return n;
  };
  const bool compact = base_words(false) > kMaxWords;
  std::size_t words = base_words(compact);
  if (words > kMaxWords) {
    spdlog::debug("document for {} has {} words of facts alone", entity.id, words);
  }

  std::vector<std::string> external;
  if (ctx.hook != nullptr && *ctx.hook) {
    std::optional<std::string> text;
    try {
      text = (*ctx.hook)(hook_request(ctx, entity, facts, template_id));
    } catch (const std::exception& e) {
      spdlog::warn("generator hook failed for {}: {}", entity.id, e.what());
    }
    if (text) {
      external = split_sentences(*text);
    } else {
      spdlog::warn("generator hook returned nothing for {}; using template filler", entity.id);
    }
  }

  const auto target = static_cast<std::size_t>(rng.between(320, 380));
  std::vector<std::string> filler;
  std::set<std::string> used;
  std::size_t external_next = 0;
  int attempts = 0;
  while (words < target && attempts < 200) {
    ++attempts;
    std::string s;
    if (external_next < external.size()) {
      s = external[external_next++];
    } else {
      s = filler_sentence(tpl, rng);
    }
    if (!used.insert(s).second) continue;
    const auto w = word_count(s);
    if (words + w > kMaxWords) {
      if (words >= kMinWords) break;
      continue;
    }
    words += w;
    filler.push_back(std::move(s));
  }

  // Layout: overview, outgoing facts, incoming facts; filler is spread
  // across the three sections.
  std::array<std::vector<std::pair<std::string, const Fact*>>, 3> sections;
  sections[0].push_back({opener, nullptr});
  std::size_t filler_next = 0;
  const std::size_t intro_filler = (filler.size() + 2) / 3;
  while (filler_next < intro_filler) sections[0].push_back({filler[filler_next++], nullptr});

  std::vector<const Line*> out_lines;
  std::vector<const Line*> in_lines;
  for (const auto& l : lines) (l.outgoing ? out_lines : in_lines).push_back(&l);
  const std::size_t remaining = filler.size() - filler_next;
  const std::size_t slots = out_lines.size() + in_lines.size();
  const std::size_t every = remaining == 0 ? SIZE_MAX : std::max<std::size_t>(1, slots / remaining);
  std::size_t since = 0;
  auto place = [&](std::size_t section, const std::vector<const Line*>& src) {
    for (const auto* l : src) {
      sections[section].push_back({sentence(*l, compact), l->fact});
      if (++since >= every && filler_next < filler.size()) {
        sections[section].push_back({filler[filler_next++], nullptr});
        since = 0;
      }
    }
  };
  place(1, out_lines);
  place(2, in_lines);
  while (filler_next < filler.size()) sections[2].push_back({filler[filler_next++], nullptr});

  Document doc;
  doc.entity_id = entity.id;
  doc.url = assign_url(entity);
  doc.title = entity.display_name;
  for (std::size_t s = 0; s < sections.size(); ++s) {
    doc.body += "<h2>";
    doc.body += tpl.headings[s];
    doc.body += "</h2>\n";
    bool first = true;
    for (const auto& [text, fact] : sections[s]) {
      if (!first) doc.body += ' ';
      first = false;
      const auto begin = doc.body.size();
      doc.body += text;
      if (fact != nullptr) doc.fact_spans.push_back({*fact, begin, doc.body.size()});
    }
    doc.body += '\n';
  }

  // Abstract: the first ceil(k/2) compulsory facts stated by this entity.
  std::vector<const Line*> compulsory;
  for (const auto* l : out_lines) {
    const auto* a = type ? type->find(l->fact->relation) : nullptr;
    if (a != nullptr && a->is_compulsory()) compulsory.push_back(l);
  }
  const std::size_t k = (compulsory.size() + 1) / 2;
  for (std::size_t i = 0; i < k; ++i) {
    if (i > 0) doc.abstract += ' ';
    doc.abstract += compulsory[i]->clause + ".";
  }
  if (doc.abstract.empty()) doc.abstract = opener;
  return doc;
}

Corpus build_corpus(const WorldSchema& schema, const KnowledgeGraph& graph, int template_count,
                    std::uint64_t seed, const GeneratorHook* hook) {
  if (template_count < 1 || template_count > kTemplateCount) {
    throw Error("UNKNOWN_TEMPLATE", "template_count must lie in [1, " +
                                        std::to_string(kTemplateCount) + "]");
  }
  RenderContext ctx{schema, graph, hook};
  std::vector<Document> docs;
  docs.reserve(graph.size());
  for (const auto& n : graph.nodes()) {
    const auto doc_seed = derive_seed(seed, n.id);
    Rng pick(derive_seed(doc_seed, "template"));
    const auto template_id = static_cast<int>(pick.below(static_cast<std::uint64_t>(template_count)));
    docs.push_back(render_document(ctx, n, renderable_facts(schema, graph, n.id), template_id,
                                   doc_seed));
  }
  return Corpus(std::move(docs));
}

std::vector<std::string_view> template_vocabulary() {
  std::vector<std::string_view> out;
  for (const auto& t : kTemplates) {
    out.push_back(t.name);
    for (auto s : t.headings) out.push_back(s);
    for (auto s : t.openers) out.push_back(s);
    for (auto s : t.lead_ins) out.push_back(s);
    for (auto s : t.tails) out.push_back(s);
    for (auto s : t.subjects) out.push_back(s);
  }
  for (auto s : kFillerOpeners) out.push_back(s);
  for (auto s : kFillerPredicates) out.push_back(s);
  for (auto s : kFillerClosers) out.push_back(s);
  out.push_back("h2");
  return out;
}

std::vector<std::string> sample_filler(int template_id, std::uint64_t seed, std::size_t count) {
  if (template_id < 0 || template_id >= kTemplateCount) {
    throw Error("UNKNOWN_TEMPLATE", "template id out of range");
  }
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(filler_sentence(kTemplates[static_cast<std::size_t>(template_id)], rng));
  }
  return out;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    nlohmann::ordered_json j;
    j["entity_id"] = d.entity_id;
    j["url"] = d.url;
    j["title"] = d.title;
    j["abstract"] = d.abstract;
    j["body"] = d.body;
    out += j.dump();
    out += '\n';
  }
  return out;
}

Corpus corpus_from_jsonl(std::string_view text) {
  std::vector<Document> docs;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Document d;
      d.entity_id = j.at("entity_id").get<std::string>();
      d.url = j.at("url").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.abstract = j.at("abstract").get<std::string>();
      d.body = j.at("body").get<std::string>();
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw Error("BAD_ARTIFACT", "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(docs));
}

}  // namespace searchgym
