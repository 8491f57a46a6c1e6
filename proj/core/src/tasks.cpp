#include "searchgym/tasks.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include <nlohmann/json.hpp>

namespace searchgym {

std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::Forward: return "forward";
    case StepKind::Reverse: return "reverse";
    case StepKind::ScalarStart: return "scalar_start";
    case StepKind::ScalarEnd: return "scalar_end";
  }
  return "forward";
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Simple: return "Simple";
    case TaskKind::Parallel: return "Parallel";
    case TaskKind::Combo: return "Combo";
  }
  return "Simple";
}

std::string_view to_string(Stage s) { return s == Stage::Stage1 ? "stage1" : "stage2"; }

std::string_view to_string(Composition c) {
  switch (c) {
    case Composition::Simple: return "simple";
    case Composition::Sum: return "sum";
    case Composition::AbsDiff: return "abs_diff";
    case Composition::Compare: return "compare";
    case Composition::Combo: return "combo";
  }
  return "simple";
}

TaskKind task_kind_from_string(std::string_view s) {
  for (auto k : {TaskKind::Simple, TaskKind::Parallel, TaskKind::Combo}) {
    if (to_string(k) == s) return k;
  }
  throw Error("BAD_FIELD", "unknown task kind " + std::string(s));
}

Stage stage_from_string(std::string_view s) {
  if (s == "stage1") return Stage::Stage1;
  if (s == "stage2") return Stage::Stage2;
  throw Error("BAD_FIELD", "unknown stage " + std::string(s));
}

namespace {

StepKind step_kind_from_string(std::string_view s) {
  for (auto k : {StepKind::Forward, StepKind::Reverse, StepKind::ScalarStart, StepKind::ScalarEnd}) {
    if (to_string(k) == s) return k;
  }
  throw Error("BAD_FIELD", "unknown step kind " + std::string(s));
}

Composition composition_from_string(std::string_view s) {
  for (auto c : {Composition::Simple, Composition::Sum, Composition::AbsDiff, Composition::Compare,
                 Composition::Combo}) {
    if (to_string(c) == s) return c;
  }
  throw Error("BAD_FIELD", "unknown mode " + std::string(s));
}

const AttributeSpec& spec_of(const WorldSchema& schema, std::string_view type, std::string_view attr) {
  const auto* a = schema.attribute(type, attr);
  if (a == nullptr) throw Error("UNKNOWN_RELATION", std::string(type) + "." + std::string(attr));
  return *a;
}

std::string noun_of(const WorldSchema& schema, std::string_view type) {
  const auto* t = schema.find(type);
  return t ? t->noun_or_default() : to_lower_ascii(std::string(type));
}

bool is_numeric(const AttributeSpec& a) {
  return !a.is_entity() && a.domain && a.domain->type != DomainType::Name;
}

std::string with_unit(const AttributeSpec& a, const std::string& value) {
  const auto unit = a.unit_or_empty();
  return unit.empty() ? value : value + " " + unit;
}

}  // namespace

std::vector<RelationEdge> ReasoningPath::edges() const {
  std::vector<RelationEdge> out;
  for (const auto& s : steps) {
    if (s.edge) out.push_back(*s.edge);
  }
  return out;
}

std::string ReasoningPath::signature() const {
  std::string sig;
  if (start_value) sig += "=" + *start_value + "|";
  for (const auto& n : nodes) sig += n + ">";
  for (const auto& s : steps) {
    sig += std::string(to_string(s.kind)) + ":" + s.attribute + ";";
  }
  return sig;
}

Stage stage_for(TaskKind kind, std::size_t hops) {
  return kind == TaskKind::Simple && hops <= 6 ? Stage::Stage1 : Stage::Stage2;
}

// ---------------------------------------------------------------------------
// Sampling

PathSampler::PathSampler(const WorldSchema& schema, const KnowledgeGraph& verified,
                         const KnowledgeGraph& full)
    : schema_(schema), verified_(verified), full_(full) {
  for (const auto& n : full_.nodes()) {
    for (const auto& [attr, value] : n.scalar_attrs) ++value_counts_[value.text];
  }
}

bool PathSampler::unique_scalar(const std::string& value) const {
  auto it = value_counts_.find(value);
  return it != value_counts_.end() && it->second == 1;
}

std::vector<PathStep> PathSampler::entity_moves(const std::string& node) const {
  std::vector<PathStep> moves;
  const auto idx = verified_.find(node);
  if (!idx) return moves;
  const auto& type = verified_.node(*idx).type_name;
  for (auto e : verified_.outgoing(*idx)) {
    const auto& edge = verified_.edges()[e];
    moves.push_back({StepKind::Forward, edge.relation, type, edge});
  }
  const auto full_idx = full_.find(node);
  for (auto e : verified_.incoming(*idx)) {
    const auto& edge = verified_.edges()[e];
    const auto& src_type = verified_.node(edge.source).type_name;
    const auto& spec = spec_of(schema_, src_type, edge.relation);
    if (spec.is_symmetric()) continue;
    // "the person that works for X" needs exactly one such person in the world.
    std::size_t same = 0;
    for (auto f : full_.incoming(*full_idx)) {
      const auto& other = full_.edges()[f];
      if (other.relation == edge.relation && full_.node(other.source).type_name == src_type) ++same;
    }
    if (same == 1) moves.push_back({StepKind::Reverse, edge.relation, src_type, edge});
  }
  return moves;
}

bool PathSampler::extend(ReasoningPath& path, std::size_t remaining, const PathConstraint& c,
                         std::set<std::string>& used, Rng& rng, std::size_t& budget) const {
  if (budget == 0) return false;
  --budget;
  const auto& here = path.nodes.back();
  const auto& node = verified_.node(here);
  if (remaining == 0) {
    if (path.scalar_end()) return true;
    if (c.end == PathConstraint::End::Scalar) return false;
    return !c.end_type || *c.end_type == node.type_name;
  }

  struct Option {
    PathStep step;
    std::string next;  // empty for scalar ends
  };
  std::vector<Option> options;
  for (auto& m : entity_moves(here)) {
    std::string next = m.kind == StepKind::Forward ? m.edge->target : m.edge->source;
    if (used.contains(next) || c.avoid.contains(next)) continue;
    options.push_back({std::move(m), next});
  }
  if (remaining == 1 && c.end != PathConstraint::End::Entity &&
      (!c.end_type || *c.end_type == node.type_name)) {
    const auto* type = schema_.find(node.type_name);
    for (const auto& a : type->attributes) {
      if (a.is_entity() || !node.scalar_attrs.contains(a.name)) continue;
      if (c.end_attribute && *c.end_attribute != a.name) continue;
      if (c.numeric_end && !is_numeric(a)) continue;
      if (path.scalar_start() && path.nodes.size() == 1 && path.steps.front().attribute == a.name) continue;
      options.push_back({{StepKind::ScalarEnd, a.name, node.type_name, std::nullopt}, {}});
    }
  }
  rng.shuffle(options);
  // Entity moves first about two thirds of the time.
  if (c.end == PathConstraint::End::Any && remaining == 1 && !rng.chance(0.35)) {
    std::stable_partition(options.begin(), options.end(), [](const Option& o) { return !o.next.empty(); });
  }

  for (auto& o : options) {
    path.steps.push_back(o.step);
    if (o.next.empty()) {
      path.end_value = node.scalar_attrs.at(o.step.attribute).text;
      return true;
    }
    path.nodes.push_back(o.next);
    used.insert(o.next);
    if (extend(path, remaining - 1, c, used, rng, budget)) return true;
    used.erase(o.next);
    path.nodes.pop_back();
    path.steps.pop_back();
    if (budget == 0) return false;
  }
  return false;
}

std::optional<ReasoningPath> PathSampler::sample(std::size_t hops, const PathConstraint& c, Rng& rng) const {
  if (hops == 0 || verified_.size() == 0) return std::nullopt;
  for (int attempt = 0; attempt < 24; ++attempt) {
    ReasoningPath path;
    std::size_t remaining = hops;
    std::string start;
    if (c.start_id) {
      start = *c.start_id;
    } else {
      start = verified_.nodes()[rng.below(verified_.size())].id;
      if (c.avoid.contains(start)) continue;
    }
    const auto& node = verified_.node(start);
    path.nodes = {start};
    path.anchor = node.display_name;

    if (!c.start_id && c.allow_scalar_start && hops >= 2 && rng.chance(0.2)) {
      std::vector<const AttributeSpec*> candidates;
      for (const auto& a : schema_.find(node.type_name)->attributes) {
        if (a.is_entity() || !node.scalar_attrs.contains(a.name)) continue;
        if (unique_scalar(node.scalar_attrs.at(a.name).text)) candidates.push_back(&a);
      }
      if (!candidates.empty()) {
        const auto* a = candidates[rng.below(candidates.size())];
        path.start_value = node.scalar_attrs.at(a->name).text;
        path.anchor = *path.start_value;
        path.steps.push_back({StepKind::ScalarStart, a->name, node.type_name, std::nullopt});
        --remaining;
      }
    }

    std::set<std::string> used = {start};
    std::size_t budget = 400;
    if (extend(path, remaining, c, used, rng, budget)) return path;
  }
  return std::nullopt;
}

PathSample sample_paths(const WorldSchema& schema, const KnowledgeGraph& verified,
                        const KnowledgeGraph& full, const std::map<std::size_t, std::size_t>& histogram,
                        std::uint64_t seed) {
  PathSampler sampler(schema, verified, full);
  Rng rng(derive_seed(seed, "paths"));
  PathSample out;
  std::set<std::string> seen;
  for (const auto& [hops, count] : histogram) {
    for (std::size_t i = 0; i < count; ++i) {
      bool found = false;
      for (int tries = 0; tries < 30 && !found; ++tries) {
        auto p = sampler.sample(hops, {}, rng);
        if (p && seen.insert(p->signature()).second) {
          out.paths.push_back(std::move(*p));
          found = true;
        }
      }
      if (!found) ++out.shortfall[hops];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verbalization

std::string Verbalizer::expression(const ReasoningPath& path, bool chained) const {
  std::string e;
  std::size_t ni = 0;
  const auto& first = graph.node(path.nodes.front());
  if (!path.scalar_start()) {
    e = chained ? "the " + noun_of(schema, first.type_name) + " obtained from the first question"
                : first.display_name;
  }
  for (const auto& step : path.steps) {
    const auto& spec = spec_of(schema, step.subject_type, step.attribute);
    switch (step.kind) {
      case StepKind::ScalarStart:
        e = chained ? "the " + noun_of(schema, first.type_name) + " whose " + spec.label_or_default() +
                          " is equal to the answer of the first question"
                    : "the " + noun_of(schema, first.type_name) + " that " + spec.phrase_or_default() +
                          " " + with_unit(spec, *path.start_value);
        break;
      case StepKind::Forward: {
        const auto& next = graph.node(path.nodes[++ni]);
        e = spec.role ? "the " + *spec.role + " of " + e
                      : "the " + noun_of(schema, next.type_name) + " that " + e + " " + spec.phrase_or_default();
        break;
      }
      case StepKind::Reverse: {
        const auto& next = graph.node(path.nodes[++ni]);
        e = "the " + noun_of(schema, next.type_name) + " that " + spec.phrase_or_default() + " " + e;
        break;
      }
      case StepKind::ScalarEnd:
        e = "the " + spec.label_or_default() + " of " + e;
        break;
    }
  }
  return e;
}

std::string Verbalizer::answer(const ReasoningPath& path) const {
  return path.scalar_end() ? *path.end_value : graph.node(path.nodes.back()).display_name;
}

std::string Verbalizer::answer_type(const ReasoningPath& path) const {
  if (!path.scalar_end()) return graph.node(path.nodes.back()).type_name;
  const auto& step = path.steps.back();
  const auto& spec = spec_of(schema, step.subject_type, step.attribute);
  if (!is_numeric(spec)) return "name:" + spec.label_or_default();
  const auto unit = spec.unit_or_empty();
  return "number:" + (unit.empty() ? spec.label_or_default() : unit);
}

std::string Verbalizer::plain_question(const ReasoningPath& path, const std::string& expr) const {
  if (path.scalar_end()) return "What is " + expr + "?";
  const auto noun = noun_of(schema, graph.node(path.nodes.back()).type_name);
  if (expr.starts_with("the " + noun + " that ")) return "What is the name of " + expr + "?";
  return "Which " + noun + " is " + expr + "?";
}

namespace {

constexpr std::array<std::string_view, 6> kScenarios = {
    "I am putting together notes for a trivia evening.",
    "A colleague asked me this and I could not remember.",
    "While reading an old travel journal, a question came up.",
    "For a school report I need one specific fact.",
    "My friend and I disagree about something.",
    "I am checking a detail for a crossword clue.",
};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

Task verbalize_simple(const WorldSchema& schema, const KnowledgeGraph& graph, const ReasoningPath& path,
                      int template_family, std::uint64_t seed) {
  Verbalizer v{schema, graph};
  Task t;
  t.kind = TaskKind::Simple;
  t.mode = Composition::Simple;
  t.paths = {path};
  t.hops = path.hops();
  t.stage = stage_for(t.kind, t.hops);
  t.expression = v.expression(path);
  t.answer = v.answer(path);
  t.answer_type = v.answer_type(path);
  t.template_family = template_family;
  const auto plain = v.plain_question(path, t.expression);
  switch (template_family) {
    case 1:
      t.question = path.scalar_end() ? "Please find " + t.expression + "."
                                     : "Please identify " + t.expression + " and give its name.";
      break;
    case 2: {
      Rng rng(derive_seed(seed, "scenario"));
      t.question = std::string(kScenarios[rng.below(kScenarios.size())]) + " " + plain;
      break;
    }
    default:
      t.question = plain;
  }
  if (!concealed(graph, t)) throw Error("CONCEALMENT", "question reveals a hidden entity: " + t.question);
  return t;
}

Task compose_parallel(const WorldSchema& schema, const KnowledgeGraph& graph, const Task& t1, const Task& t2,
                      Composition mode, const std::optional<std::string>& attribute,
                      const std::string& direction) {
  if (t1.paths.size() != 1 || t2.paths.size() != 1)
    throw Error("INCOMPATIBLE", "parallel composition takes two single-path tasks");
  const auto& p1 = t1.paths.front();
  const auto& p2 = t2.paths.front();
  if (mode != Composition::Sum && mode != Composition::AbsDiff && mode != Composition::Compare)
    throw Error("INCOMPATIBLE", "not a parallel mode");
  if (t1.answer_type != t2.answer_type) throw Error("INCOMPATIBLE", "answer types differ");

  Task t;
  t.kind = TaskKind::Parallel;
  t.mode = mode;
  t.paths = {p1, p2};
  t.hops = t1.hops + t2.hops;
  t.stage = stage_for(t.kind, t.hops);
  t.template_family = t1.template_family;

  std::int64_t v1 = 0;
  std::int64_t v2 = 0;
  std::string x1;
  std::string x2;
  const AttributeSpec* spec = nullptr;
  if (attribute) {
    if (p1.scalar_end() || p2.scalar_end()) throw Error("INCOMPATIBLE", "attribute needs entity answers");
    const auto& n1 = graph.node(p1.nodes.back());
    const auto& n2 = graph.node(p2.nodes.back());
    if (n1.id == n2.id) throw Error("INCOMPATIBLE", "both paths end at the same entity");
    spec = schema.attribute(n1.type_name, *attribute);
    if (spec == nullptr || !is_numeric(*spec)) throw Error("INCOMPATIBLE", "attribute is not numeric");
    auto a1 = n1.scalar_attrs.find(*attribute);
    auto a2 = n2.scalar_attrs.find(*attribute);
    if (a1 == n1.scalar_attrs.end() || a2 == n2.scalar_attrs.end())
      throw Error("INCOMPATIBLE", "attribute missing on an end entity");
    v1 = *a1->second.number;
    v2 = *a2->second.number;
    t.compare_attribute = *attribute;
    x1 = mode == Composition::Compare ? t1.expression : "the " + spec->label_or_default() + " of " + t1.expression;
    x2 = mode == Composition::Compare ? t2.expression : "the " + spec->label_or_default() + " of " + t2.expression;
  } else {
    if (mode == Composition::Compare) throw Error("INCOMPATIBLE", "compare needs an attribute");
    if (!p1.scalar_end() || !p2.scalar_end() || !t1.answer_type.starts_with("number:"))
      throw Error("INCOMPATIBLE", "sum and difference need numeric answers");
    if (p1.nodes.back() == p2.nodes.back()) throw Error("INCOMPATIBLE", "both paths read the same entity");
    v1 = std::stoll(*p1.end_value);
    v2 = std::stoll(*p2.end_value);
    x1 = t1.expression;
    x2 = t2.expression;
  }

  switch (mode) {
    case Composition::Sum:
      t.question = "What is the sum of " + x1 + " and " + x2 + "?";
      t.answer = std::to_string(v1 + v2);
      t.answer_type = attribute ? "number:" + (spec->unit_or_empty().empty() ? spec->label_or_default()
                                                                             : spec->unit_or_empty())
                                : t1.answer_type;
      break;
    case Composition::AbsDiff:
      t.question = "What is the absolute difference between " + x1 + " and " + x2 + "?";
      t.answer = std::to_string(std::llabs(v1 - v2));
      t.answer_type = attribute ? "number:" + (spec->unit_or_empty().empty() ? spec->label_or_default()
                                                                             : spec->unit_or_empty())
                                : t1.answer_type;
      break;
    default: {
      if (v1 == v2) throw Error("COMPARE_TIE", "both values are " + std::to_string(v1));
      if (direction != "greater" && direction != "smaller") throw Error("INCOMPATIBLE", "bad direction");
      const bool greater = direction == "greater";
      t.direction = direction;
      const auto& end_type = graph.node(p1.nodes.back()).type_name;
      const bool year = spec->domain->type == DomainType::Year;
      if (year && end_type == "Person" && *attribute == "birth_year") {
        t.question = std::string(greater ? "Who is younger: " : "Who is older: ") + x1 + " or " + x2 + "?";
      } else {
        const char* adj = year ? (greater ? "later" : "earlier") : (greater ? "greater" : "smaller");
        t.question = "Which " + noun_of(schema, end_type) + " has the " + adj + " " + spec->label_or_default() +
                     ": " + x1 + " or " + x2 + "?";
      }
      t.question = capitalize(t.question);
      const bool first_wins = greater ? v1 > v2 : v1 < v2;
      t.answer = first_wins ? t1.answer : t2.answer;
      t.answer_type = end_type;
    }
  }
  if (!concealed(graph, t)) throw Error("CONCEALMENT", "question reveals a hidden entity: " + t.question);
  return t;
}

Task compose_combo(const WorldSchema& schema, const KnowledgeGraph& graph, const Task& t1, const Task& t2) {
  if (t1.paths.size() != 1 || t2.paths.size() != 1)
    throw Error("ANCHOR_MISMATCH", "combo composition takes two single-path tasks");
  const auto& p1 = t1.paths.front();
  const auto& p2 = t2.paths.front();
  if (p2.scalar_start()) {
    if (!p1.scalar_end() || *p2.start_value != t1.answer)
      throw Error("ANCHOR_MISMATCH", "second path does not start at the first answer");
  } else if (p1.scalar_end() || p2.nodes.front() != p1.nodes.back()) {
    throw Error("ANCHOR_MISMATCH", "second path does not start at the first answer");
  }
  Verbalizer v{schema, graph};
  Task t;
  t.kind = TaskKind::Combo;
  t.mode = Composition::Combo;
  t.paths = {p1, p2};
  t.hops = t1.hops + t2.hops;
  t.stage = stage_for(t.kind, t.hops);
  t.template_family = t1.template_family;
  const auto q1 = v.plain_question(p1, t1.expression);
  const auto q2 = v.plain_question(p2, v.expression(p2, true));
  t.question = "First question: " + q1 + " Second question: " + q2;
  t.answer = t2.answer;
  t.answer_type = t2.answer_type;
  if (!concealed(graph, t)) throw Error("CONCEALMENT", "question reveals a hidden entity: " + t.question);
  return t;
}

std::vector<std::string> hidden_names(const KnowledgeGraph& graph, const Task& task) {
  std::vector<std::string> out;
  for (std::size_t p = 0; p < task.paths.size(); ++p) {
    const auto& path = task.paths[p];
    // The first node is named in the question unless it is reached through
    // a literal or through the previous question of a combo.
    const bool named_start = !path.scalar_start() && !(task.kind == TaskKind::Combo && p > 0);
    for (std::size_t i = named_start ? 1 : 0; i < path.nodes.size(); ++i) {
      out.push_back(graph.node(path.nodes[i]).display_name);
    }
    if (path.end_value) out.push_back(*path.end_value);
    if (path.start_value && task.kind == TaskKind::Combo && p > 0) out.push_back(*path.start_value);
  }
  out.push_back(task.answer);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool concealed(const KnowledgeGraph& graph, const Task& task) {
  for (const auto& name : hidden_names(graph, task)) {
    if (contains_word(task.question, name)) return false;
  }
  return true;
}

namespace {

// Walks one path from its anchor using only step kinds and attribute names.
// The result is an entity id, or a literal when the path ends in one.
struct WalkResult {
  std::string value;
  bool entity = true;
};

std::optional<WalkResult> walk(const WorldSchema& schema, const KnowledgeGraph& g, const ReasoningPath& path,
                               const std::optional<WalkResult>& start) {
  std::string cur;
  std::size_t i = 0;
  if (path.scalar_start()) {
    const auto& s = path.steps.front();
    const std::string value = start ? start->value : path.anchor;
    std::vector<std::string> hits;
    for (auto idx : g.of_type(s.subject_type)) {
      const auto& n = g.node(idx);
      auto it = n.scalar_attrs.find(s.attribute);
      if (it != n.scalar_attrs.end() && it->second.text == value) hits.push_back(n.id);
    }
    if (hits.size() != 1) return std::nullopt;
    cur = hits.front();
    i = 1;
  } else if (start) {
    if (!start->entity) return std::nullopt;
    cur = start->value;
  } else {
    auto idx = g.find_by_name(path.anchor);
    if (!idx) return std::nullopt;
    cur = g.node(*idx).id;
  }
  for (; i < path.steps.size(); ++i) {
    const auto& s = path.steps[i];
    if (s.kind == StepKind::Forward) {
      if (g.node(cur).type_name != s.subject_type) return std::nullopt;
      auto t = g.targets(cur, s.attribute);
      if (t.size() != 1) return std::nullopt;
      cur = t.front();
    } else if (s.kind == StepKind::Reverse) {
      std::vector<std::string> src;
      for (const auto& id : g.sources(cur, s.attribute)) {
        if (g.node(id).type_name == s.subject_type) src.push_back(id);
      }
      if (src.size() != 1) return std::nullopt;
      cur = src.front();
    } else if (s.kind == StepKind::ScalarEnd) {
      const auto& n = g.node(cur);
      auto it = n.scalar_attrs.find(s.attribute);
      if (it == n.scalar_attrs.end() || i + 1 != path.steps.size()) return std::nullopt;
      return WalkResult{it->second.text, false};
    } else {
      return std::nullopt;
    }
  }
  (void)schema;
  return WalkResult{cur, true};
}

std::optional<std::int64_t> numeric_of(const KnowledgeGraph& g, const WalkResult& r,
                                       const std::optional<std::string>& attribute) {
  std::string text = r.value;
  if (attribute) {
    if (!r.entity) return std::nullopt;
    const auto& n = g.node(r.value);
    auto it = n.scalar_attrs.find(*attribute);
    if (it == n.scalar_attrs.end()) return std::nullopt;
    text = it->second.text;
  } else if (r.entity) {
    return std::nullopt;
  }
  try {
    return std::stoll(text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<std::string> evaluate_provenance(const WorldSchema& schema, const KnowledgeGraph& graph,
                                               const Task& task) {
  if (task.paths.empty()) return std::nullopt;
  auto render = [&](const WalkResult& r) { return r.entity ? graph.node(r.value).display_name : r.value; };
  try {
    switch (task.mode) {
      case Composition::Simple: {
        auto r = walk(schema, graph, task.paths[0], std::nullopt);
        if (!r) return std::nullopt;
        return render(*r);
      }
      case Composition::Combo: {
        if (task.paths.size() != 2) return std::nullopt;
        auto r1 = walk(schema, graph, task.paths[0], std::nullopt);
        if (!r1) return std::nullopt;
        auto r2 = walk(schema, graph, task.paths[1], r1);
        if (!r2) return std::nullopt;
        return render(*r2);
      }
      default: {
        if (task.paths.size() != 2) return std::nullopt;
        auto r1 = walk(schema, graph, task.paths[0], std::nullopt);
        auto r2 = walk(schema, graph, task.paths[1], std::nullopt);
        if (!r1 || !r2) return std::nullopt;
        auto v1 = numeric_of(graph, *r1, task.compare_attribute);
        auto v2 = numeric_of(graph, *r2, task.compare_attribute);
        if (!v1 || !v2) return std::nullopt;
        if (task.mode == Composition::Sum) return std::to_string(*v1 + *v2);
        if (task.mode == Composition::AbsDiff) return std::to_string(std::llabs(*v1 - *v2));
        if (*v1 == *v2) return std::nullopt;
        const bool greater = task.direction.value_or("greater") == "greater";
        return render((greater ? *v1 > *v2 : *v1 < *v2) ? *r1 : *r2);
      }
    }
  } catch (const Error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights) {
  const auto sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum == 0) return out;
  std::vector<std::pair<std::size_t, std::size_t>> rest;  // remainder numerator, index
  std::size_t given = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto scaled = static_cast<std::uint64_t>(total) * weights[i];
    out[i] = static_cast<std::size_t>(scaled / sum);
    rest.emplace_back(static_cast<std::size_t>(scaled % sum), i);
    given += out[i];
  }
  std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < total; ++k, ++given) ++out[rest[k].second];
  return out;
}

std::string hop_bucket(std::size_t hops) {
  if (hops <= 3) return "1-3";
  if (hops <= 6) return "4-6";
  return "7+";
}

std::optional<std::size_t> table_cell(TaskKind kind, std::size_t hops) {
  const std::size_t bucket = hops <= 3 ? 0 : hops <= 6 ? 1 : 2;
  switch (kind) {
    case TaskKind::Simple:
      if (bucket == 2) return std::nullopt;
      return bucket;
    case TaskKind::Parallel: return 2 + bucket;
    case TaskKind::Combo:
      if (bucket != 2) return std::nullopt;
      return 5;
  }
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 6> kCellNames = {"Simple 1-3",   "Simple 4-6",   "Parallel 1-3",
                                                        "Parallel 4-6", "Parallel 7+", "Combo 7+"};

class DatasetBuilder {
 public:
  DatasetBuilder(const WorldSchema& schema, const KnowledgeGraph& verified, const KnowledgeGraph& full,
                 std::uint64_t seed)
      : schema_(schema),
        graph_(verified),
        sampler_(schema, verified, full),
        rng_(derive_seed(seed, "dataset")),
        seed_(seed) {}

  std::optional<Task> simple(std::size_t hops) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      auto p = fresh(hops, {});
      if (!p) continue;
      try {
        auto t = verbalize_simple(schema_, graph_, *p, static_cast<int>(rng_.below(kTemplateFamilies)),
                                  derive_seed(seed_, p->signature()));
        claim(t);
        return t;
      } catch (const Error&) {
      }
    }
    return std::nullopt;
  }

  std::optional<Task> parallel(std::size_t hops) {
    if (hops < 2) return std::nullopt;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const auto h1 = static_cast<std::size_t>(rng_.between(1, static_cast<std::int64_t>(hops) - 1));
      const auto h2 = hops - h1;
      const auto mode = std::array{Composition::Sum, Composition::AbsDiff, Composition::Compare}[rng_.below(3)];
      const bool over_entity = mode == Composition::Compare || rng_.chance(0.3);

      PathConstraint c1;
      c1.end = over_entity ? PathConstraint::End::Entity : PathConstraint::End::Scalar;
      c1.numeric_end = !over_entity;
      auto p1 = fresh(h1, c1);
      if (!p1) continue;

      PathConstraint c2;
      c2.end = c1.end;
      c2.numeric_end = c1.numeric_end;
      c2.end_type = graph_.node(p1->nodes.back()).type_name;
      if (!over_entity) c2.end_attribute = p1->steps.back().attribute;
      c2.avoid.insert(p1->nodes.begin(), p1->nodes.end());
      auto p2 = fresh(h2, c2);
      if (!p2) continue;

      std::optional<std::string> attribute;
      if (over_entity) {
        const auto& n1 = graph_.node(p1->nodes.back());
        const auto& n2 = graph_.node(p2->nodes.back());
        std::vector<std::string> shared;
        for (const auto& a : schema_.find(n1.type_name)->attributes) {
          if (is_numeric(a) && n1.scalar_attrs.contains(a.name) && n2.scalar_attrs.contains(a.name))
            shared.push_back(a.name);
        }
        if (shared.empty()) continue;
        attribute = shared[rng_.below(shared.size())];
      }
      const std::string direction = rng_.chance(0.5) ? "greater" : "smaller";
      try {
        const int family = static_cast<int>(rng_.below(kTemplateFamilies));
        auto t1 = verbalize_simple(schema_, graph_, *p1, 0, 0);
        auto t2 = verbalize_simple(schema_, graph_, *p2, 0, 0);
        auto t = compose_parallel(schema_, graph_, t1, t2, mode, attribute, direction);
        t.template_family = family;
        claim(t);
        return t;
      } catch (const Error&) {
      }
    }
    return std::nullopt;
  }

  std::optional<Task> combo(std::size_t hops) {
    if (hops < 2) return std::nullopt;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const auto h1 = static_cast<std::size_t>(rng_.between(1, static_cast<std::int64_t>(hops) - 1));
      const auto h2 = hops - h1;
      PathConstraint c1;
      c1.end = PathConstraint::End::Entity;
      auto p1 = fresh(h1, c1);
      if (!p1) continue;
      PathConstraint c2;
      c2.start_id = p1->nodes.back();
      c2.allow_scalar_start = false;
      c2.avoid.insert(p1->nodes.begin(), p1->nodes.end() - 1);
      auto p2 = fresh(h2, c2);
      if (!p2) continue;
      try {
        auto t1 = verbalize_simple(schema_, graph_, *p1, 0, 0);
        auto t2 = verbalize_simple(schema_, graph_, *p2, 0, 0);
        auto t = compose_combo(schema_, graph_, t1, t2);
        claim(t);
        return t;
      } catch (const Error&) {
      }
    }
    return std::nullopt;
  }

 private:
  std::optional<ReasoningPath> fresh(std::size_t hops, const PathConstraint& c) {
    for (int i = 0; i < 8; ++i) {
      auto p = sampler_.sample(hops, c, rng_);
      if (!p) return std::nullopt;
      if (!used_.contains(p->signature())) return p;
    }
    return std::nullopt;
  }

  void claim(const Task& t) {
    for (const auto& p : t.paths) used_.insert(p.signature());
  }

  const WorldSchema& schema_;
  const KnowledgeGraph& graph_;
  PathSampler sampler_;
  Rng rng_;
  std::uint64_t seed_;
  std::set<std::string> used_;
};

}  // namespace

Dataset build_dataset(const WorldSchema& schema, const KnowledgeGraph& verified, const KnowledgeGraph& full,
                      const MixConfig& mix, std::uint64_t seed) {
  Dataset ds;
  const auto counts = apportion(mix.total, {mix.cells.begin(), mix.cells.end()});
  std::copy(counts.begin(), counts.end(), ds.requested.begin());

  const std::size_t top = std::max<std::size_t>(7, mix.max_hops);
  auto range = [](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> v;
    for (auto h = lo; h <= hi; ++h) v.push_back(h);
    return v;
  };
  const std::array<std::vector<std::size_t>, 6> hops = {
      range(1, 3), range(4, 6), range(2, 3), range(4, 6), range(7, top),
      range(std::max<std::size_t>(mix.combo_min_hops, 2), std::max(top, mix.combo_min_hops))};

  DatasetBuilder builder(schema, verified, full, seed);
  std::vector<Task> all;
  for (std::size_t cell = 0; cell < 6; ++cell) {
    for (std::size_t i = 0; i < counts[cell]; ++i) {
      const auto h = hops[cell][i % hops[cell].size()];
      std::optional<Task> t;
      if (cell < 2) t = builder.simple(h);
      else if (cell < 5) t = builder.parallel(h);
      else t = builder.combo(h);
      if (!t) {
        ++ds.shortfall[std::string(kCellNames[cell])];
        continue;
      }
      auto derived = evaluate_provenance(schema, verified, *t);
      if (!derived || *derived != t->answer)
        throw Error("UNSOLVABLE", "provenance does not reproduce the answer of: " + t->question);
      ++ds.realized[cell];
      all.push_back(std::move(*t));
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = "sg-" + to_hex(derive_seed(seed, "task:" + std::to_string(i)), 12);

  // Bench: a seeded subset of each kind, kept in generation order.
  std::vector<bool> in_bench(all.size(), false);
  Rng rng(derive_seed(seed, "bench"));
  for (auto kind : {TaskKind::Simple, TaskKind::Parallel, TaskKind::Combo}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].kind == kind) idx.push_back(i);
    }
    const auto want = mix.bench[static_cast<std::size_t>(kind)];
    rng.shuffle(idx);
    if (idx.size() < want) ds.shortfall["bench " + std::string(to_string(kind))] += want - idx.size();
    for (std::size_t k = 0; k < std::min(want, idx.size()); ++k) in_bench[idx[k]] = true;
  }
  for (std::size_t i = 0; i < all.size(); ++i) (in_bench[i] ? ds.bench : ds.train).push_back(std::move(all[i]));
  return ds;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::ordered_json path_to_json(const ReasoningPath& p) {
  nlohmann::ordered_json j;
  j["anchor"] = p.anchor;
  j["nodes"] = p.nodes;
  if (p.start_value) j["start_value"] = *p.start_value;
  if (p.end_value) j["end_value"] = *p.end_value;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : p.steps) {
    nlohmann::ordered_json js;
    js["kind"] = to_string(s.kind);
    js["attribute"] = s.attribute;
    js["subject_type"] = s.subject_type;
    if (s.edge) js["edge"] = {{"src", s.edge->source}, {"rel", s.edge->relation}, {"dst", s.edge->target}};
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

ReasoningPath path_from_json(const nlohmann::json& j) {
  ReasoningPath p;
  p.anchor = j.at("anchor").get<std::string>();
  p.nodes = j.at("nodes").get<std::vector<std::string>>();
  if (j.contains("start_value")) p.start_value = j["start_value"].get<std::string>();
  if (j.contains("end_value")) p.end_value = j["end_value"].get<std::string>();
  for (const auto& js : j.at("steps")) {
    PathStep s;
    s.kind = step_kind_from_string(js.at("kind").get<std::string>());
    s.attribute = js.at("attribute").get<std::string>();
    s.subject_type = js.at("subject_type").get<std::string>();
    if (js.contains("edge")) {
      const auto& e = js["edge"];
      s.edge = RelationEdge{e.at("src").get<std::string>(), e.at("rel").get<std::string>(),
                            e.at("dst").get<std::string>()};
    }
    p.steps.push_back(std::move(s));
  }
  return p;
}

}  // namespace

nlohmann::ordered_json task_to_json(const Task& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["kind"] = to_string(t.kind);
  j["question"] = t.question;
  j["answer"] = t.answer;
  j["answer_type"] = t.answer_type;
  j["hops"] = t.hops;
  j["stage"] = to_string(t.stage);
  nlohmann::ordered_json prov;
  prov["mode"] = to_string(t.mode);
  if (t.compare_attribute) prov["compare_attribute"] = *t.compare_attribute;
  if (t.direction) prov["direction"] = *t.direction;
  prov["template_family"] = t.template_family;
  prov["expression"] = t.expression;
  auto paths = nlohmann::ordered_json::array();
  for (const auto& p : t.paths) paths.push_back(path_to_json(p));
  prov["paths"] = std::move(paths);
  j["provenance"] = std::move(prov);
  return j;
}

Task task_from_json(const nlohmann::json& j) {
  try {
    Task t;
    t.id = j.at("id").get<std::string>();
    t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.question = j.at("question").get<std::string>();
    t.answer = j.at("answer").get<std::string>();
    t.answer_type = j.at("answer_type").get<std::string>();
    t.hops = j.at("hops").get<std::size_t>();
    t.stage = stage_from_string(j.at("stage").get<std::string>());
    const auto& prov = j.at("provenance");
    t.mode = composition_from_string(prov.at("mode").get<std::string>());
    if (prov.contains("compare_attribute")) t.compare_attribute = prov["compare_attribute"].get<std::string>();
    if (prov.contains("direction")) t.direction = prov["direction"].get<std::string>();
    t.template_family = prov.value("template_family", 0);
    t.expression = prov.value("expression", std::string{});
    for (const auto& p : prov.at("paths")) t.paths.push_back(path_from_json(p));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_ARTIFACT", std::string("task record: ") + e.what());
  }
}

std::string tasks_to_jsonl(const std::vector<Task>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    out += task_to_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<Task> tasks_from_jsonl(std::string_view text) {
  std::vector<Task> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(task_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("BAD_ARTIFACT", std::string("task line: ") + e.what());
    }
  }
  return out;
}

}  // namespace searchgym
