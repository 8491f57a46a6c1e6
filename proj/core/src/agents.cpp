#include <cstdlib>

#include <spdlog/spdlog.h>

#include "searchgym/envsim.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

namespace {

class Oracle {
 public:
  Oracle(Environment& env, EpisodeState& state, std::vector<std::string>& diagnostics)
      : env_(env), s_(state), diag_(diagnostics) {}

  struct Value {
    std::string text;
    bool entity = true;
  };

  std::optional<Value> solve(const ReasoningPath& path, const std::optional<Value>& start) {
    std::string cur;
    std::size_t i = 0;
    if (path.scalar_start()) {
      const auto& st = path.steps.front();
      auto found = find_by_scalar(st, start ? start->text : path.anchor);
      if (!found) return std::nullopt;
      cur = *found;
      i = 1;
    } else {
      cur = start ? start->text : path.anchor;
    }
    for (; i < path.steps.size(); ++i) {
      const auto& st = path.steps[i];
      const auto* spec = env_.schema().attribute(st.subject_type, st.attribute);
      if (spec == nullptr) return fail("unknown attribute " + st.attribute);
      const auto phrase = spec->phrase_or_default();
      const auto* doc = fetch(cur, phrase);
      if (doc == nullptr) return std::nullopt;
      std::optional<std::string> next;
      switch (st.kind) {
        case StepKind::Forward: next = object_after(doc->body, cur, phrase); break;
        case StepKind::Reverse: next = subject_before(doc->body, phrase, cur); break;
        case StepKind::ScalarEnd: {
          next = object_after(doc->body, cur, phrase);
          if (next) next = strip_unit(*next, spec->unit_or_empty());
          if (!next) return fail("no '" + phrase + "' sentence for " + cur);
          return Value{*next, false};
        }
        case StepKind::ScalarStart: return fail("scalar start in the middle of a path");
      }
      if (!next) return fail("no '" + phrase + "' sentence linking " + cur);
      cur = *next;
    }
    return Value{cur, true};
  }

  /// Reads a numeric attribute of an entity from its own document.
  std::optional<std::string> read_attribute(const std::string& name, const std::string& type,
                                            const std::string& attribute) {
    const auto* spec = env_.schema().attribute(type, attribute);
    if (spec == nullptr) return fail("unknown attribute " + attribute);
    const auto phrase = spec->phrase_or_default();
    const auto* doc = fetch(name, phrase);
    if (doc == nullptr) return std::nullopt;
    auto v = object_after(doc->body, name, phrase);
    if (v) v = strip_unit(*v, spec->unit_or_empty());
    if (!v) fail("no '" + phrase + "' sentence for " + name);
    return v;
  }

  std::string end_type(const ReasoningPath& path) const {
    const auto& st = path.steps.back();
    if (st.kind == StepKind::Reverse) return st.subject_type;
    const auto* spec = env_.schema().attribute(st.subject_type, st.attribute);
    return spec && spec->target_type ? *spec->target_type : st.subject_type;
  }

  bool active() const { return s_.status == EpisodeStatus::Active; }

  void answer(const std::string& text) {
    if (active()) env_.step(s_, Action::answer(text.empty() ? "unknown" : text));
  }

 private:
  std::nullopt_t fail(const std::string& why) {
    diag_.push_back(why);
    return std::nullopt;
  }

  std::optional<Observation> act(Action a) {
    // Keep the last turn for the answer.
    if (!active() || s_.turn + 1 >= s_.max_turns) {
      fail("turn budget exhausted");
      return std::nullopt;
    }
    return env_.step(s_, a);
  }

  // The held document, or Search + Access for the entity titled `name`.
  const Document* fetch(const std::string& name, const std::string& hint) {
    if (held_ && held_->title == name) return &*held_;
    for (const auto& q : {name + " " + hint, name}) {
      auto obs = act(Action::search(q));
      if (!obs) return nullptr;
      for (const auto& h : obs->hits) {
        if (h.title != name) continue;
        auto doc = act(Action::access(h.url));
        if (!doc || doc->kind != Observation::Kind::Document) return nullptr;
        held_ = std::move(doc->document);
        return &*held_;
      }
    }
    fail("no search hit titled " + name);
    return nullptr;
  }

  std::optional<std::string> find_by_scalar(const PathStep& st, const std::string& value) {
    const auto* spec = env_.schema().attribute(st.subject_type, st.attribute);
    if (spec == nullptr) return fail("unknown attribute " + st.attribute);
    const auto phrase = spec->phrase_or_default();
    const auto unit = spec->unit_or_empty();
    const auto literal = unit.empty() ? value : value + " " + unit;
    auto obs = act(Action::search(phrase + " " + literal));
    if (!obs) return std::nullopt;
    for (const auto& h : obs->hits) {
      auto doc = act(Action::access(h.url));
      if (!doc) return std::nullopt;
      if (doc->kind != Observation::Kind::Document) continue;
      const auto& d = *doc->document;
      auto v = object_after(d.body, d.title, phrase);
      if (v && strip_unit(*v, unit) == value) {
        held_ = d;
        return d.title;
      }
    }
    return fail("no document states '" + phrase + " " + literal + "'");
  }

  static bool boundary_before(std::string_view text, std::size_t pos) {
    if (pos == 0) return true;
    const char c = text[pos - 1];
    return c == ' ' || c == '\n' || c == '>';
  }

  // "S phrase Y," -> Y
  static std::optional<std::string> object_after(std::string_view body, const std::string& subject,
                                                 const std::string& phrase) {
    const auto needle = subject + " " + phrase + " ";
    for (auto pos = body.find(needle); pos != std::string_view::npos; pos = body.find(needle, pos + 1)) {
      if (!boundary_before(body, pos)) continue;
      const auto begin = pos + needle.size();
      const auto end = body.find_first_of(",.", begin);
      if (end == std::string_view::npos) continue;
      return std::string(body.substr(begin, end - begin));
    }
    return std::nullopt;
  }

  // "..., Y phrase O." -> Y
  static std::optional<std::string> subject_before(std::string_view body, const std::string& phrase,
                                                   const std::string& object) {
    const auto needle = " " + phrase + " " + object;
    for (auto pos = body.find(needle); pos != std::string_view::npos; pos = body.find(needle, pos + 1)) {
      const auto after = pos + needle.size();
      if (after >= body.size() || (body[after] != '.' && body[after] != ',')) continue;
      std::size_t begin = pos;
      while (begin > 0) {
        const char c = body[begin - 1];
        if (c == '\n' || c == '>') break;
        if (c == ' ' && begin >= 2 && (body[begin - 2] == ',' || body[begin - 2] == '.')) break;
        --begin;
      }
      if (begin == pos) continue;
      return std::string(body.substr(begin, pos - begin));
    }
    return std::nullopt;
  }

  static std::optional<std::string> strip_unit(const std::string& text, const std::string& unit) {
    if (unit.empty()) return text;
    const auto suffix = " " + unit;
    if (text.size() <= suffix.size() || !text.ends_with(suffix)) return std::nullopt;
    return text.substr(0, text.size() - suffix.size());
  }

  Environment& env_;
  EpisodeState& s_;
  std::vector<std::string>& diag_;
  std::optional<Document> held_;
};

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const auto v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

AgentRun oracle_solve(Environment& env, const Task& task, std::size_t max_turns) {
  AgentRun run{env.start_episode(task, max_turns), {}};
  Oracle oracle(env, run.state, run.diagnostics);
  std::string answer;

  if (task.paths.empty()) {
    run.diagnostics.push_back("task has no provenance");
  } else if (task.kind == TaskKind::Simple) {
    if (auto v = oracle.solve(task.paths[0], std::nullopt)) answer = v->text;
  } else if (task.kind == TaskKind::Combo && task.paths.size() == 2) {
    if (auto first = oracle.solve(task.paths[0], std::nullopt)) {
      if (auto v = oracle.solve(task.paths[1], first)) answer = v->text;
    }
  } else if (task.paths.size() == 2) {
    auto a = oracle.solve(task.paths[0], std::nullopt);
    auto b = oracle.solve(task.paths[1], std::nullopt);
    std::optional<std::string> va;
    std::optional<std::string> vb;
    if (a && b) {
      if (task.compare_attribute) {
        va = oracle.read_attribute(a->text, oracle.end_type(task.paths[0]), *task.compare_attribute);
        vb = oracle.read_attribute(b->text, oracle.end_type(task.paths[1]), *task.compare_attribute);
      } else {
        va = a->text;
        vb = b->text;
      }
    }
    const auto x = va ? parse_int(*va) : std::nullopt;
    const auto y = vb ? parse_int(*vb) : std::nullopt;
    if (x && y) {
      switch (task.mode) {
        case Composition::Sum: answer = std::to_string(*x + *y); break;
        case Composition::AbsDiff: answer = std::to_string(std::llabs(*x - *y)); break;
        case Composition::Compare: {
          const bool greater = task.direction.value_or("greater") == "greater";
          answer = (greater ? *x > *y : *x < *y) ? a->text : b->text;
          break;
        }
        default: run.diagnostics.push_back("unsupported parallel mode");
      }
    } else {
      run.diagnostics.push_back("could not read both parallel values");
    }
  } else {
    run.diagnostics.push_back("malformed provenance");
  }

  oracle.answer(answer);
  for (const auto& d : run.diagnostics) spdlog::debug("oracle {}: {}", task.id, d);
  return run;
}

AgentRun random_agent(Environment& env, const Task& task, std::uint64_t seed, std::size_t max_turns) {
  AgentRun run{env.start_episode(task, max_turns), {}};
  auto& s = run.state;
  Rng rng(derive_seed(seed, "random-agent:" + task.id));
  const auto& index = env.index();
  const auto& vocab = index.vocabulary();
  std::vector<SearchHit> last;

  while (s.status == EpisodeStatus::Active && s.turn + 1 < s.max_turns) {
    if (!last.empty() && rng.chance(0.4)) {
      env.step(s, Action::access(last[rng.below(last.size())].url));
    } else if (rng.chance(0.2)) {
      env.step(s, Action::access(index.document(rng.below(index.document_count())).url));
    } else {
      std::string q = vocab[rng.below(vocab.size())] + " " + vocab[rng.below(vocab.size())];
      auto obs = env.step(s, Action::search(q));
      if (!obs.hits.empty()) last = obs.hits;
    }
  }
  if (s.status == EpisodeStatus::Active) {
    std::vector<std::string> pool;
    for (const auto& h : last) {
      for (auto& t : tokenize(h.snippet)) pool.push_back(std::move(t));
    }
    const auto& guess = pool.empty() ? vocab[rng.below(vocab.size())] : pool[rng.below(pool.size())];
    env.step(s, Action::answer(guess));
  }
  return run;
}

}  // namespace searchgym
