#include "searchgym/envsim.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "searchgym/rlmath.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

std::size_t max_turns_for(std::string_view profile) {
  if (profile == "train") return kTrainTurns;
  if (profile == "eval") return kEvalTurns;
  throw Error("BAD_PROFILE", "unknown profile " + std::string(profile));
}

std::string_view to_string(Action::Type t) {
  switch (t) {
    case Action::Type::Search: return "search";
    case Action::Type::Access: return "access";
    case Action::Type::Answer: return "answer";
  }
  return "search";
}

std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Active: return "Active";
    case EpisodeStatus::Answered: return "Answered";
    case EpisodeStatus::Exhausted: return "Exhausted";
  }
  return "Active";
}

namespace {

const char* payload_field(Action::Type t) {
  switch (t) {
    case Action::Type::Search: return "query";
    case Action::Type::Access: return "url";
    case Action::Type::Answer: return "text";
  }
  return "query";
}

}  // namespace

nlohmann::ordered_json action_to_json(const Action& a) {
  nlohmann::ordered_json j;
  j["type"] = to_string(a.type);
  j[payload_field(a.type)] = a.text;
  return j;
}

Action action_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw Error("BAD_REQUEST", "action needs a string \"type\"");
  const auto type = j["type"].get<std::string>();
  Action a;
  if (type == "search") a.type = Action::Type::Search;
  else if (type == "access") a.type = Action::Type::Access;
  else if (type == "answer") a.type = Action::Type::Answer;
  else throw Error("BAD_REQUEST", "unknown action type " + type);
  const char* field = payload_field(a.type);
  if (!j.contains(field) || !j[field].is_string())
    throw Error("BAD_REQUEST", std::string("action needs a string \"") + field + "\"");
  a.text = j[field].get<std::string>();
  return a;
}

nlohmann::ordered_json observation_to_json(const Observation& o) {
  nlohmann::ordered_json j;
  switch (o.kind) {
    case Observation::Kind::Hits: {
      j["kind"] = "hits";
      auto hits = nlohmann::ordered_json::array();
      for (const auto& h : o.hits) {
        hits.push_back({{"url", h.url}, {"title", h.title}, {"snippet", h.snippet}, {"score", h.score}});
      }
      j["hits"] = std::move(hits);
      break;
    }
    case Observation::Kind::Document:
      j["kind"] = "document";
      j["url"] = o.document->url;
      j["title"] = o.document->title;
      j["abstract"] = o.document->abstract;
      j["body"] = o.document->body;
      break;
    case Observation::Kind::NotFound:
      j["kind"] = "not_found";
      j["url"] = o.message;
      break;
    case Observation::Kind::Invalid:
      j["kind"] = "invalid_action";
      j["message"] = o.message;
      break;
    case Observation::Kind::Final:
      j["kind"] = "final";
      j["reward"] = *o.reward;
      break;
  }
  return j;
}

std::size_t EpisodeState::count(Action::Type t) const {
  std::size_t n = 0;
  for (const auto& [a, o] : history) n += a.type == t;
  return n;
}

nlohmann::ordered_json episode_to_json(const EpisodeState& s, bool with_history) {
  nlohmann::ordered_json j;
  j["episode_id"] = s.episode_id;
  j["task_id"] = s.task_id;
  j["turn"] = s.turn;
  j["max_turns"] = s.max_turns;
  j["status"] = to_string(s.status);
  if (s.terminal_reward) j["reward"] = *s.terminal_reward;
  if (with_history) {
    auto h = nlohmann::ordered_json::array();
    for (const auto& [a, o] : s.history) h.push_back({{"action", action_to_json(a)}, {"observation", observation_to_json(o)}});
    j["history"] = std::move(h);
  }
  return j;
}

nlohmann::ordered_json trajectory_record(const EpisodeState& s, const Task& task) {
  nlohmann::ordered_json j;
  j["episode_id"] = s.episode_id;
  j["task_id"] = s.task_id;
  j["kind"] = to_string(task.kind);
  j["hops"] = task.hops;
  j["answer"] = task.answer;
  j["prediction"] = s.prediction ? nlohmann::ordered_json(*s.prediction) : nlohmann::ordered_json(nullptr);
  j["reward"] = s.terminal_reward.value_or(0.0);
  j["status"] = to_string(s.status);
  j["turns"] = s.turn;
  j["max_turns"] = s.max_turns;
  j["searches"] = s.count(Action::Type::Search);
  j["accesses"] = s.count(Action::Type::Access);
  auto actions = nlohmann::ordered_json::array();
  for (const auto& [a, o] : s.history) actions.push_back(action_to_json(a));
  j["actions"] = std::move(actions);
  return j;
}

Environment::Environment(const WorldSchema& schema, const Corpus& corpus, const SearchIndex& index,
                         std::vector<Task> tasks)
    : schema_(schema), corpus_(corpus), index_(index), tasks_(std::move(tasks)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) by_id_.emplace(tasks_[i].id, i);
}

const Task* Environment::find_task(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &tasks_[it->second];
}

EpisodeState Environment::start_episode(const Task& task, std::size_t max_turns) {
  if (max_turns < 1) throw Error("BAD_TURNS", "max_turns must be at least 1");
  if (find_task(task.id) == nullptr) throw Error("UNKNOWN_TASK", "task " + task.id + " is not in the pool");
  EpisodeState s;
  s.episode_id = "ep-" + to_hex(next_episode_++, 8);
  s.task_id = task.id;
  s.max_turns = max_turns;
  return s;
}

EpisodeState Environment::start_episode(std::string_view task_id, std::size_t max_turns) {
  const auto* task = find_task(task_id);
  if (task == nullptr) throw Error("UNKNOWN_TASK", "task " + std::string(task_id) + " is not in the pool");
  return start_episode(*task, max_turns);
}

Observation Environment::step(EpisodeState& s, const Action& action) const {
  if (s.status != EpisodeStatus::Active)
    throw Error("EPISODE_FINISHED", "episode " + s.episode_id + " is " + std::string(to_string(s.status)));
  Observation obs;
  const bool blank = trim(action.text).empty();
  switch (action.type) {
    case Action::Type::Search:
      if (blank || query_terms(action.text).empty()) {
        obs.kind = Observation::Kind::Invalid;
        obs.message = "empty query";
      } else {
        obs.hits = search(index_, action.text, kDefaultTopK);
      }
      break;
    case Action::Type::Access:
      if (blank) {
        obs.kind = Observation::Kind::Invalid;
        obs.message = "empty url";
      } else if (const auto* doc = access(corpus_, action.text)) {
        obs.kind = Observation::Kind::Document;
        obs.document = *doc;
      } else {
        obs.kind = Observation::Kind::NotFound;
        obs.message = action.text;
      }
      break;
    case Action::Type::Answer:
      if (blank) {
        obs.kind = Observation::Kind::Invalid;
        obs.message = "empty answer";
      } else {
        const auto* task = find_task(s.task_id);
        if (task == nullptr) throw Error("UNKNOWN_TASK", "task " + s.task_id + " is not in the pool");
        obs.kind = Observation::Kind::Final;
        obs.reward = f1_reward(action.text, task->answer);
        s.status = EpisodeStatus::Answered;
        s.terminal_reward = obs.reward;
        s.prediction = action.text;
      }
      break;
  }
  ++s.turn;
  s.history.emplace_back(action, obs);
  if (s.status == EpisodeStatus::Active && s.turn >= s.max_turns) {
    s.status = EpisodeStatus::Exhausted;
    s.terminal_reward = 0.0;
  }
  return obs;
}

EpisodeState replay(Environment& env, const Task& task, const std::vector<Action>& actions,
                    std::size_t max_turns) {
  auto s = env.start_episode(task, max_turns);
  for (const auto& a : actions) {
    if (s.status != EpisodeStatus::Active) break;
    env.step(s, a);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Curriculum

void CurriculumConfig::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("BAD_CURRICULUM", "weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("BAD_CURRICULUM", "weights must sum to 1");
  if (!(long_horizon >= 0.0 && long_horizon <= 1.0))
    throw Error("BAD_CURRICULUM", "long_horizon must lie in [0, 1]");
}

CurriculumConfig curriculum_from_json(const nlohmann::json& j) {
  CurriculumConfig c;
  try {
    if (j.contains("stage")) c.stage = stage_from_string(j["stage"].get<std::string>());
    if (j.contains("weights")) {
      const auto w = j["weights"].get<std::vector<double>>();
      if (w.size() != 3) throw Error("BAD_CURRICULUM", "weights need three entries");
      std::copy(w.begin(), w.end(), c.weights.begin());
    }
    if (j.contains("long_horizon")) c.long_horizon = j["long_horizon"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("BAD_CURRICULUM", e.what());
  } catch (const Error& e) {
    throw Error("BAD_CURRICULUM", e.what());
  }
  c.validate();
  return c;
}

const Task& next_task(const CurriculumConfig& config, const std::vector<Task>& tasks, std::uint64_t seed,
                      std::uint64_t counter) {
  config.validate();
  Rng rng(derive_seed(seed, "curriculum:" + std::to_string(counter)));
  auto draw = [&](const std::vector<std::size_t>& pool) -> const Task& { return tasks[pool[rng.below(pool.size())]]; };

  if (config.stage == Stage::Stage1) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].kind == TaskKind::Simple && tasks[i].hops <= 6) pool.push_back(i);
    }
    if (pool.empty()) throw Error("EMPTY_POOL", "no Simple tasks with at most 6 hops");
    return draw(pool);
  }

  std::array<std::vector<std::size_t>, 3> short_pool;
  std::array<std::vector<std::size_t>, 3> long_pool;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto k = static_cast<std::size_t>(tasks[i].kind);
    (tasks[i].hops >= 6 ? long_pool : short_pool)[k].push_back(i);
  }
  // Kinds without tasks drop out of the mixture.
  std::array<double, 3> w{};
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!short_pool[k].empty() || !long_pool[k].empty()) w[k] = config.weights[k];
    total += w[k];
  }
  if (total <= 0.0) throw Error("EMPTY_POOL", "no tasks for the configured mixture");
  double u = rng.unit() * total;
  std::size_t kind = 0;
  for (; kind < 2; ++kind) {
    if (u < w[kind]) break;
    u -= w[kind];
  }
  while (w[kind] == 0.0) --kind;  // u landed on the upper edge
  const bool want_long = rng.chance(config.long_horizon);
  const auto& preferred = want_long ? long_pool[kind] : short_pool[kind];
  const auto& other = want_long ? short_pool[kind] : long_pool[kind];
  return draw(preferred.empty() ? other : preferred);
}

}  // namespace searchgym
