#include <gtest/gtest.h>

#include <map>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "searchgym/envsim.hpp"
#include "searchgym/rlmath.hpp"
#include "support/desk_world.hpp"

using namespace searchgym;

namespace {

Environment& desk_env() {
  static Environment env = [] {
    const auto& w = sgtest::desk_world();
    return Environment(w.schema, w.corpus, w.index, w.all_tasks());
  }();
  return env;
}

const Task& first_of(TaskKind kind) {
  for (const auto& t : desk_env().tasks()) {
    if (t.kind == kind) return t;
  }
  throw std::runtime_error("no task of that kind");
}

std::vector<Action> actions_of(const EpisodeState& s) {
  std::vector<Action> out;
  for (const auto& [a, o] : s.history) out.push_back(a);
  return out;
}

}  // namespace

TEST(Profiles, TurnLimits) {
  EXPECT_EQ(max_turns_for("train"), 16u);
  EXPECT_EQ(max_turns_for("eval"), 64u);
  try {
    max_turns_for("sprint");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "BAD_PROFILE");
  }
}

TEST(StartEpisode, FreshStateAndDistinctIds) {
  auto& env = desk_env();
  const auto& t = env.tasks().front();
  const auto a = env.start_episode(t, max_turns_for("train"));
  const auto b = env.start_episode(t.id, max_turns_for("eval"));
  EXPECT_NE(a.episode_id, b.episode_id);
  EXPECT_EQ(a.turn, 0u);
  EXPECT_TRUE(a.history.empty());
  EXPECT_EQ(a.status, EpisodeStatus::Active);
  EXPECT_FALSE(a.terminal_reward);
  EXPECT_EQ(a.max_turns, 16u);
  EXPECT_EQ(b.max_turns, 64u);
  EXPECT_THROW(env.start_episode("no-such-task", 16), Error);
  EXPECT_THROW(env.start_episode(t, 0), Error);
}

TEST(Step, SearchAccessAnswer) {
  auto& env = desk_env();
  const auto& t = first_of(TaskKind::Simple);
  auto s = env.start_episode(t, 64);
  const auto hits = env.step(s, Action::search(t.paths[0].anchor));
  EXPECT_EQ(hits.kind, Observation::Kind::Hits);
  EXPECT_FALSE(hits.hits.empty());
  EXPECT_LE(hits.hits.size(), 5u);
  const auto doc = env.step(s, Action::access(hits.hits[0].url));
  ASSERT_EQ(doc.kind, Observation::Kind::Document);
  EXPECT_EQ(doc.document->url, hits.hits[0].url);
  const auto missing = env.step(s, Action::access("https://searchgym.local/wiki/nowhere"));
  EXPECT_EQ(missing.kind, Observation::Kind::NotFound);
  EXPECT_EQ(s.turn, 3u);
  const auto fin = env.step(s, Action::answer(t.answer));
  EXPECT_EQ(fin.kind, Observation::Kind::Final);
  EXPECT_EQ(*fin.reward, 1.0);
  EXPECT_EQ(s.status, EpisodeStatus::Answered);
  EXPECT_EQ(s.terminal_reward, 1.0);
  EXPECT_EQ(s.turn, 4u);
  EXPECT_EQ(s.count(Action::Type::Search), 1u);
  EXPECT_EQ(s.count(Action::Type::Access), 2u);
  try {
    env.step(s, Action::search("more"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "EPISODE_FINISHED");
  }
}

TEST(Step, InvalidActionsConsumeATurn) {
  auto& env = desk_env();
  auto s = env.start_episode(env.tasks().front(), 16);
  EXPECT_EQ(env.step(s, Action::search("")).kind, Observation::Kind::Invalid);
  EXPECT_EQ(env.step(s, Action::search(" ,;! ")).kind, Observation::Kind::Invalid);
  EXPECT_EQ(env.step(s, Action::access("  ")).kind, Observation::Kind::Invalid);
  EXPECT_EQ(env.step(s, Action::answer("")).kind, Observation::Kind::Invalid);
  EXPECT_EQ(s.turn, 4u);
  EXPECT_EQ(s.status, EpisodeStatus::Active);
}

TEST(Step, ExhaustionGivesZero) {
  auto& env = desk_env();
  const auto& t = env.tasks().front();
  for (const std::size_t limit : {kTrainTurns, kEvalTurns}) {
    auto s = env.start_episode(t, limit);
    for (std::size_t i = 0; i + 1 < limit; ++i) {
      env.step(s, Action::search(t.answer));
      ASSERT_EQ(s.status, EpisodeStatus::Active);
      ASSERT_FALSE(s.terminal_reward);
    }
    env.step(s, Action::access(t.answer));
    EXPECT_EQ(s.status, EpisodeStatus::Exhausted);
    EXPECT_EQ(s.terminal_reward, 0.0);
    EXPECT_EQ(s.turn, limit);
    EXPECT_THROW(env.step(s, Action::answer(t.answer)), Error);
  }
  // An answer on the last turn still counts.
  auto s = env.start_episode(t, 1);
  env.step(s, Action::answer(t.answer));
  EXPECT_EQ(s.status, EpisodeStatus::Answered);
  EXPECT_EQ(s.terminal_reward, 1.0);
}

TEST(Step, PartialAnswerGetsF1) {
  auto& env = desk_env();
  for (const auto& t : env.tasks()) {
    if (normalize_answer(t.answer).size() != 2) continue;
    auto s = env.start_episode(t, 16);
    env.step(s, Action::answer(normalize_tokens(t.answer).front()));
    EXPECT_NEAR(*s.terminal_reward, 2.0 / 3.0, 1e-12);
    return;
  }
  GTEST_SKIP() << "no two-token answer in the pool";
}

TEST(ActionJson, WireForm) {
  for (const auto& a : {Action::search("alpha"), Action::access("https://x"), Action::answer("3946")}) {
    EXPECT_EQ(action_from_json(nlohmann::json::parse(action_to_json(a).dump())), a);
  }
  EXPECT_THROW(action_from_json(nlohmann::json::parse(R"({"type":"jump"})")), Error);
  EXPECT_THROW(action_from_json(nlohmann::json::parse(R"({"type":"search"})")), Error);
  EXPECT_THROW(action_from_json(nlohmann::json::parse(R"({"type":"search","query":3})")), Error);
  EXPECT_THROW(action_from_json(nlohmann::json::parse("[]")), Error);
  EXPECT_EQ(action_from_json(nlohmann::json::parse(R"({"type":"answer","text":""})")), Action::answer(""));
}

TEST(Replay, DeterministicOnRecordedTrajectories) {
  auto& env = desk_env();
  const auto& tasks = env.tasks();
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& t = tasks[(i * 7) % tasks.size()];
    const auto run = i % 2 == 0 ? oracle_solve(env, t) : random_agent(env, t, i, 16);
    const auto again = replay(env, t, actions_of(run.state), run.state.max_turns);
    ASSERT_EQ(again.history, run.state.history) << t.id;
    EXPECT_EQ(again.status, run.state.status);
    EXPECT_EQ(again.terminal_reward, run.state.terminal_reward);
    EXPECT_EQ(again.turn, run.state.turn);
    EXPECT_NE(again.episode_id, run.state.episode_id);
  }
}

TEST(EpisodeProperty, RewardRangeAndTurnAccounting) {
  auto& env = desk_env();
  const auto& tasks = env.tasks();
  for (std::size_t i = 0; i < 200; ++i) {
    const auto run = random_agent(env, tasks[i], 99, i % 2 == 0 ? kTrainTurns : 5);
    const auto& s = run.state;
    EXPECT_NE(s.status, EpisodeStatus::Active);
    ASSERT_TRUE(s.terminal_reward);
    EXPECT_GE(*s.terminal_reward, 0.0);
    EXPECT_LE(*s.terminal_reward, 1.0);
    EXPECT_EQ(s.turn, s.history.size());
    EXPECT_LE(s.turn, s.max_turns);
    if (s.status == EpisodeStatus::Exhausted) EXPECT_EQ(*s.terminal_reward, 0.0);
  }
}

TEST(Isolation, InterleavedEpisodesMatchSolo) {
  auto& env = desk_env();
  const auto& tasks = env.tasks();
  const std::size_t n = 8;
  std::vector<EpisodeState> solo;
  std::vector<std::vector<Action>> scripts;
  for (std::size_t i = 0; i < n; ++i) {
    const auto run = oracle_solve(env, tasks[i * 13]);
    scripts.push_back(actions_of(run.state));
    solo.push_back(run.state);
  }
  std::vector<EpisodeState> live;
  for (std::size_t i = 0; i < n; ++i) live.push_back(env.start_episode(tasks[i * 13], kEvalTurns));
  for (std::size_t step = 0;; ++step) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (step < scripts[i].size()) {
        env.step(live[i], scripts[i][step]);
        any = true;
      }
    }
    if (!any) break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(live[i].history, solo[i].history);
    EXPECT_EQ(live[i].terminal_reward, solo[i].terminal_reward);
  }
}

TEST(Isolation, ConcurrentThreads) {
  auto& env = desk_env();
  const auto& tasks = env.tasks();
  std::vector<AgentRun> serial;
  for (std::size_t i = 0; i < 16; ++i) serial.push_back(oracle_solve(env, tasks[i * 5]));
  std::vector<AgentRun> parallel(16);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < 16; ++i) {
    threads.emplace_back([&, i] { parallel[i] = oracle_solve(env, tasks[i * 5]); });
  }
  for (auto& th : threads) th.join();
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(parallel[i].state.history, serial[i].state.history);
    EXPECT_TRUE(ids.insert(parallel[i].state.episode_id).second);
  }
}

TEST(Curriculum, Stage1OnlyShortSimple) {
  const auto& tasks = desk_env().tasks();
  CurriculumConfig c;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto& t = next_task(c, tasks, 42, i);
    ASSERT_EQ(t.kind, TaskKind::Simple);
    ASSERT_LE(t.hops, 6u);
  }
  EXPECT_EQ(&next_task(c, tasks, 42, 17), &next_task(c, tasks, 42, 17));
}

TEST(Curriculum, Stage2MixtureProportions) {
  const auto& tasks = desk_env().tasks();
  CurriculumConfig c;
  c.stage = Stage::Stage2;
  c.weights = {0.4, 0.4, 0.2};
  std::map<TaskKind, double> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) counts[next_task(c, tasks, 7, static_cast<std::uint64_t>(i)).kind] += 1;
  EXPECT_NEAR(counts[TaskKind::Simple] / draws, 0.4, 0.02);
  EXPECT_NEAR(counts[TaskKind::Parallel] / draws, 0.4, 0.02);
  EXPECT_NEAR(counts[TaskKind::Combo] / draws, 0.2, 0.02);
}

TEST(Curriculum, SingleTaskPoolAndErrors) {
  const std::vector<Task> one = {first_of(TaskKind::Simple)};
  CurriculumConfig c;
  for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(next_task(c, one, 1, i).id, one[0].id);
  c.stage = Stage::Stage2;
  for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(next_task(c, one, 1, i).id, one[0].id);
  try {
    next_task(CurriculumConfig{}, std::vector<Task>{first_of(TaskKind::Combo)}, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "EMPTY_POOL");
  }
  c.weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(next_task(c, one, 1, 0), Error);
  EXPECT_THROW(curriculum_from_json(nlohmann::json::parse(R"({"weights":[1,0]})")), Error);
  EXPECT_THROW(curriculum_from_json(nlohmann::json::parse(R"({"stage":"Stage9"})")), Error);
  EXPECT_EQ(curriculum_from_json(nlohmann::json::parse(R"({"stage":"stage2","long_horizon":0.25})")).long_horizon, 0.25);
}

TEST(Oracle, SolvesEverySimpleTaskWithinBound) {
  auto& env = desk_env();
  std::size_t solved = 0;
  std::size_t total = 0;
  for (const auto& t : env.tasks()) {
    if (t.kind != TaskKind::Simple) continue;
    ++total;
    const auto run = oracle_solve(env, t);
    if (run.state.terminal_reward == 1.0) ++solved;
    else ADD_FAILURE() << t.id << ": " << t.question << " -> " << run.state.prediction.value_or("<none>");
    EXPECT_LE(run.state.turn, 2 * t.hops + 1) << t.id;
  }
  EXPECT_EQ(solved, total);
}

TEST(Oracle, CompositeTasks) {
  auto& env = desk_env();
  std::map<TaskKind, std::pair<std::size_t, std::size_t>> tally;
  for (const auto& t : env.tasks()) {
    if (t.kind == TaskKind::Simple) continue;
    const auto run = oracle_solve(env, t);
    auto& [ok, all] = tally[t.kind];
    ++all;
    if (run.state.terminal_reward == 1.0) ++ok;
    // Attribute comparisons read one extra document per branch.
    const std::size_t extra = t.compare_attribute ? 4 : 0;
    EXPECT_LE(run.state.turn, 2 * t.hops + 1 + extra) << t.id;
  }
  for (const auto& [kind, c] : tally) {
    EXPECT_GE(static_cast<double>(c.first) / static_cast<double>(c.second), 0.95) << to_string(kind);
  }
}

TEST(RandomAgent, FloorAndDeterminism) {
  auto& env = desk_env();
  const auto& tasks = env.tasks();
  double sum = 0.0;
  const std::size_t n = std::min<std::size_t>(500, tasks.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto run = random_agent(env, tasks[i], 3, kEvalTurns);
    sum += *run.state.terminal_reward;
  }
  EXPECT_LT(sum / static_cast<double>(n), 0.05);
  const auto a = random_agent(env, tasks[3], 8, 16);
  const auto b = random_agent(env, tasks[3], 8, 16);
  EXPECT_EQ(a.state.history, b.state.history);
}

TEST(Trajectory, RecordFields) {
  auto& env = desk_env();
  const auto& t = first_of(TaskKind::Parallel);
  const auto run = oracle_solve(env, t);
  const auto j = trajectory_record(run.state, t);
  EXPECT_EQ(j.at("task_id"), t.id);
  EXPECT_EQ(j.at("answer"), t.answer);
  EXPECT_EQ(j.at("status"), "Answered");
  EXPECT_EQ(j.at("actions").size(), run.state.history.size());
  EXPECT_EQ(j.at("searches").get<std::size_t>() + j.at("accesses").get<std::size_t>() + 1, run.state.turn);
  const auto e = episode_to_json(run.state);
  EXPECT_EQ(e.at("history").size(), run.state.turn);
  EXPECT_FALSE(episode_to_json(run.state, false).contains("history"));
}
