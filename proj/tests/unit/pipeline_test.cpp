#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "searchgym/pipeline.hpp"
#include "support/desk_world.hpp"

using namespace searchgym;

namespace {

PipelineConfig desk_config(const std::filesystem::path& root, unsigned threads) {
  PipelineConfig c;
  c.root = root;
  c.threads = threads;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "none";
}

}  // namespace

TEST(Pipeline, DeskRunIsCleanAndDeterministic) {
  const sgtest::TempDir a("pipeline-a");
  const sgtest::TempDir b("pipeline-b");
  const auto ra = run_pipeline(desk_config(a.path(), 1));
  const auto rb = run_pipeline(desk_config(b.path(), 4));
  ASSERT_EQ(ra.at("failures"), 0) << ra.dump(2);
  ASSERT_EQ(rb.at("failures"), 0) << rb.dump(2);
  for (const auto* file : {"world.jsonl", "corpus.jsonl", "index.bin", "verified.jsonl", "tasks.jsonl", "bench.jsonl"}) {
    const auto x = slurp(a.path() / file);
    EXPECT_FALSE(x.empty() && std::string(file) != "bench.jsonl") << file;
    EXPECT_EQ(x, slurp(b.path() / file)) << file;
  }
  const auto& stages = ra.at("stages");
  ASSERT_EQ(stages.size(), 6u);
  EXPECT_EQ(stages[0].at("violations"), 0);
  EXPECT_EQ(stages[1].at("fact_coverage"), 1.0);
  EXPECT_GE(stages[3].at("retention").get<double>(), 0.95);
  EXPECT_EQ(stages[4].at("train"), 1000);
  EXPECT_TRUE(std::filesystem::exists(a.path() / "report.json"));

  // The files agree with the in-memory desk world built by the test support.
  const auto& w = sgtest::desk_world();
  EXPECT_EQ(slurp(a.path() / "world.jsonl"), graph_to_jsonl(w.graph));
  EXPECT_EQ(slurp(a.path() / "tasks.jsonl"), tasks_to_jsonl(w.dataset.train));

  EvalOptions o;
  o.limit = 25;
  o.out = a.path() / "eval";
  const auto metrics = run_eval(desk_config(a.path(), 1), o);
  EXPECT_EQ(metrics.at("episodes"), 25);
  EXPECT_EQ(metrics.at("pass@1"), 1.0);
  EXPECT_TRUE(std::filesystem::exists(a.path() / "eval" / "metrics.json"));
  EXPECT_EQ(split_lines(slurp(a.path() / "eval" / "trajectories.jsonl")).size(), 25u);

  o.agent = "random";
  EXPECT_LT(run_eval(desk_config(a.path(), 1), o).at("mean_reward").get<double>(), 0.2);
  o.agent = "psychic";
  EXPECT_EQ(error_code([&] { run_eval(desk_config(a.path(), 1), o); }), "BAD_CONFIG");
}

TEST(Pipeline, StageNeedsUpstreamArtifact) {
  const sgtest::TempDir dir("pipeline-missing");
  const auto r = run_stage("build-index", desk_config(dir.path(), 1));
  EXPECT_EQ(r.at("status"), "failed");
  EXPECT_EQ(r.at("code"), "MISSING_ARTIFACT");
  EXPECT_NE(r.at("message").get<std::string>().find("corpus.jsonl"), std::string::npos);
  EXPECT_EQ(run_stage("warp", desk_config(dir.path(), 1)).at("code"), "UNKNOWN_STAGE");
}

TEST(Pipeline, RemoteAgentProtocol) {
  const auto& w = sgtest::desk_world();
  std::vector<Task> tasks(w.dataset.train.begin(), w.dataset.train.begin() + 3);
  Environment env(w.schema, w.corpus, w.index, tasks);

  httplib::Server agent;
  std::vector<nlohmann::json> seen;
  std::mutex m;
  agent.Post("/policy/act", [&](const httplib::Request& req, httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body);
    std::lock_guard lock(m);
    seen.push_back(j);
    const auto turn = j.at("turn").get<int>();
    nlohmann::json a = turn == 0   ? nlohmann::json{{"type", "search"}, {"query", "city"}}
                       : turn == 1 ? nlohmann::json{{"type", "fly"}}
                                   : nlohmann::json{{"type", "answer"}, {"text", "nobody"}};
    res.set_content(a.dump(), "application/json");
  });
  const int port = agent.bind_to_any_port("127.0.0.1");
  std::thread th([&] { agent.listen_after_bind(); });
  agent.wait_until_ready();

  const auto run = remote_agent(env, tasks[0], "http://127.0.0.1:" + std::to_string(port) + "/policy/", 16);
  agent.stop();
  th.join();
  EXPECT_EQ(run.state.status, EpisodeStatus::Answered);
  EXPECT_EQ(run.state.turn, 3u);
  EXPECT_EQ(run.state.history[1].second.kind, Observation::Kind::Invalid);
  EXPECT_EQ(run.diagnostics.size(), 1u);
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(seen[0].at("question"), tasks[0].question);
  EXPECT_TRUE(seen[0].at("observation").is_null());
  EXPECT_EQ(seen[1].at("observation").at("kind"), "hits");
  EXPECT_EQ(seen[2].at("max_turns"), 16);

  EXPECT_EQ(error_code([&] { remote_agent(env, tasks[0], "http://127.0.0.1:1", 4); }), "REMOTE_UNREACHABLE");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::parse(R"({"sead":1})")); }), "BAD_CONFIG");
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::parse(R"({"mix":{"totl":5}})")); }), "BAD_CONFIG");
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::parse(R"({"serve":{"profile":"sprint"}})")); }),
            "BAD_PROFILE");
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::parse(R"({"templates":9})")); }), "BAD_CONFIG");
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::parse(R"({"seed":"x"})")); }), "BAD_CONFIG");

  const auto c = config_from_json(nlohmann::json::parse(
      R"({"seed":7,"nodes":600,"mix":{"total":50,"bench":[1,2,3]},"serve":{"port":9000,"profile":"train"}})"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.nodes, 600u);
  EXPECT_EQ(c.mix.total, 50u);
  EXPECT_EQ(c.mix.bench, (std::array<std::size_t, 3>{1, 2, 3}));
  EXPECT_EQ(c.port, 9000);
  const auto back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, HomeOverridesRoot) {
  const sgtest::TempDir dir("config-home");
  const auto file = dir.path() / "config.json";
  write_file_atomic(file, R"({"root":"elsewhere","seed":3})");
  ::unsetenv("SEARCHGYM_HOME");
  EXPECT_EQ(load_config(file).root, "elsewhere");
  ::setenv("SEARCHGYM_HOME", "/srv/searchgym", 1);
  const auto c = load_config(file);
  ::unsetenv("SEARCHGYM_HOME");
  EXPECT_EQ(c.root, "/srv/searchgym");
  EXPECT_EQ(c.seed, 3u);
  write_file_atomic(file, "[1]");
  EXPECT_EQ(error_code([&] { load_config(file); }), "BAD_CONFIG");
  EXPECT_EQ(error_code([&] { load_config(dir.path() / "absent.json"); }), "MISSING_ARTIFACT");
}

TEST(Counts, ScaledDefaults) {
  PipelineConfig c;
  EXPECT_EQ(effective_counts(c), scaled_counts(300));
  c.counts = {{"Person", 10}, {"City", 4}};
  EXPECT_EQ(effective_counts(c), c.counts);
}
