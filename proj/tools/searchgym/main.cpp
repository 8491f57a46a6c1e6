#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "searchgym/pipeline.hpp"
#include "searchgym/server.hpp"

using namespace searchgym;

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> root;
  std::optional<std::size_t> nodes;
  std::optional<unsigned> threads;
  std::optional<std::size_t> tasks;
  bool verbose = false;
};

PipelineConfig resolve(const Overrides& o) {
  auto c = load_config(o.config ? std::optional<std::filesystem::path>(*o.config) : std::nullopt);
  if (o.seed) c.seed = *o.seed;
  if (o.root) c.root = *o.root;
  if (o.nodes) c.nodes = *o.nodes;
  if (o.threads) c.threads = *o.threads;
  if (o.tasks) c.mix.total = *o.tasks;
  return c;
}

int emit(const nlohmann::ordered_json& report) {
  std::cout << report.dump(2) << '\n';
  if (report.contains("failures")) return report["failures"].get<std::size_t>() == 0 ? 0 : 1;
  if (report.contains("status")) return report["status"] == "ok" ? 0 : 1;
  return 0;
}

EnvServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"searchgym: synthetic search environments for multi-hop agents"};
  app.require_subcommand(1);
  spdlog::set_pattern("[%l] %v");

  Overrides o;
  app.add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "root seed");
  app.add_option("--root", o.root, "artifact directory (SEARCHGYM_HOME also sets it)");
  app.add_option("--nodes", o.nodes, "world size");
  app.add_option("--threads", o.threads, "verification threads");
  app.add_option("--tasks", o.tasks, "number of tasks to synthesize");
  app.add_flag("-v,--verbose", o.verbose, "debug logging");

  for (const char* stage : {"gen-world", "build-corpus", "build-index", "verify-edges", "gen-tasks", "stats"}) {
    app.add_subcommand(stage, std::string("run the ") + stage + " stage");
  }
  auto* run = app.add_subcommand("run", "run every stage in order");

  auto* serve = app.add_subcommand("serve", "serve episodes over HTTP");
  std::optional<int> port;
  std::optional<std::string> host;
  std::optional<std::string> serve_profile;
  std::optional<std::string> log_path;
  std::string task_file = "tasks";
  serve->add_option("--port", port, "listen port");
  serve->add_option("--host", host, "listen address");
  serve->add_option("--profile", serve_profile, "default profile: train or eval");
  serve->add_option("--log", log_path, "trajectory log (JSONL)");
  serve->add_option("--pool", task_file, "task pool: tasks, bench or a file path");

  auto* eval = app.add_subcommand("eval", "run an agent over a task file");
  EvalOptions eo;
  std::optional<std::string> dataset;
  std::optional<std::string> eval_profile;
  eval->add_option("--agent", eo.agent, "oracle, random or remote")->check(CLI::IsMember({"oracle", "random", "remote"}));
  eval->add_option("--dataset", dataset, "task file (default: bench)");
  eval->add_option("--remote-url", eo.remote_url, "remote agent base url");
  eval->add_option("--limit", eo.limit, "evaluate at most this many tasks");
  eval->add_option("--out", eo.out, "output directory");
  eval->add_option("--profile", eval_profile, "train or eval");

  CLI11_PARSE(app, argc, argv);
  if (o.verbose) spdlog::set_level(spdlog::level::debug);

  try {
    auto config = resolve(o);
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    if (sub == run) return emit(run_pipeline(config));

    if (sub == serve) {
      if (port) config.port = *port;
      if (host) config.host = *host;
      if (serve_profile) config.profile = *serve_profile;
      const auto schema = load_schema(config);
      const auto corpus = corpus_from_jsonl(read_file(config.corpus()));
      const auto index = SearchIndex::deserialize(read_file(config.index()));
      const std::filesystem::path pool = task_file == "tasks"   ? config.tasks()
                                         : task_file == "bench" ? config.bench()
                                                                : std::filesystem::path(task_file);
      Environment env(schema, corpus, index, tasks_from_jsonl(read_file(pool)));
      ServerOptions so;
      so.host = config.host;
      so.port = config.port;
      so.default_profile = config.profile;
      so.seed = derive_seed(config.seed, "serve");
      if (log_path) so.trajectory_log = *log_path;
      EnvServer server(env, so);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (sub == eval) {
      if (eval_profile) config.profile = *eval_profile;
      if (dataset) eo.dataset = *dataset;
      return emit(run_eval(config, eo));
    }

    nlohmann::ordered_json report;
    auto r = run_stage(name, config);
    const bool failed = r["status"] == "failed";
    report["stages"] = nlohmann::ordered_json::array({r});
    report["failures"] = failed ? 1 : 0;
    return emit(report);
  } catch (const Error& e) {
    spdlog::error("{}: {}", e.code(), e.what());
    nlohmann::ordered_json report;
    report["failures"] = 1;
    report["error"] = {{"code", e.code()}, {"message", e.what()}};
    std::cout << report.dump(2) << '\n';
    return 1;
  }
}
