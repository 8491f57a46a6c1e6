#include "searchgym/server.hpp"

#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace searchgym {

namespace {

struct Slot {
  std::mutex mutex;
  EpisodeState state;
  const Task* task = nullptr;
};

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  send_json(res, status, j);
}

}  // namespace

struct EnvServer::Impl {
  Environment& env;
  ServerOptions options;
  httplib::Server http;
  std::thread worker;
  int bound_port = 0;

  std::shared_mutex episodes_mutex;
  std::unordered_map<std::string, std::shared_ptr<Slot>> episodes;
  std::atomic<std::uint64_t> draws{0};

  std::mutex log_mutex;
  std::ofstream log;

  Impl(Environment& e, ServerOptions o) : env(e), options(std::move(o)) {
    if (options.trajectory_log) {
      log.open(*options.trajectory_log, std::ios::app | std::ios::binary);
      if (!log) throw Error("MISSING_ARTIFACT", "cannot open " + options.trajectory_log->string());
    }
    http.set_keep_alive_max_count(1000);
    // httplib's default also sets SO_REUSEPORT, which lets a second server share the port.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    http.new_task_queue = [n = options.threads] { return new httplib::ThreadPool(static_cast<std::size_t>(n)); };
    routes();
  }

  std::shared_ptr<Slot> find(const std::string& id) {
    std::shared_lock lock(episodes_mutex);
    auto it = episodes.find(id);
    return it == episodes.end() ? nullptr : it->second;
  }

  void record(const EpisodeState& s, const Task& task) {
    if (!log.is_open()) return;
    const auto line = trajectory_record(s, task).dump();
    std::lock_guard lock(log_mutex);
    log << line << '\n';
    log.flush();
  }

  void routes() {
    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::ordered_json j;
      j["status"] = "ok";
      j["corpus_docs"] = env.corpus().size();
      send_json(res, 200, j);
    });

    http.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::object();
      if (!trim(req.body).empty()) {
        body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "BAD_REQUEST", "body must be a JSON object");
      }
      try {
        const auto profile = body.value("profile", options.default_profile);
        const auto max_turns = max_turns_for(profile);
        const Task* task = nullptr;
        if (body.contains("task_id")) {
          if (!body["task_id"].is_string()) return send_error(res, 400, "BAD_REQUEST", "task_id must be a string");
          task = env.find_task(body["task_id"].get<std::string>());
          if (task == nullptr) return send_error(res, 404, "UNKNOWN_TASK", "no task " + body["task_id"].get<std::string>());
        } else {
          CurriculumConfig c;
          if (body.contains("curriculum")) c = curriculum_from_json(body["curriculum"]);
          task = &next_task(c, env.tasks(), options.seed, draws++);
        }
        auto slot = std::make_shared<Slot>();
        slot->state = env.start_episode(*task, max_turns);
        slot->task = task;
        nlohmann::ordered_json j;
        j["episode_id"] = slot->state.episode_id;
        j["task_id"] = task->id;
        j["question"] = task->question;
        j["max_turns"] = max_turns;
        {
          std::unique_lock lock(episodes_mutex);
          episodes.emplace(slot->state.episode_id, slot);
        }
        send_json(res, 201, j);
      } catch (const Error& e) {
        const int status = e.code() == "EMPTY_POOL" ? 409 : 400;
        send_error(res, status, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "BAD_REQUEST", e.what());
      }
    });

    http.Post(R"(/episodes/([^/]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      auto slot = find(id);
      if (!slot) return send_error(res, 404, "EPISODE_NOT_FOUND", "no episode " + id);
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) return send_error(res, 400, "BAD_REQUEST", "body is not JSON");
      Action action;
      try {
        action = action_from_json(body);
      } catch (const Error& e) {
        return send_error(res, 400, e.code(), e.what());
      }
      std::lock_guard lock(slot->mutex);
      if (slot->state.status != EpisodeStatus::Active)
        return send_error(res, 409, "EPISODE_FINISHED", "episode " + id + " is no longer active");
      const auto obs = env.step(slot->state, action);
      nlohmann::ordered_json j;
      j["observation"] = observation_to_json(obs);
      j["turn"] = slot->state.turn;
      j["status"] = to_string(slot->state.status);
      if (slot->state.terminal_reward) j["reward"] = *slot->state.terminal_reward;
      if (slot->state.status != EpisodeStatus::Active) record(slot->state, *slot->task);
      send_json(res, 200, j);
    });

    http.Get(R"(/episodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      auto slot = find(id);
      if (!slot) return send_error(res, 404, "EPISODE_NOT_FOUND", "no episode " + id);
      std::lock_guard lock(slot->mutex);
      auto j = episode_to_json(slot->state);
      j["question"] = slot->task->question;
      send_json(res, 200, j);
    });

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        spdlog::error("request failed: {}", e.what());
        send_error(res, 500, "INTERNAL", e.what());
      }
    });
  }

  void bind() {
    if (options.port == 0) {
      bound_port = http.bind_to_any_port(options.host);
    } else if (http.bind_to_port(options.host, options.port)) {
      bound_port = options.port;
    } else {
      bound_port = -1;
    }
    if (bound_port <= 0)
      throw Error("BIND_FAILED", "cannot bind " + options.host + ":" + std::to_string(options.port));
  }
};

EnvServer::EnvServer(Environment& env, ServerOptions options)
    : impl_(std::make_unique<Impl>(env, std::move(options))) {}

EnvServer::~EnvServer() { stop(); }

int EnvServer::start() {
  impl_->bind();
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return impl_->bound_port;
}

void EnvServer::listen() {
  impl_->bind();
  spdlog::info("serving {} tasks on {}:{}", impl_->env.tasks().size(), impl_->options.host, impl_->bound_port);
  impl_->http.listen_after_bind();
}

void EnvServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int EnvServer::port() const noexcept { return impl_->bound_port; }

}  // namespace searchgym
