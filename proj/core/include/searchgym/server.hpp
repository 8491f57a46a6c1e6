#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "searchgym/envsim.hpp"

namespace searchgym {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string default_profile = "train";
  std::uint64_t seed = 42;  // curriculum draws
  std::optional<std::filesystem::path> trajectory_log;
  int threads = 8;
};

/// HTTP front end for an Environment:
///   POST /episodes, POST /episodes/{id}/actions, GET /episodes/{id},
///   GET /health.
/// Episodes are independent; each is stepped under its own lock.
class EnvServer {
 public:
  EnvServer(Environment& env, ServerOptions options);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  /// Throws Error("BIND_FAILED").
  int start();
  /// Binds and serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace searchgym
