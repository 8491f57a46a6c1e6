#include <httplib.h>

#include <nlohmann/json.hpp>

#include "searchgym/corpus.hpp"

namespace searchgym {

GeneratorHook http_generator_hook(std::string url, int timeout_seconds) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  return [base = std::move(base), path = std::move(path),
          timeout_seconds](const nlohmann::json& request) -> std::optional<std::string> {
    httplib::Client client(base);
    client.set_connection_timeout(timeout_seconds);
    client.set_read_timeout(timeout_seconds);
    auto res = client.Post(path, request.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("body") || !body["body"].is_string()) {
      return std::nullopt;
    }
    return body["body"].get<std::string>();
  };
}

}  // namespace searchgym
