#pragma once

#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "toxpipe/llm_client.hpp"

namespace toxpipe {

// Chat-completion client: POST {base_url}/v1/chat/completions with system +
// user messages. The bearer token is resolved from the named environment
// variable once, at construction. A fresh connection per request keeps
// send() safely callable from many threads.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const EndpointConfig& config) : config_(config) {
    config.check_valid();
    if (!config_.auth_env.empty()) {
      const char* token = std::getenv(config_.auth_env.c_str());
      if (!token || *token == '\0')
        throw AuthError("environment variable '" + config_.auth_env +
                        "' is empty or not set");
      token_ = token;
    }
  }

  TransportResult send(const ChatRequest& request) override {
    httplib::Client client(config_.base_url);
    if (!client.is_valid())
      return TransportResult::failure(
          TransportErrorKind::kFatal,
          "unusable base_url '" + config_.base_url +
              "' (https requires a TLS-enabled build)");
    const time_t seconds = config_.timeout_ms / 1000;
    const time_t micros = (config_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    nlohmann::ordered_json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["messages"] = {
        {{"role", "system"}, {"content", request.system}},
        {{"role", "user"}, {"content", request.user}},
    };

    httplib::Result res = client.Post("/v1/chat/completions", headers, body.dump(),
                                      "application/json");
    if (!res)
      return TransportResult::failure(TransportErrorKind::kRetryable,
                                      "connection failed: " +
                                          httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
      return TransportResult::failure(TransportErrorKind::kAuth,
                                      "endpoint returned " + std::to_string(res->status),
                                      res->status);
    if (res->status == 408 || res->status == 429 || res->status >= 500)
      return TransportResult::failure(TransportErrorKind::kRetryable,
                                      "endpoint returned " + std::to_string(res->status),
                                      res->status);
    if (res->status != 200)
      return TransportResult::failure(TransportErrorKind::kFatal,
                                      "endpoint returned " + std::to_string(res->status),
                                      res->status);

    const nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") ||
        !parsed["choices"].is_array() || parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string())
      return TransportResult::failure(TransportErrorKind::kRetryable,
                                      "malformed completion payload", res->status);
    return TransportResult::success(
        parsed["choices"][0]["message"]["content"].get<std::string>());
  }

 private:
  EndpointConfig config_;
  std::string token_;
};

// mock:// endpoints get the scripted transport; http(s):// the real one.
inline std::unique_ptr<Transport> make_transport(const EndpointConfig& config) {
  if (config.base_url.rfind("mock://", 0) == 0)
    return std::make_unique<ScriptedMockTransport>();
  if (config.base_url.rfind("http://", 0) == 0 ||
      config.base_url.rfind("https://", 0) == 0)
    return std::make_unique<HttpTransport>(config);
  throw std::invalid_argument("unsupported endpoint scheme in base_url '" +
                              config.base_url + "'");
}

}  // namespace toxpipe
