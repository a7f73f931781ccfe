// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_GATEWAY_HTTP_HPP
#define DPA_GATEWAY_HTTP_HPP

#include <cstdlib>
#include <string>

#include "dpa/gateway.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dpa {

/// OpenAI-compatible chat-completions client.
///
/// Base URL comes from the constructor or the DPA_API_BASE environment
/// variable; the bearer token from DPA_API_KEY. When `logprobs` is on the
/// reported per-token log-probabilities are summed into
/// CompletionResult::logprob.
class HttpChatClient : public LlmClient {
 public:
  explicit HttpChatClient(std::string base_url = {}, bool request_logprobs = true)
      : request_logprobs_(request_logprobs) {
    if (base_url.empty()) {
      if (const char* env = std::getenv("DPA_API_BASE")) base_url = env;
    }
    if (base_url.empty()) {
      throw ConfigError("no API base URL: set gateway.base_url or DPA_API_BASE");
    }
    base_url_ = std::move(base_url);
    if (const char* key = std::getenv("DPA_API_KEY")) api_key_ = key;
  }

  CompletionResult complete_once(const CompletionRequest& request) override {
    nlohmann::ordered_json body;
    body["model"] = request.model_name;
    body["messages"] = nlohmann::ordered_json::array(
        {{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request_logprobs_) body["logprobs"] = true;

    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      const auto err = res.error();
      const auto kind = err == httplib::Error::ConnectionTimeout ||
                                err == httplib::Error::Read
                            ? GatewayError::Kind::Timeout
                            : GatewayError::Kind::Transport;
      throw GatewayError(kind, "http error: " + httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403) {
      throw GatewayError(GatewayError::Kind::Auth,
                         "authentication rejected (status " +
                             std::to_string(res->status) + ")");
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
      throw GatewayError(GatewayError::Kind::Timeout,
                         "transient status " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw GatewayError(GatewayError::Kind::MalformedBody,
                         "unexpected status " + std::to_string(res->status));
    }

    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& choice = j.at("choices").at(0);
      CompletionResult result;
      result.text = choice.at("message").at("content").get<std::string>();
      if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
          choice["logprobs"].contains("content")) {
        double sum = 0.0;
        for (const auto& tok : choice["logprobs"]["content"]) {
          sum += tok.at("logprob").get<double>();
        }
        result.logprob = sum;
      }
      return result;
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(GatewayError::Kind::MalformedBody,
                         std::string("bad response body: ") + e.what());
    }
  }

 private:
  std::string base_url_;
  std::string api_key_;
  bool request_logprobs_;
};

}  // namespace dpa

#endif  // DPA_GATEWAY_HTTP_HPP
