// Copyright 2026 The duetmath Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "duetmath/error.h"
#include "duetmath/llm_gateway.h"

namespace duetmath {

using json = nlohmann::json;

namespace {

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

std::string snippet(const std::string& body) {
  constexpr std::size_t kMax = 300;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

json to_openai_payload(const ChatRequest& request) {
  json messages = json::array();
  for (const ChatTurn& turn : request.turns) {
    messages.push_back({{"role", to_string(turn.role)}, {"content", turn.content}});
  }
  return json{{"model", request.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
}

ChatResponse from_openai_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kTransportError,
                std::string("malformed completion body: ") + e.what());
  }
  ChatResponse response;
  response.backend_label = BackendLabel::kLive;
  std::string content;
  if (auto choices = j.find("choices");
      choices != j.end() && choices->is_array() && !choices->empty()) {
    const json message = (*choices)[0].value("message", json::object());
    if (auto c = message.find("content"); c != message.end() && c->is_string()) {
      content = c->get<std::string>();
    }
  }
  if (content.empty()) {
    throw Error(ErrorCode::kEmptyCompletion, "completion has no content");
  }
  response.content = std::move(content);
  if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
    response.token_usage = TokenUsage{usage->value("prompt_tokens", 0L),
                                      usage->value("completion_tokens", 0L)};
  }
  return response;
}

LiveBackend::LiveBackend(LiveBackendOptions options)
    : options_(std::move(options)) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::kAuthError,
                "environment variable " + options_.api_key_env + " is not set");
  }
  api_key_ = key;
  if (options_.max_attempts < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
  }
  // Split "scheme://host[:port]/prefix" into client address and path prefix.
  const std::string& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "base_url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/chat/completions";

  limiter_ = options_.rate_limiter
                 ? options_.rate_limiter
                 : std::make_shared<RateLimiter>(options_.requests_per_minute);
  backoff_ = std::make_unique<ExponentialBackoff>(options_.backoff_base);
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

LiveBackend::~LiveBackend() = default;

ChatResponse LiveBackend::complete(const ChatRequest& request) {
  validate(request);
  const std::string payload = to_openai_payload(request).dump(
      -1, ' ', false, json::error_handler_t::replace);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  std::string last_failure;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    if (attempt > 1) options_.sleep(backoff_->delay(attempt - 1));
    limiter_->acquire();

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto result = client.Post(path_, headers, payload, "application/json");
    if (!result) {
      last_was_transport = true;
      last_failure = httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::kAuthError, "HTTP " + std::to_string(status) + ": " +
                                             snippet(result->body));
    }
    if (is_retryable_status(status)) {
      last_was_transport = false;
      last_failure = "HTTP " + std::to_string(status) + ": " + snippet(result->body);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::kTransportError, "HTTP " + std::to_string(status) +
                                                  ": " + snippet(result->body));
    }
    return from_openai_response(result->body);
  }
  const std::string detail = "giving up after " +
                             std::to_string(options_.max_attempts) +
                             " attempts; last failure: " + last_failure;
  throw Error(last_was_transport ? ErrorCode::kTransportError
                                 : ErrorCode::kRateLimitedExhausted,
              detail);
}

}  // namespace duetmath
