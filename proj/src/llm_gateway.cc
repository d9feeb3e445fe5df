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

#include "duetmath/llm_gateway.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "duetmath/error.h"

namespace duetmath {

using json = nlohmann::json;

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::kSystem: return "system";
    case ChatRole::kUser: return "user";
    case ChatRole::kAssistant: return "assistant";
  }
  return "unknown";
}

ChatRole parse_chat_role(std::string_view text) {
  if (text == "system") return ChatRole::kSystem;
  if (text == "user") return ChatRole::kUser;
  if (text == "assistant") return ChatRole::kAssistant;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown chat role '" + std::string(text) + "'");
}

std::string_view to_string(BackendLabel label) {
  switch (label) {
    case BackendLabel::kLive: return "live";
    case BackendLabel::kScripted: return "scripted";
    case BackendLabel::kReplay: return "replay";
  }
  return "unknown";
}

BackendLabel parse_backend_label(std::string_view text) {
  if (text == "live") return BackendLabel::kLive;
  if (text == "scripted") return BackendLabel::kScripted;
  if (text == "replay") return BackendLabel::kReplay;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown backend label '" + std::string(text) + "'");
}

void validate(const ChatRequest& request) {
  if (request.turns.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat request has no turns");
  }
  const ChatTurn& first = request.turns.front();
  if (first.role != ChatRole::kSystem || first.content != request.system_prompt) {
    throw Error(ErrorCode::kInvalidArgument,
                "first turn must be the system prompt");
  }
}

void to_json(json& j, const ChatTurn& v) {
  j = json{{"role", to_string(v.role)}, {"content", v.content}};
}

void from_json(const json& j, ChatTurn& v) {
  v.role = parse_chat_role(j.at("role").get<std::string>());
  j.at("content").get_to(v.content);
}

void to_json(json& j, const ChatRequest& v) {
  j = json{{"model", v.model},
           {"system_prompt", v.system_prompt},
           {"turns", v.turns},
           {"temperature", v.temperature},
           {"max_tokens", v.max_tokens}};
}

void from_json(const json& j, ChatRequest& v) {
  j.at("model").get_to(v.model);
  j.at("system_prompt").get_to(v.system_prompt);
  j.at("turns").get_to(v.turns);
  j.at("temperature").get_to(v.temperature);
  j.at("max_tokens").get_to(v.max_tokens);
}

void to_json(json& j, const ChatResponse& v) {
  j = json{{"content", v.content},
           {"token_usage", nullptr},
           {"backend_label", to_string(v.backend_label)}};
  if (v.token_usage) j["token_usage"] = *v.token_usage;
}

void from_json(const json& j, ChatResponse& v) {
  j.at("content").get_to(v.content);
  v.token_usage.reset();
  if (auto it = j.find("token_usage"); it != j.end() && !it->is_null()) {
    v.token_usage = it->get<TokenUsage>();
  }
  v.backend_label = parse_backend_label(j.at("backend_label").get<std::string>());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw Error(ErrorCode::kInvalidArgument, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string canonical_request_bytes(const ChatRequest& request) {
  // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
  return json(request).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string fingerprint(const ChatRequest& request) {
  return sha256_hex(canonical_request_bytes(request));
}

std::string fingerprint_serialized(std::string_view request_json) {
  try {
    return fingerprint(json::parse(request_json).get<ChatRequest>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("request json: ") + e.what());
  }
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies)
    : replies_(std::move(replies)) {}

ScriptedBackend::ScriptedBackend(ReplyFn reply) : reply_fn_(std::move(reply)) {}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
  std::string content;
  {
    std::lock_guard<std::mutex> lock(mu_);
    seen_.push_back(request);
    if (!reply_fn_) {
      if (replies_.empty()) {
        throw Error(ErrorCode::kEmptyCompletion, "scripted backend has no replies");
      }
      content = replies_[std::min(next_, replies_.size() - 1)];
      ++next_;
    }
  }
  if (reply_fn_) content = reply_fn_(request);
  if (content.empty()) {
    throw Error(ErrorCode::kEmptyCompletion, "scripted reply is empty");
  }
  return ChatResponse{std::move(content), std::nullopt, BackendLabel::kScripted};
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return seen_;
}

std::string to_jsonl_line(const CassetteEntry& entry) {
  json j{{"fingerprint", entry.fingerprint},
         {"response", entry.response},
         {"metadata",
          {{"model", entry.metadata.model},
           {"recorded_at", entry.metadata.recorded_at}}}};
  if (entry.request) j["request"] = *entry.request;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Cassette load_cassette(const std::filesystem::path& path) {
  Cassette cassette;
  std::ifstream in(path);
  if (!in) return cassette;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      CassetteEntry entry;
      j.at("fingerprint").get_to(entry.fingerprint);
      j.at("response").get_to(entry.response);
      const json& meta = j.at("metadata");
      meta.at("model").get_to(entry.metadata.model);
      meta.at("recorded_at").get_to(entry.metadata.recorded_at);
      if (auto it = j.find("request"); it != j.end() && !it->is_null()) {
        entry.request = it->get<ChatRequest>();
      }
      if (cassette.entries.empty()) cassette.metadata = entry.metadata;
      cassette.entries.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, path.string() + ":" +
                                              std::to_string(line_no) + ": " +
                                              e.what());
    }
  }
  return cassette;
}

ReplayBackend::ReplayBackend(Cassette cassette, ReplayMode mode)
    : cassette_(std::move(cassette)),
      mode_(mode),
      consumed_(cassette_.entries.size(), false) {}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
  const std::string fp = fingerprint(request);
  std::lock_guard<std::mutex> lock(mu_);
  auto serve = [&](std::size_t i) {
    consumed_[i] = true;
    ChatResponse response = cassette_.entries[i].response;
    response.backend_label = BackendLabel::kReplay;
    return response;
  };
  if (mode_ == ReplayMode::kStrict) {
    if (cursor_ >= cassette_.entries.size()) {
      throw Error(ErrorCode::kReplayMiss,
                  "cassette exhausted after " + std::to_string(cursor_) +
                      " entries (request " + fp.substr(0, 12) + ")");
    }
    const CassetteEntry& next = cassette_.entries[cursor_];
    if (next.fingerprint != fp) {
      throw Error(ErrorCode::kReplayMismatch,
                  "entry " + std::to_string(cursor_) + " expects " +
                      next.fingerprint.substr(0, 12) + ", got " + fp.substr(0, 12));
    }
    return serve(cursor_++);
  }
  for (std::size_t i = 0; i < cassette_.entries.size(); ++i) {
    if (!consumed_[i] && cassette_.entries[i].fingerprint == fp) return serve(i);
  }
  throw Error(ErrorCode::kReplayMiss,
              "no unconsumed entry for request " + fp.substr(0, 12));
}

std::size_t ReplayBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<std::size_t>(
      std::count(consumed_.begin(), consumed_.end(), false));
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner,
                                   std::filesystem::path cassette_path,
                                   std::string recorded_at)
    : inner_(std::move(inner)),
      path_(std::move(cassette_path)),
      recorded_at_(std::move(recorded_at)) {}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
  ChatResponse response = inner_->complete(request);
  CassetteEntry entry{fingerprint(request), response,
                      CassetteMetadata{request.model, recorded_at_}, request};
  std::lock_guard<std::mutex> lock(mu_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  // The first write of a recorder replaces any stale cassette at that path.
  std::ofstream out(path_, truncated_ ? std::ios::app : std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, "cannot write cassette " + path_.string());
  }
  truncated_ = true;
  out << to_jsonl_line(entry) << '\n';
  out.flush();
  return response;
}

ExponentialBackoff::ExponentialBackoff(std::chrono::milliseconds base,
                                       double jitter, std::uint64_t seed)
    : base_(base), jitter_(jitter), rng_(seed) {
  if (base.count() < 0 || jitter < 0.0 || jitter > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid backoff parameters");
  }
}

std::chrono::milliseconds ExponentialBackoff::delay(int attempt) {
  if (attempt < 1) {
    throw Error(ErrorCode::kInvalidArgument, "backoff attempt must be >= 1");
  }
  const double nominal =
      static_cast<double>(base_.count()) * std::ldexp(1.0, attempt - 1);
  std::uniform_real_distribution<double> dist(1.0 - jitter_, 1.0 + jitter_);
  double factor;
  {
    std::lock_guard<std::mutex> lock(mu_);
    factor = dist(rng_);
  }
  return std::chrono::milliseconds(static_cast<long long>(std::llround(nominal * factor)));
}

RateLimiter::RateLimiter(double requests_per_minute) {
  if (requests_per_minute > 0) {
    interval_ = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(60.0 / requests_per_minute));
  }
}

RateLimiter::Clock::duration RateLimiter::reserve(Clock::time_point now) {
  std::lock_guard<std::mutex> lock(mu_);
  if (interval_ == Clock::duration::zero()) return Clock::duration::zero();
  Clock::time_point slot = now;
  if (next_slot_ && *next_slot_ > now) slot = *next_slot_;
  next_slot_ = slot + interval_;
  return slot - now;
}

void RateLimiter::acquire() {
  auto wait = reserve(Clock::now());
  if (wait > Clock::duration::zero()) std::this_thread::sleep_for(wait);
}

}  // namespace duetmath
