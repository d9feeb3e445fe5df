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

// Chat-completion gateway: one request/response shape, three backends
// (live OpenAI-compatible HTTP, scripted replies, recorded cassettes).

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "duetmath/types.h"

namespace duetmath {

enum class ChatRole { kSystem, kUser, kAssistant };

std::string_view to_string(ChatRole role);
ChatRole parse_chat_role(std::string_view text);

struct ChatTurn {
  ChatRole role = ChatRole::kUser;
  std::string content;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

struct ChatRequest {
  std::string model = "gpt-4o";
  std::string system_prompt;
  /// turns[0] is the system turn carrying `system_prompt`.
  std::vector<ChatTurn> turns;
  double temperature = 0.7;
  int max_tokens = 1024;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

/// Throws Error(kInvalidArgument) unless turns is non-empty and starts with
/// the system prompt.
void validate(const ChatRequest& request);

enum class BackendLabel { kLive, kScripted, kReplay };

std::string_view to_string(BackendLabel label);
BackendLabel parse_backend_label(std::string_view text);

struct ChatResponse {
  std::string content;
  std::optional<TokenUsage> token_usage;
  BackendLabel backend_label = BackendLabel::kScripted;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

void to_json(nlohmann::json& j, const ChatTurn& v);
void from_json(const nlohmann::json& j, ChatTurn& v);
void to_json(nlohmann::json& j, const ChatRequest& v);
void from_json(const nlohmann::json& j, ChatRequest& v);
void to_json(nlohmann::json& j, const ChatResponse& v);
void from_json(const nlohmann::json& j, ChatResponse& v);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Canonical request bytes: compact JSON, object keys sorted, fields
/// model/system_prompt/turns/temperature/max_tokens.
std::string canonical_request_bytes(const ChatRequest& request);

/// SHA-256 of the canonical request bytes. Deterministic, independent of
/// field order in any serialized form, sensitive to every field value.
std::string fingerprint(const ChatRequest& request);

/// Fingerprint of a request given in any JSON serialization (any key order,
/// any whitespace). Equal to fingerprint() of the decoded request.
std::string fingerprint_serialized(std::string_view request_json);

/// Uniform completion interface. Implementations are safe to call from
/// several threads unless stated otherwise.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Replies from a fixed list in order; once exhausted the last reply repeats.
/// The function form computes the reply from the request.
class ScriptedBackend : public ChatBackend {
 public:
  using ReplyFn = std::function<std::string(const ChatRequest&)>;

  explicit ScriptedBackend(std::vector<std::string> replies);
  explicit ScriptedBackend(ReplyFn reply);

  ChatResponse complete(const ChatRequest& request) override;

  /// Requests seen so far, in call order.
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  ReplyFn reply_fn_;
  std::size_t next_ = 0;
  std::vector<ChatRequest> seen_;
};

struct CassetteMetadata {
  std::string model;
  std::string recorded_at;

  friend bool operator==(const CassetteMetadata&,
                         const CassetteMetadata&) = default;
};

struct CassetteEntry {
  std::string fingerprint;
  ChatResponse response;
  CassetteMetadata metadata;
  /// The recorded request, kept for inspection only; replay matches on the
  /// fingerprint.
  std::optional<ChatRequest> request;

  friend bool operator==(const CassetteEntry&, const CassetteEntry&) = default;
};

struct Cassette {
  std::vector<CassetteEntry> entries;
  CassetteMetadata metadata;
};

/// Reads a JSONL cassette. A missing file yields an empty cassette; a
/// malformed line throws Error(kParseError).
Cassette load_cassette(const std::filesystem::path& path);
std::string to_jsonl_line(const CassetteEntry& entry);

enum class ReplayMode {
  /// The next unconsumed entry must carry the request's fingerprint.
  kStrict,
  /// Any unconsumed entry with a matching fingerprint, earliest first.
  kLenient,
};

class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(Cassette cassette, ReplayMode mode = ReplayMode::kStrict);

  /// Throws kReplayMiss when no entry is left to serve the request and
  /// kReplayMismatch when a strict replay sees an unexpected fingerprint.
  ChatResponse complete(const ChatRequest& request) override;

  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  Cassette cassette_;
  ReplayMode mode_;
  std::vector<bool> consumed_;
  std::size_t cursor_ = 0;
};

/// Forwards to `inner` and appends each exchange to a JSONL cassette file.
/// Writes are serialized and flushed per entry.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner,
                   std::filesystem::path cassette_path,
                   std::string recorded_at);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::filesystem::path path_;
  std::string recorded_at_;
  std::mutex mu_;
  bool truncated_ = false;
};

/// Attempt k (1-based) waits base * 2^(k-1), scaled by a uniform jitter
/// factor in [1 - jitter, 1 + jitter].
class ExponentialBackoff {
 public:
  ExponentialBackoff(std::chrono::milliseconds base, double jitter = 0.5,
                     std::uint64_t seed = std::random_device{}());

  std::chrono::milliseconds delay(int attempt);

  std::chrono::milliseconds base() const { return base_; }
  double jitter() const { return jitter_; }

 private:
  std::chrono::milliseconds base_;
  double jitter_;
  std::mutex mu_;
  std::mt19937_64 rng_;
};

/// Process-wide requests-per-minute budget. Requests are spaced at least
/// 60s / rpm apart; `reserve` hands out the next free slot.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(double requests_per_minute);

  /// Claims the next slot at or after `now` and returns how long the caller
  /// must wait for it. Zero or negative rpm disables limiting.
  Clock::duration reserve(Clock::time_point now);

  /// reserve() + sleep.
  void acquire();

 private:
  std::mutex mu_;
  Clock::duration interval_{};
  std::optional<Clock::time_point> next_slot_;
};

struct LiveBackendOptions {
  /// Prefix up to and including the API version, e.g.
  /// "https://api.openai.com/v1". "/chat/completions" is appended.
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{1000};
  double requests_per_minute = 0;
  std::chrono::seconds timeout{120};
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
  /// Shared limiter; created from requests_per_minute when null.
  std::shared_ptr<RateLimiter> rate_limiter;
};

/// OpenAI chat-completions client (POST {base_url}/chat/completions). 429 and
/// 5xx responses, as well as connection failures, are retried with
/// exponential backoff up to max_attempts total attempts.
class LiveBackend : public ChatBackend {
 public:
  /// Throws kAuthError when the API key variable is unset or empty.
  explicit LiveBackend(LiveBackendOptions options);
  ~LiveBackend() override;

  ChatResponse complete(const ChatRequest& request) override;

 private:
  LiveBackendOptions options_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_;
  std::shared_ptr<RateLimiter> limiter_;
  std::unique_ptr<ExponentialBackoff> backoff_;
};

/// OpenAI wire encoding of a request; exposed for tests.
nlohmann::json to_openai_payload(const ChatRequest& request);

/// Decodes a chat-completions response body. Throws kEmptyCompletion when
/// the first choice has no content and kTransportError on malformed JSON.
ChatResponse from_openai_response(std::string_view body);

}  // namespace duetmath
