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

// Experiment configuration: a flat TOML or JSON file, command-line
// overrides on top, and the wiring from a resolved config to a runnable
// experiment (dataset, mode specs, per-session backends).
//
// Keys (defaults in parentheses):
//   dataset, level (5), subjects ([] = all), modes or mode (all five),
//   n_runs (3), parallelism (1), max_rounds (6), role_swap_every (1),
//   quota (none), templates (bundled), out,
//   backend ("replay"), cassette, replay_lenient (false), script,
//   model ("gpt-4o"), temperature (0.7), max_tokens (1024),
//   base_url, api_key_env ("OPENAI_API_KEY"), max_attempts (5),
//   backoff_base_ms (1000), requests_per_minute (0 = unlimited).
// Relative paths resolve against the config file's directory. API keys are
// read from the environment variable named by api_key_env, never from the
// file.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duetmath/dataset.h"
#include "duetmath/evaluation.h"

namespace duetmath {

enum class BackendKind { kLive, kReplay, kScripted };
std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::optional<int> level = 5;
  std::vector<Subject> subjects;
  std::vector<CommunicationMode> modes;
  int n_runs = 3;
  int parallelism = 1;
  int max_rounds = kDefaultMaxRounds;
  int role_swap_every = 1;
  std::optional<int> quota;
  std::filesystem::path templates;
  std::filesystem::path out;

  BackendKind backend = BackendKind::kReplay;
  /// Directory of per-session cassettes (replay) or recording target.
  std::filesystem::path cassette;
  bool replay_lenient = false;
  /// JSON reply script for the scripted backend.
  std::filesystem::path script;

  std::string model = "gpt-4o";
  double temperature = 0.7;
  int max_tokens = 1024;
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_attempts = 5;
  int backoff_base_ms = 1000;
  double requests_per_minute = 0;
};

/// Parses a config document. `overrides` is a flat object using the same
/// keys; it wins over the file. Relative paths in the file resolve against
/// `base_dir`, relative paths in overrides against the working directory.
/// Throws Error(kParseError) for syntax or type errors (with line or field),
/// Error(kValidationError) listing every violated invariant.
ExperimentConfig parse_config_text(std::string_view text, bool toml,
                                   const std::filesystem::path& base_dir,
                                   const nlohmann::json& overrides = nlohmann::json::object());

/// Reads `path` (".toml" selects TOML, anything else JSON).
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const nlohmann::json& overrides = nlohmann::json::object());

/// Every violated invariant, one message each; empty when valid.
std::vector<std::string> validation_errors(const ExperimentConfig& config);

nlohmann::ordered_json to_json(const ExperimentConfig& config);

/// `<dir>/<mode>/<problem_id>__run<k>.jsonl`; problem ids contain the
/// subject directory.
std::filesystem::path session_cassette_path(const std::filesystem::path& dir,
                                            CommunicationMode mode,
                                            const std::string& problem_id, int run_index);

/// Reply script for the scripted backend:
///   {"default": [...], "sessions": {"<mode>/<problem_id>#<run>": [...]}}
/// A session key without "#<run>" applies to every run.
struct ReplyScript {
  std::vector<std::string> default_replies;
  std::map<std::string, std::vector<std::string>> sessions;

  const std::vector<std::string>& replies_for(CommunicationMode mode,
                                              const std::string& problem_id,
                                              int run_index) const;
};

ReplyScript load_reply_script(const std::filesystem::path& path);

struct PreparedRun {
  ExperimentOptions options;
  std::vector<ProblemInstance> problems;
  DatasetManifest manifest;
  BackendFactory backends;
};

/// Loads the dataset and templates and builds the backend factory. When
/// `record_to` is set every session's exchanges are also written to a
/// cassette under that directory. The live backend is only constructed for
/// BackendKind::kLive.
PreparedRun prepare_run(const ExperimentConfig& config,
                        const std::optional<std::filesystem::path>& record_to = std::nullopt);

}  // namespace duetmath
