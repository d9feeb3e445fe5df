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

// Runs one problem-solving session in a communication mode: renders prompts
// from templates and the dialogue so far, alternates the two agents, and
// stops on the final-answer marker or after max_rounds exchanges.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "duetmath/llm_gateway.h"
#include "duetmath/types.h"

namespace duetmath {

inline constexpr std::string_view kFinalAnswerMarker = "FINAL ANSWER:";
inline constexpr int kDefaultMaxRounds = 6;

struct SamplingParams {
  std::string model = "gpt-4o";
  double temperature = 0.7;
  int max_tokens = 1024;
};

struct ModeSpec {
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  AgentSpec agent_a;
  std::optional<AgentSpec> agent_b;
  /// One round is one agent_a message followed by one agent_b message.
  int max_rounds = kDefaultMaxRounds;
  /// Reciprocal mode only: the two personas trade slots every N rounds.
  std::optional<int> role_swap_every;
};

/// Throws Error(kInvalidArgument) on a violated ModeSpec invariant, or
/// kTemplateMalformed for a bad template.
void validate(const ModeSpec& spec);

struct SessionOutcome {
  Transcript transcript;
  /// "\boxed{...}" payload of the terminating marker.
  std::optional<std::string> raw_final_answer;
  int rounds_used = 0;
  /// Backend failure detail when transcript.terminated_by == kBackendError.
  std::optional<std::string> error;
};

/// Whether `speaker` may end a session with a final answer in `mode`. In
/// teacher_student only the student (agent_b) may; elsewhere anyone.
bool may_give_final_answer(CommunicationMode mode, Speaker speaker);

/// Finds the last "FINAL ANSWER: \boxed{...}" in `text` (marker matched
/// case-insensitively, `$`, `**` or `\(` allowed before the box) and returns
/// the "\boxed{...}" part with balanced braces.
std::optional<std::string> find_final_answer_marker(std::string_view text);

/// Builds the request one agent sees: system turn = persona, one user turn
/// with the instruction (problem and history note substituted, final-answer
/// instruction appended), then the dialogue so far with the perspective
/// agent's own messages as `assistant` and the counterpart's as `user`.
ChatRequest render_prompt(const PromptTemplate& prompt,
                          const ProblemInstance& problem,
                          const Transcript& history, Speaker perspective,
                          const SamplingParams& sampling = {});

/// Runs a dual-agent session. Backend failures do not throw: the partial
/// transcript comes back with terminated_by == kBackendError.
SessionOutcome run_session(const ModeSpec& spec, const ProblemInstance& problem,
                           ChatBackend& gateway, int run_index = 0);

/// Zero-shot baseline: exactly one completion.
SessionOutcome run_single_agent(const ModeSpec& spec,
                                const ProblemInstance& problem,
                                ChatBackend& gateway, int run_index = 0);

/// Dispatches on spec.mode.
SessionOutcome run_mode(const ModeSpec& spec, const ProblemInstance& problem,
                        ChatBackend& gateway, int run_index = 0);

/// Parses a template asset. The file holds `[persona]`, `[instruction]` and
/// `[final_answer]` sections, each header alone on its line.
PromptTemplate parse_template(std::string_view text, std::string template_id);
PromptTemplate load_template(const std::filesystem::path& path);

/// Loads `<template_dir>/<mode>/{agent_a,agent_b}.txt` (or `solo.txt` for the
/// single-agent mode) and assembles a validated ModeSpec.
ModeSpec load_mode_spec(CommunicationMode mode,
                        const std::filesystem::path& template_dir,
                        const SamplingParams& sampling = {},
                        int max_rounds = kDefaultMaxRounds,
                        int role_swap_every = 1);

}  // namespace duetmath
