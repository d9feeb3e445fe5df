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

// Shared vocabulary types. Everything here is a plain value: construct,
// validate, share freely between worker threads.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace duetmath {

/// MATH dataset subjects, named after the dataset's directory names.
enum class Subject {
  kAlgebra,
  kCountingAndProbability,
  kGeometry,
  kIntermediateAlgebra,
  kNumberTheory,
  kPrealgebra,
  kPrecalculus,
};

inline constexpr std::array<Subject, 7> kAllSubjects = {
    Subject::kAlgebra,       Subject::kCountingAndProbability,
    Subject::kGeometry,      Subject::kIntermediateAlgebra,
    Subject::kNumberTheory,  Subject::kPrealgebra,
    Subject::kPrecalculus,
};

std::string_view to_string(Subject subject);
/// Accepts the snake_case directory name ("counting_and_probability") or the
/// dataset's `type` label ("Counting & Probability"). Throws kMalformedRecord
/// for anything else.
Subject parse_subject(std::string_view text);

enum class CommunicationMode {
  kSingleAgent,
  kTeacherStudent,
  kPeerToPeer,
  kCriticalDebate,
  kReciprocalPeer,
};

/// Column order of the accuracy table.
inline constexpr std::array<CommunicationMode, 5> kAllModes = {
    CommunicationMode::kSingleAgent,    CommunicationMode::kTeacherStudent,
    CommunicationMode::kPeerToPeer,     CommunicationMode::kCriticalDebate,
    CommunicationMode::kReciprocalPeer,
};

std::string_view to_string(CommunicationMode mode);
CommunicationMode parse_mode(std::string_view text);
/// Table heading, e.g. "Peer-to-Peer".
std::string_view display_name(CommunicationMode mode);
bool is_dual(CommunicationMode mode);

enum class Speaker { kAgentA, kAgentB, kSolo };

std::string_view to_string(Speaker speaker);
Speaker parse_speaker(std::string_view text);

enum class Termination { kFinalAnswerMarker, kMaxTurns, kBackendError };

std::string_view to_string(Termination termination);
Termination parse_termination(std::string_view text);

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ProblemInstance {
  std::string id;
  Subject subject = Subject::kAlgebra;
  int level = 5;
  std::string statement;
  std::string reference_solution;
  std::string ground_truth;

  friend bool operator==(const ProblemInstance&,
                         const ProblemInstance&) = default;
};

/// Checks level range and a non-empty ground truth. Consistency with the
/// reference solution is checked by the dataset loader, which owns
/// extraction.
void validate(const ProblemInstance& problem);

struct Message {
  Speaker speaker = Speaker::kSolo;
  int turn_index = 0;
  std::string content;
  std::optional<TokenUsage> token_usage;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Transcript {
  std::string problem_id;
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  int run_index = 0;
  std::vector<Message> messages;
  std::optional<std::string> final_answer;
  std::optional<Speaker> final_answer_speaker;
  Termination terminated_by = Termination::kMaxTurns;

  /// "<mode>:<problem_id>:<run_index>"; keys chunks back to their session.
  std::string id() const;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Enforces message, turn-index, alternation and final-answer invariants.
/// Throws Error(kInvalidArgument) describing the first violation.
void validate(const Transcript& transcript);

/// Persona plus instruction text for one agent. `instruction_text` carries
/// exactly one `{problem}` and one `{history}` placeholder.
struct PromptTemplate {
  std::string template_id;
  std::string persona_text;
  std::string instruction_text;
  std::string final_answer_instruction;

  friend bool operator==(const PromptTemplate&,
                         const PromptTemplate&) = default;
};

/// Throws Error(kTemplateMalformed).
void validate(const PromptTemplate& prompt);

struct AgentSpec {
  std::string role_name;
  PromptTemplate prompt;
  std::string model = "gpt-4o";
  double temperature = 0.7;
  int max_completion_tokens = 1024;

  const std::string& persona() const { return prompt.persona_text; }

  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

void validate(const AgentSpec& agent);

// JSON persistence. Field names are the snake_case names above.
void to_json(nlohmann::json& j, const TokenUsage& v);
void from_json(const nlohmann::json& j, TokenUsage& v);
void to_json(nlohmann::json& j, const ProblemInstance& v);
void from_json(const nlohmann::json& j, ProblemInstance& v);
void to_json(nlohmann::json& j, const Message& v);
void from_json(const nlohmann::json& j, Message& v);
void to_json(nlohmann::json& j, const Transcript& v);
void from_json(const nlohmann::json& j, Transcript& v);
void to_json(nlohmann::json& j, const PromptTemplate& v);
void from_json(const nlohmann::json& j, PromptTemplate& v);
void to_json(nlohmann::json& j, const AgentSpec& v);
void from_json(const nlohmann::json& j, AgentSpec& v);

/// One transcript per line, no trailing newline.
std::string to_jsonl_line(const Transcript& transcript);
Transcript transcript_from_jsonl_line(std::string_view line);

}  // namespace duetmath
