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

#include "duetmath/types.h"

#include <algorithm>
#include <cctype>

#include "duetmath/error.h"

namespace duetmath {

using json = nlohmann::json;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kAuthError: return "auth_error";
    case ErrorCode::kRateLimitedExhausted: return "rate_limited_exhausted";
    case ErrorCode::kTransportError: return "transport_error";
    case ErrorCode::kEmptyCompletion: return "empty_completion";
    case ErrorCode::kReplayMiss: return "replay_miss";
    case ErrorCode::kReplayMismatch: return "replay_mismatch";
    case ErrorCode::kTemplateMalformed: return "template_malformed";
    case ErrorCode::kBackendError: return "backend_error";
    case ErrorCode::kIoError: return "io_error";
    case ErrorCode::kMalformedRecord: return "malformed_record";
    case ErrorCode::kNoBoxedAnswer: return "no_boxed_answer";
    case ErrorCode::kEmptyRun: return "empty_run";
    case ErrorCode::kConfigError: return "config_error";
    case ErrorCode::kParseError: return "parse_error";
    case ErrorCode::kValidationError: return "validation_error";
    case ErrorCode::kMissingRecords: return "missing_records";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kAllTies: return "all_ties";
    case ErrorCode::kClassifierUnavailable: return "classifier_unavailable";
  }
  return "unknown";
}

namespace {

struct SubjectName {
  Subject subject;
  std::string_view snake;
  std::string_view label;
};

constexpr std::array<SubjectName, 7> kSubjectNames = {{
    {Subject::kAlgebra, "algebra", "Algebra"},
    {Subject::kCountingAndProbability, "counting_and_probability",
     "Counting & Probability"},
    {Subject::kGeometry, "geometry", "Geometry"},
    {Subject::kIntermediateAlgebra, "intermediate_algebra",
     "Intermediate Algebra"},
    {Subject::kNumberTheory, "number_theory", "Number Theory"},
    {Subject::kPrealgebra, "prealgebra", "Prealgebra"},
    {Subject::kPrecalculus, "precalculus", "Precalculus"},
}};

struct ModeName {
  CommunicationMode mode;
  std::string_view snake;
  std::string_view display;
};

constexpr std::array<ModeName, 5> kModeNames = {{
    {CommunicationMode::kSingleAgent, "single_agent", "Single Agent"},
    {CommunicationMode::kTeacherStudent, "teacher_student", "Teacher-Student"},
    {CommunicationMode::kPeerToPeer, "peer_to_peer", "Peer-to-Peer"},
    {CommunicationMode::kCriticalDebate, "critical_debate", "Critical Debate"},
    {CommunicationMode::kReciprocalPeer, "reciprocal_peer", "Reciprocal Peer"},
}};

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Subject subject) {
  for (const auto& n : kSubjectNames) {
    if (n.subject == subject) return n.snake;
  }
  return "unknown";
}

Subject parse_subject(std::string_view text) {
  for (const auto& n : kSubjectNames) {
    if (text == n.snake || text == n.label) return n.subject;
  }
  throw Error(ErrorCode::kMalformedRecord,
              "unknown subject '" + std::string(text) + "'");
}

std::string_view to_string(CommunicationMode mode) {
  for (const auto& n : kModeNames) {
    if (n.mode == mode) return n.snake;
  }
  return "unknown";
}

std::string_view display_name(CommunicationMode mode) {
  for (const auto& n : kModeNames) {
    if (n.mode == mode) return n.display;
  }
  return "unknown";
}

CommunicationMode parse_mode(std::string_view text) {
  for (const auto& n : kModeNames) {
    if (text == n.snake) return n.mode;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown communication mode '" + std::string(text) + "'");
}

bool is_dual(CommunicationMode mode) {
  return mode != CommunicationMode::kSingleAgent;
}

std::string_view to_string(Speaker speaker) {
  switch (speaker) {
    case Speaker::kAgentA: return "agent_a";
    case Speaker::kAgentB: return "agent_b";
    case Speaker::kSolo: return "solo";
  }
  return "unknown";
}

Speaker parse_speaker(std::string_view text) {
  if (text == "agent_a") return Speaker::kAgentA;
  if (text == "agent_b") return Speaker::kAgentB;
  if (text == "solo") return Speaker::kSolo;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown speaker '" + std::string(text) + "'");
}

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::kFinalAnswerMarker: return "final_answer_marker";
    case Termination::kMaxTurns: return "max_turns";
    case Termination::kBackendError: return "backend_error";
  }
  return "unknown";
}

Termination parse_termination(std::string_view text) {
  if (text == "final_answer_marker") return Termination::kFinalAnswerMarker;
  if (text == "max_turns") return Termination::kMaxTurns;
  if (text == "backend_error") return Termination::kBackendError;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown termination '" + std::string(text) + "'");
}

void validate(const ProblemInstance& problem) {
  if (problem.id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "problem id is empty");
  }
  if (problem.level < 1 || problem.level > 5) {
    throw Error(ErrorCode::kInvalidArgument,
                problem.id + ": level " + std::to_string(problem.level) +
                    " outside [1,5]");
  }
  if (problem.ground_truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                problem.id + ": ground truth is empty");
  }
}

std::string Transcript::id() const {
  return std::string(to_string(mode)) + ":" + problem_id + ":" +
         std::to_string(run_index);
}

void validate(const Transcript& transcript) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, transcript.id() + ": " + what);
  };
  if (transcript.run_index < 0) fail("negative run index");
  const bool dual = is_dual(transcript.mode);
  for (std::size_t i = 0; i < transcript.messages.size(); ++i) {
    const Message& m = transcript.messages[i];
    if (m.content.empty()) fail("message " + std::to_string(i) + " is empty");
    if (m.turn_index != static_cast<int>(i)) {
      fail("turn index " + std::to_string(m.turn_index) + " at position " +
           std::to_string(i));
    }
    Speaker expected = Speaker::kSolo;
    if (dual) expected = i % 2 == 0 ? Speaker::kAgentA : Speaker::kAgentB;
    if (m.speaker != expected) {
      fail("message " + std::to_string(i) + " spoken by " +
           std::string(to_string(m.speaker)) + ", expected " +
           std::string(to_string(expected)));
    }
  }
  const bool marker = transcript.terminated_by == Termination::kFinalAnswerMarker;
  if (marker != transcript.final_answer.has_value()) {
    fail("final_answer must be present iff terminated by the marker");
  }
  if (transcript.final_answer_speaker.has_value() !=
      transcript.final_answer.has_value()) {
    fail("final_answer_speaker must accompany final_answer");
  }
}

void validate(const PromptTemplate& prompt) {
  auto count = [&](std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = prompt.instruction_text.find(needle);
         pos != std::string::npos;
         pos = prompt.instruction_text.find(needle, pos + needle.size())) {
      ++n;
    }
    return n;
  };
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kTemplateMalformed, prompt.template_id + ": " + what);
  };
  if (prompt.persona_text.empty()) fail("persona text is empty");
  if (count("{problem}") != 1) fail("{problem} must appear exactly once");
  if (count("{history}") != 1) fail("{history} must appear exactly once");
  if (prompt.final_answer_instruction.find("FINAL ANSWER: \\boxed{") ==
      std::string::npos) {
    fail("final answer instruction must name the FINAL ANSWER: \\boxed{...} marker");
  }
}

void validate(const AgentSpec& agent) {
  if (agent.role_name.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "agent role name is empty");
  }
  if (!(agent.temperature >= 0.0 && agent.temperature <= 2.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                agent.role_name + ": temperature outside [0,2]");
  }
  if (agent.max_completion_tokens <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                agent.role_name + ": max_completion_tokens must be positive");
  }
  validate(agent.prompt);
}

void to_json(json& j, const TokenUsage& v) {
  j = json{{"prompt_tokens", v.prompt_tokens},
           {"completion_tokens", v.completion_tokens}};
}

void from_json(const json& j, TokenUsage& v) {
  j.at("prompt_tokens").get_to(v.prompt_tokens);
  j.at("completion_tokens").get_to(v.completion_tokens);
}

void to_json(json& j, const ProblemInstance& v) {
  j = json{{"id", v.id},
           {"subject", to_string(v.subject)},
           {"level", v.level},
           {"statement", v.statement},
           {"reference_solution", v.reference_solution},
           {"ground_truth", v.ground_truth}};
}

void from_json(const json& j, ProblemInstance& v) {
  j.at("id").get_to(v.id);
  v.subject = parse_subject(j.at("subject").get<std::string>());
  j.at("level").get_to(v.level);
  j.at("statement").get_to(v.statement);
  j.at("reference_solution").get_to(v.reference_solution);
  j.at("ground_truth").get_to(v.ground_truth);
}

void to_json(json& j, const Message& v) {
  j = json{{"speaker", to_string(v.speaker)},
           {"turn_index", v.turn_index},
           {"content", v.content},
           {"token_usage", nullptr}};
  if (v.token_usage) j["token_usage"] = *v.token_usage;
}

void from_json(const json& j, Message& v) {
  v.speaker = parse_speaker(j.at("speaker").get<std::string>());
  j.at("turn_index").get_to(v.turn_index);
  j.at("content").get_to(v.content);
  v.token_usage.reset();
  if (auto it = j.find("token_usage"); it != j.end() && !it->is_null()) {
    v.token_usage = it->get<TokenUsage>();
  }
}

void to_json(json& j, const Transcript& v) {
  j = json{{"problem_id", v.problem_id},
           {"mode", to_string(v.mode)},
           {"run_index", v.run_index},
           {"messages", v.messages},
           {"final_answer", nullptr},
           {"final_answer_speaker", nullptr},
           {"terminated_by", to_string(v.terminated_by)}};
  if (v.final_answer) j["final_answer"] = *v.final_answer;
  if (v.final_answer_speaker) {
    j["final_answer_speaker"] = to_string(*v.final_answer_speaker);
  }
}

void from_json(const json& j, Transcript& v) {
  j.at("problem_id").get_to(v.problem_id);
  v.mode = parse_mode(j.at("mode").get<std::string>());
  j.at("run_index").get_to(v.run_index);
  j.at("messages").get_to(v.messages);
  v.final_answer = optional_string(j, "final_answer");
  v.final_answer_speaker.reset();
  if (auto s = optional_string(j, "final_answer_speaker")) {
    v.final_answer_speaker = parse_speaker(*s);
  }
  v.terminated_by = parse_termination(j.at("terminated_by").get<std::string>());
}

void to_json(json& j, const PromptTemplate& v) {
  j = json{{"template_id", v.template_id},
           {"persona_text", v.persona_text},
           {"instruction_text", v.instruction_text},
           {"final_answer_instruction", v.final_answer_instruction}};
}

void from_json(const json& j, PromptTemplate& v) {
  j.at("template_id").get_to(v.template_id);
  j.at("persona_text").get_to(v.persona_text);
  j.at("instruction_text").get_to(v.instruction_text);
  j.at("final_answer_instruction").get_to(v.final_answer_instruction);
}

void to_json(json& j, const AgentSpec& v) {
  j = json{{"role_name", v.role_name},
           {"persona", v.prompt.persona_text},
           {"template", v.prompt},
           {"model", v.model},
           {"temperature", v.temperature},
           {"max_completion_tokens", v.max_completion_tokens}};
}

void from_json(const json& j, AgentSpec& v) {
  j.at("role_name").get_to(v.role_name);
  j.at("template").get_to(v.prompt);
  j.at("model").get_to(v.model);
  j.at("temperature").get_to(v.temperature);
  j.at("max_completion_tokens").get_to(v.max_completion_tokens);
}

std::string to_jsonl_line(const Transcript& transcript) {
  return json(transcript).dump(-1, ' ', false, json::error_handler_t::replace);
}

Transcript transcript_from_jsonl_line(std::string_view line) {
  try {
    return json::parse(line).get<Transcript>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string("transcript line: ") + e.what());
  }
}

}  // namespace duetmath
