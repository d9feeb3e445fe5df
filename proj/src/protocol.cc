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

#include "duetmath/protocol.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "duetmath/error.h"

namespace duetmath {

namespace {

struct RoleNames {
  CommunicationMode mode;
  std::string_view agent_a;
  std::string_view agent_b;
};

constexpr RoleNames kRoleNames[] = {
    {CommunicationMode::kSingleAgent, "assistant", ""},
    {CommunicationMode::kTeacherStudent, "teacher", "student"},
    {CommunicationMode::kPeerToPeer, "peer_a", "peer_b"},
    {CommunicationMode::kCriticalDebate, "debater_a", "debater_b"},
    {CommunicationMode::kReciprocalPeer, "tutor", "learner"},
};

const RoleNames& role_names(CommunicationMode mode) {
  for (const auto& r : kRoleNames) {
    if (r.mode == mode) return r;
  }
  return kRoleNames[0];
}

bool iequals_prefix(std::string_view text, std::size_t pos, std::string_view word) {
  if (text.size() - pos < word.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) !=
        std::tolower(static_cast<unsigned char>(word[i]))) {
      return false;
    }
  }
  return true;
}

std::string replace_once(std::string text, std::string_view needle,
                         std::string_view replacement) {
  auto pos = text.find(needle);
  if (pos != std::string::npos) text.replace(pos, needle.size(), replacement);
  return text;
}

std::string history_note(std::size_t n) {
  if (n == 0) return "(no messages exchanged yet)";
  return "(the " + std::to_string(n) + " earlier message" + (n == 1 ? "" : "s") +
         " follow as chat turns)";
}

std::string trim_blank_lines(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

}  // namespace

void validate(const ModeSpec& spec) {
  const bool single = spec.mode == CommunicationMode::kSingleAgent;
  if (single == spec.agent_b.has_value()) {
    throw Error(ErrorCode::kInvalidArgument,
                "agent_b must be absent exactly in single_agent mode");
  }
  const bool reciprocal = spec.mode == CommunicationMode::kReciprocalPeer;
  if (reciprocal != spec.role_swap_every.has_value()) {
    throw Error(ErrorCode::kInvalidArgument,
                "role_swap_every must be set exactly in reciprocal_peer mode");
  }
  if (spec.role_swap_every && *spec.role_swap_every < 1) {
    throw Error(ErrorCode::kInvalidArgument, "role_swap_every must be >= 1");
  }
  if (spec.max_rounds < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_rounds must be >= 1");
  }
  validate(spec.agent_a);
  if (spec.agent_b) {
    validate(*spec.agent_b);
    if (spec.agent_b->role_name == spec.agent_a.role_name) {
      throw Error(ErrorCode::kInvalidArgument, "agent role names must differ");
    }
  }
}

bool may_give_final_answer(CommunicationMode mode, Speaker speaker) {
  // The teacher guides without answering; only the student closes the session.
  if (mode == CommunicationMode::kTeacherStudent) return speaker == Speaker::kAgentB;
  return true;
}

std::optional<std::string> find_final_answer_marker(std::string_view text) {
  std::optional<std::string> found;
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    if (!iequals_prefix(text, pos, kFinalAnswerMarker)) continue;
    std::size_t i = pos + kFinalAnswerMarker.size();
    auto skip = [&] {
      for (;;) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (text.compare(i, 2, "**") == 0 || text.compare(i, 2, "\\(") == 0 ||
            text.compare(i, 2, "\\[") == 0) {
          i += 2;
        } else if (i < text.size() && text[i] == '$') {
          ++i;
        } else {
          return;
        }
      }
    };
    skip();
    constexpr std::string_view kBoxed = "\\boxed{";
    if (text.compare(i, kBoxed.size(), kBoxed) != 0) continue;
    int depth = 0;
    std::size_t j = i + kBoxed.size() - 1;
    for (; j < text.size(); ++j) {
      if (text[j] == '{') ++depth;
      if (text[j] == '}' && --depth == 0) break;
    }
    if (j >= text.size()) continue;
    found = std::string(text.substr(i, j - i + 1));
    pos = j;
  }
  return found;
}

ChatRequest render_prompt(const PromptTemplate& prompt,
                          const ProblemInstance& problem,
                          const Transcript& history, Speaker perspective,
                          const SamplingParams& sampling) {
  validate(prompt);
  ChatRequest request;
  request.model = sampling.model;
  request.temperature = sampling.temperature;
  request.max_tokens = sampling.max_tokens;
  request.system_prompt = prompt.persona_text;
  request.turns.push_back({ChatRole::kSystem, prompt.persona_text});

  std::string instruction = replace_once(prompt.instruction_text, "{problem}",
                                         problem.statement);
  instruction = replace_once(std::move(instruction), "{history}",
                             history_note(history.messages.size()));
  instruction += "\n\n";
  instruction += prompt.final_answer_instruction;
  request.turns.push_back({ChatRole::kUser, std::move(instruction)});

  for (const Message& m : history.messages) {
    const ChatRole role =
        m.speaker == perspective ? ChatRole::kAssistant : ChatRole::kUser;
    request.turns.push_back({role, m.content});
  }
  return request;
}

namespace {

SamplingParams sampling_of(const AgentSpec& agent) {
  return SamplingParams{agent.model, agent.temperature, agent.max_completion_tokens};
}

}  // namespace

SessionOutcome run_session(const ModeSpec& spec, const ProblemInstance& problem,
                           ChatBackend& gateway, int run_index) {
  validate(spec);
  if (!is_dual(spec.mode)) {
    throw Error(ErrorCode::kInvalidArgument,
                "run_session needs a dual-agent mode; use run_single_agent");
  }
  SessionOutcome outcome;
  Transcript& t = outcome.transcript;
  t.problem_id = problem.id;
  t.mode = spec.mode;
  t.run_index = run_index;
  t.terminated_by = Termination::kMaxTurns;

  const AgentSpec& slot_a = spec.agent_a;
  const AgentSpec& slot_b = *spec.agent_b;
  for (int round = 0; round < spec.max_rounds; ++round) {
    outcome.rounds_used = round + 1;
    bool swapped = false;
    if (spec.role_swap_every) swapped = (round / *spec.role_swap_every) % 2 == 1;
    for (Speaker speaker : {Speaker::kAgentA, Speaker::kAgentB}) {
      const AgentSpec& agent = speaker == Speaker::kAgentA ? slot_a : slot_b;
      const AgentSpec& persona_source =
          swapped ? (speaker == Speaker::kAgentA ? slot_b : slot_a) : agent;
      ChatRequest request = render_prompt(persona_source.prompt, problem, t,
                                          speaker, sampling_of(agent));
      ChatResponse response;
      try {
        response = gateway.complete(request);
      } catch (const std::exception& e) {
        t.terminated_by = Termination::kBackendError;
        outcome.error = e.what();
        return outcome;
      }
      if (response.content.empty()) {
        t.terminated_by = Termination::kBackendError;
        outcome.error = "empty_completion: backend returned empty content";
        return outcome;
      }
      t.messages.push_back(Message{speaker, static_cast<int>(t.messages.size()),
                                   response.content, response.token_usage});
      if (!may_give_final_answer(spec.mode, speaker)) continue;
      if (auto answer = find_final_answer_marker(response.content)) {
        t.terminated_by = Termination::kFinalAnswerMarker;
        t.final_answer = *answer;
        t.final_answer_speaker = speaker;
        outcome.raw_final_answer = std::move(answer);
        return outcome;
      }
    }
  }
  return outcome;
}

SessionOutcome run_single_agent(const ModeSpec& spec,
                                const ProblemInstance& problem,
                                ChatBackend& gateway, int run_index) {
  validate(spec);
  if (spec.mode != CommunicationMode::kSingleAgent) {
    throw Error(ErrorCode::kInvalidArgument,
                "run_single_agent needs the single_agent mode");
  }
  SessionOutcome outcome;
  Transcript& t = outcome.transcript;
  t.problem_id = problem.id;
  t.mode = spec.mode;
  t.run_index = run_index;
  t.terminated_by = Termination::kMaxTurns;
  outcome.rounds_used = 1;

  ChatRequest request = render_prompt(spec.agent_a.prompt, problem, t,
                                      Speaker::kSolo, sampling_of(spec.agent_a));
  ChatResponse response;
  try {
    response = gateway.complete(request);
  } catch (const std::exception& e) {
    t.terminated_by = Termination::kBackendError;
    outcome.error = e.what();
    return outcome;
  }
  if (response.content.empty()) {
    t.terminated_by = Termination::kBackendError;
    outcome.error = "empty_completion: backend returned empty content";
    return outcome;
  }
  t.messages.push_back(Message{Speaker::kSolo, 0, response.content, response.token_usage});
  if (auto answer = find_final_answer_marker(response.content)) {
    t.terminated_by = Termination::kFinalAnswerMarker;
    t.final_answer = *answer;
    t.final_answer_speaker = Speaker::kSolo;
    outcome.raw_final_answer = std::move(answer);
  }
  return outcome;
}

SessionOutcome run_mode(const ModeSpec& spec, const ProblemInstance& problem,
                        ChatBackend& gateway, int run_index) {
  if (spec.mode == CommunicationMode::kSingleAgent) {
    return run_single_agent(spec, problem, gateway, run_index);
  }
  return run_session(spec, problem, gateway, run_index);
}

PromptTemplate parse_template(std::string_view text, std::string template_id) {
  PromptTemplate prompt;
  prompt.template_id = std::move(template_id);
  std::string* current = nullptr;
  std::string persona, instruction, final_answer;
  bool seen_persona = false, seen_instruction = false, seen_final = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[persona]") {
      current = &persona;
      seen_persona = true;
    } else if (line == "[instruction]") {
      current = &instruction;
      seen_instruction = true;
    } else if (line == "[final_answer]") {
      current = &final_answer;
      seen_final = true;
    } else if (current != nullptr) {
      *current += line;
      *current += '\n';
    } else if (!trim_blank_lines(line).empty()) {
      throw Error(ErrorCode::kTemplateMalformed,
                  prompt.template_id + ": text before the first section header");
    }
  }
  if (!seen_persona || !seen_instruction || !seen_final) {
    throw Error(ErrorCode::kTemplateMalformed,
                prompt.template_id +
                    ": needs [persona], [instruction] and [final_answer] sections");
  }
  prompt.persona_text = trim_blank_lines(persona);
  prompt.instruction_text = trim_blank_lines(instruction);
  prompt.final_answer_instruction = trim_blank_lines(final_answer);
  validate(prompt);
  return prompt;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot read template " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string id =
      path.parent_path().filename().string() + "/" + path.stem().string();
  return parse_template(buffer.str(), id);
}

ModeSpec load_mode_spec(CommunicationMode mode,
                        const std::filesystem::path& template_dir,
                        const SamplingParams& sampling, int max_rounds,
                        int role_swap_every) {
  const std::filesystem::path dir = template_dir / std::string(to_string(mode));
  const RoleNames& names = role_names(mode);
  auto agent = [&](std::string_view role, std::string_view file) {
    AgentSpec spec;
    spec.role_name = std::string(role);
    spec.prompt = load_template(dir / std::string(file));
    spec.model = sampling.model;
    spec.temperature = sampling.temperature;
    spec.max_completion_tokens = sampling.max_tokens;
    return spec;
  };
  ModeSpec spec;
  spec.mode = mode;
  spec.max_rounds = max_rounds;
  if (mode == CommunicationMode::kSingleAgent) {
    spec.agent_a = agent(names.agent_a, "solo.txt");
  } else {
    spec.agent_a = agent(names.agent_a, "agent_a.txt");
    spec.agent_b = agent(names.agent_b, "agent_b.txt");
  }
  if (mode == CommunicationMode::kReciprocalPeer) spec.role_swap_every = role_swap_every;
  validate(spec);
  return spec;
}

}  // namespace duetmath
