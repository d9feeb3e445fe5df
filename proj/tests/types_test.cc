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

#include <gtest/gtest.h>

#include "duetmath/error.h"
#include "test_util.h"

namespace duetmath {
namespace {

using testing::error_code_of;

Transcript two_message_transcript() {
  Transcript t;
  t.problem_id = "algebra/1";
  t.mode = CommunicationMode::kPeerToPeer;
  t.run_index = 2;
  t.messages = {Message{Speaker::kAgentA, 0, "Let us try x = 2.", TokenUsage{12, 5}},
                Message{Speaker::kAgentB, 1, "FINAL ANSWER: \\boxed{2}", std::nullopt}};
  t.final_answer = "\\boxed{2}";
  t.final_answer_speaker = Speaker::kAgentB;
  t.terminated_by = Termination::kFinalAnswerMarker;
  return t;
}

TEST(TypesTest, EnumNamesRoundTrip) {
  for (Subject s : kAllSubjects) EXPECT_EQ(parse_subject(to_string(s)), s);
  for (CommunicationMode m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
  for (Speaker s : {Speaker::kAgentA, Speaker::kAgentB, Speaker::kSolo}) {
    EXPECT_EQ(parse_speaker(to_string(s)), s);
  }
  for (Termination t : {Termination::kFinalAnswerMarker, Termination::kMaxTurns,
                        Termination::kBackendError}) {
    EXPECT_EQ(parse_termination(to_string(t)), t);
  }
  EXPECT_EQ(error_code_of([] { parse_mode("lecture"); }), "invalid_argument");
}

TEST(TypesTest, ModeNames) {
  EXPECT_EQ(to_string(CommunicationMode::kCriticalDebate), "critical_debate");
  EXPECT_EQ(display_name(CommunicationMode::kSingleAgent), "Single Agent");
  EXPECT_FALSE(is_dual(CommunicationMode::kSingleAgent));
  EXPECT_TRUE(is_dual(CommunicationMode::kReciprocalPeer));
}

TEST(TypesTest, ErrorMessageCarriesCode) {
  const Error e(ErrorCode::kReplayMiss, "nothing left");
  EXPECT_EQ(e.code(), ErrorCode::kReplayMiss);
  EXPECT_STREQ(e.what(), "replay_miss: nothing left");
}

TEST(TypesTest, ProblemValidation) {
  ProblemInstance p{"algebra/1", Subject::kAlgebra, 5, "Q", "S \\boxed{1}", "1"};
  EXPECT_NO_THROW(validate(p));
  p.level = 6;
  EXPECT_EQ(error_code_of([&] { validate(p); }), "invalid_argument");
  p.level = 5;
  p.ground_truth.clear();
  EXPECT_EQ(error_code_of([&] { validate(p); }), "invalid_argument");
}

TEST(TypesTest, TranscriptValidation) {
  Transcript t = two_message_transcript();
  EXPECT_NO_THROW(validate(t));

  Transcript same_speaker = t;
  same_speaker.messages[1].speaker = Speaker::kAgentA;
  EXPECT_EQ(error_code_of([&] { validate(same_speaker); }), "invalid_argument");

  Transcript marker_without_answer = t;
  marker_without_answer.final_answer.reset();
  marker_without_answer.final_answer_speaker.reset();
  EXPECT_EQ(error_code_of([&] { validate(marker_without_answer); }), "invalid_argument");

  Transcript bad_index = t;
  bad_index.messages[1].turn_index = 5;
  EXPECT_EQ(error_code_of([&] { validate(bad_index); }), "invalid_argument");
}

TEST(TypesTest, TranscriptIdAndJsonlRoundTrip) {
  const Transcript t = two_message_transcript();
  EXPECT_EQ(t.id(), "peer_to_peer:algebra/1:2");
  const std::string line = to_jsonl_line(t);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(transcript_from_jsonl_line(line), t);
}

TEST(TypesTest, PromptTemplateValidation) {
  PromptTemplate ok{"t", "You are helpful.", "Solve {problem}.\n{history}",
                    "End with FINAL ANSWER: \\boxed{...}"};
  EXPECT_NO_THROW(validate(ok));
  PromptTemplate twice = ok;
  twice.instruction_text = "{problem} {problem} {history}";
  EXPECT_EQ(error_code_of([&] { validate(twice); }), "template_malformed");
  PromptTemplate no_marker = ok;
  no_marker.final_answer_instruction = "Answer at the end.";
  EXPECT_EQ(error_code_of([&] { validate(no_marker); }), "template_malformed");
}

TEST(TypesTest, AgentSpecJsonRoundTrip) {
  AgentSpec a;
  a.role_name = "student";
  a.prompt = PromptTemplate{"t", "p", "{problem}{history}", "FINAL ANSWER: \\boxed{x}"};
  a.temperature = 0.2;
  nlohmann::json j = a;
  EXPECT_EQ(j.get<AgentSpec>(), a);
  a.temperature = 3.0;
  EXPECT_EQ(error_code_of([&] { validate(a); }), "invalid_argument");
}

}  // namespace
}  // namespace duetmath
