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


#include "duetmath/answer.h"

#include <set>

#include <gtest/gtest.h>

#include "duetmath/dataset.h"
#include "oracles.h"

namespace duetmath {
namespace {

using testing::error_code_of;

TEST(RationalTest, ParseForms) {
  EXPECT_EQ(Rational::parse("42"), Rational(42, 1));
  EXPECT_EQ(Rational::parse("-0.125"), Rational(-1, 8));
  EXPECT_EQ(Rational::parse(".5"), Rational(1, 2));
  EXPECT_EQ(Rational::parse("\\frac{6}{8}"), Rational(3, 4));
  EXPECT_EQ(Rational::parse("\\frac{-1}{2}"), Rational(-1, 2));
  EXPECT_EQ(Rational::parse("-\\frac{1}{-2}"), Rational(1, 2));
  EXPECT_EQ(Rational::parse("\\frac{1.5}{3}"), Rational(1, 2));
  EXPECT_EQ(Rational::parse("x"), std::nullopt);
  EXPECT_EQ(Rational::parse("\\frac{1}{0}"), std::nullopt);
  EXPECT_EQ(Rational::parse("99999999999999999999999"), std::nullopt);
  EXPECT_EQ(error_code_of([] { Rational(1, 0); }), "invalid_argument");
  EXPECT_EQ(Rational(4, -6), Rational(-2, 3));
}

TEST(NormalizeTest, Examples) {
  const NormalizedAnswer half = normalize("\\dfrac{1}{2}");
  EXPECT_EQ(half.canonical, "\\frac{1}{2}");
  EXPECT_EQ(half.numeric_value, Rational(1, 2));
  EXPECT_EQ(half.form, AnswerForm::kNumeric);

  const NormalizedAnswer tuple = normalize("\\left( 3, 5 \\right)");
  EXPECT_EQ(tuple.canonical, "(3,5)");
  EXPECT_EQ(tuple.form, AnswerForm::kTuple);

  EXPECT_EQ(normalize(".5").canonical, normalize("0.5").canonical);
  EXPECT_EQ(normalize(".5").numeric_value, Rational(1, 2));
  EXPECT_EQ(normalize("0.5").numeric_value, Rational(1, 2));
}

TEST(NormalizeTest, Forms) {
  EXPECT_EQ(normalize("[1,2)").form, AnswerForm::kInterval);
  EXPECT_EQ(normalize("(-\\infty,0)").form, AnswerForm::kInterval);
  EXPECT_EQ(normalize("(0,1]\\cup[2,3)").form, AnswerForm::kInterval);
  EXPECT_EQ(normalize("x^2+1").form, AnswerForm::kSymbolic);
  EXPECT_EQ(normalize("").form, AnswerForm::kOther);
  EXPECT_EQ(normalize("\\frac{1}{2").form, AnswerForm::kOther);
}

TEST(NormalizeTest, CanonicalInvariants) {
  for (const auto& row : testing::load_answer_golden()) {
    for (const std::string& raw : {row.a, row.b}) {
      const std::string c = normalize(raw).canonical;
      EXPECT_EQ(c.find_first_of(" \t\n"), std::string::npos) << raw;
      EXPECT_EQ(c.find("\\left"), std::string::npos) << raw;
      EXPECT_EQ(c.find("\\right"), std::string::npos) << raw;
      EXPECT_EQ(c.find('$'), std::string::npos) << raw;
      EXPECT_EQ(c.find("\\!"), std::string::npos) << raw;
      EXPECT_EQ(c.find("\\dfrac"), std::string::npos) << raw;
      EXPECT_EQ(c.find("\\tfrac"), std::string::npos) << raw;
    }
  }
}

TEST(NormalizeTest, Idempotent) {
  for (const auto& row : testing::load_answer_golden()) {
    for (const std::string& raw : {row.a, row.b}) {
      const std::string once = normalize(raw).canonical;
      EXPECT_EQ(normalize(once).canonical, once) << raw;
    }
  }
}

TEST(EquivalentTest, Examples) {
  EXPECT_TRUE(equivalent("\\frac{1}{2}", "0.5"));
  EXPECT_TRUE(equivalent("x", "x"));
  EXPECT_FALSE(equivalent("(2,3)", "(3,2)"));
}

TEST(EquivalentTest, GoldenFixture) {
  const auto rows = testing::load_answer_golden();
  ASSERT_GE(rows.size(), 40u);
  const auto failures = testing::golden_failures();
  EXPECT_TRUE(failures.empty()) << ::testing::PrintToString(failures);
}

TEST(EquivalentTest, ReflexiveAndSymmetric) {
  for (const auto& row : testing::load_answer_golden()) {
    if (!row.a.empty()) EXPECT_TRUE(equivalent(row.a, row.a)) << row.a;
    if (!row.b.empty()) EXPECT_TRUE(equivalent(row.b, row.b)) << row.b;
    EXPECT_EQ(equivalent(row.a, row.b), equivalent(row.b, row.a)) << row.a << " | " << row.b;
  }
}

TEST(EquivalentTest, FractionAgainstDecimalExpansion) {
  const testing::PqResult r = testing::check_pq_property();
  EXPECT_GT(r.terminating_checked, 0);
  EXPECT_EQ(r.terminating_checked + r.non_terminating_checked, 2500);
  EXPECT_TRUE(r.failures.empty()) << ::testing::PrintToString(r.failures);
}

TEST(EquivalentTest, LongDivisionOracle) {
  bool t = false;
  EXPECT_EQ(testing::long_division(1, 8, 12, t), "0.125");
  EXPECT_TRUE(t);
  EXPECT_EQ(testing::long_division(1, 3, 4, t), "0.3333");
  EXPECT_FALSE(t);
  EXPECT_EQ(testing::long_division(50, 25, 12, t), "2.0");
  EXPECT_TRUE(t);
}

TEST(EquivalentTest, DistinctFixtureGroundTruthsStayDistinct) {
  std::vector<std::string> truths;
  for (const char* dir : {"math", "ingest"}) {
    for (const auto& p : load_dataset(testing::kFixtures / dir).problems) {
      truths.push_back(p.ground_truth);
    }
  }
  std::set<std::string> distinct_raw(truths.begin(), truths.end());
  std::set<std::string> canon;
  for (const auto& t : distinct_raw) canon.insert(normalize(t).canonical);
  EXPECT_EQ(canon.size(), distinct_raw.size());
  for (auto a = distinct_raw.begin(); a != distinct_raw.end(); ++a) {
    for (auto b = std::next(a); b != distinct_raw.end(); ++b) {
      EXPECT_FALSE(equivalent(*a, *b)) << *a << " | " << *b;
    }
  }
}

TEST(EvaluateRealTest, Arithmetic) {
  EXPECT_NEAR(*evaluate_real("\\frac{\\sqrt{3}}{2}"), std::sqrt(3.0) / 2, 1e-15);
  EXPECT_NEAR(*evaluate_real("2\\sqrt{2}"), 2 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(*evaluate_real("\\sqrt[3]{27}"), 3.0, 1e-12);
  EXPECT_NEAR(*evaluate_real("(1+2)\\cdot3^{2}"), 27.0, 1e-12);
  EXPECT_EQ(evaluate_real("\\sqrt{-1}"), std::nullopt);
  EXPECT_EQ(evaluate_real("x+1"), std::nullopt);
}

SessionOutcome outcome_with(std::optional<std::string> raw, std::vector<Message> messages,
                            CommunicationMode mode = CommunicationMode::kPeerToPeer) {
  SessionOutcome o;
  o.raw_final_answer = std::move(raw);
  o.transcript.mode = mode;
  o.transcript.messages = std::move(messages);
  return o;
}

TEST(ExtractFinalAnswerTest, Cases) {
  EXPECT_EQ(extract_final_answer(outcome_with("\\boxed{7}", {})), "7");
  EXPECT_EQ(extract_final_answer(outcome_with(
                std::nullopt, {Message{Speaker::kAgentA, 0, "thus \\boxed{3\\sqrt{2}}", {}}})),
            "3\\sqrt{2}");
  EXPECT_EQ(extract_final_answer(outcome_with(std::nullopt, {})), std::nullopt);
  EXPECT_EQ(extract_final_answer(outcome_with(
                std::nullopt, {Message{Speaker::kAgentA, 0, "no box here", {}}})),
            std::nullopt);
  // A teacher's box does not count as the session's answer.
  EXPECT_EQ(extract_final_answer(outcome_with(
                std::nullopt,
                {Message{Speaker::kAgentA, 0, "hint: \\boxed{5}", {}}},
                CommunicationMode::kTeacherStudent)),
            std::nullopt);
}

}  // namespace
}  // namespace duetmath
