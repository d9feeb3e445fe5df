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


#include "duetmath/evaluation.h"

#include <algorithm>
#include <atomic>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "duetmath/answer.h"
#include "duetmath/csv.h"
#include "oracles.h"

namespace duetmath {
namespace {

using testing::error_code_of;
using testing::read_file;
using testing::TempDir;

RunRecord record(const std::string& id, bool correct, CommunicationMode mode = CommunicationMode::kPeerToPeer,
                 int run = 0, Subject subject = Subject::kAlgebra) {
  RunRecord r;
  r.problem_id = id;
  r.subject = subject;
  r.mode = mode;
  r.run_index = run;
  r.correct = correct;
  r.produced_answer = correct ? "1" : "2";
  r.terminated_by = Termination::kFinalAnswerMarker;
  return r;
}

TEST(ScoreRunTest, Examples) {
  std::vector<RunRecord> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(record("algebra/" + std::to_string(i), i < 7));
  EXPECT_DOUBLE_EQ(score_run(ten), 70.0);
  for (auto& r : ten) r.correct = false;
  EXPECT_DOUBLE_EQ(score_run(ten), 0.0);
  EXPECT_EQ(error_code_of([] { score_run({}); }), "empty_run");
  ten[3].run_index = 1;
  EXPECT_EQ(error_code_of([&] { score_run(ten); }), "invalid_argument");
}

TEST(ScoreRunTest, HandGradedBatchOfTwenty) {
  const auto rows = csv::parse(read_file(testing::kFixtures / "eval_batch.csv"));
  ASSERT_EQ(rows.size(), 21u);
  std::vector<RunRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool correct = equivalent(rows[i][2], rows[i][1]);
    EXPECT_EQ(correct, rows[i][3] == "true") << rows[i][0];
    records.push_back(record(rows[i][0], correct));
  }
  EXPECT_DOUBLE_EQ(score_run(records), 65.0);
}

TEST(AggregateTest, Examples) {
  const AccuracyStat flat = aggregate({50.0, 50.0, 50.0});
  EXPECT_DOUBLE_EQ(flat.mean, 50.0);
  EXPECT_DOUBLE_EQ(flat.se, 0.0);

  const AccuracyStat spread = aggregate({50.0, 52.0, 54.0});
  EXPECT_DOUBLE_EQ(spread.mean, 52.0);
  EXPECT_NEAR(spread.se, 2.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(spread.se, 1.1547005383792515, 1e-9);
  EXPECT_EQ(spread.n_runs, 3);

  const AccuracyStat one = aggregate({47.0});
  EXPECT_DOUBLE_EQ(one.mean, 47.0);
  EXPECT_DOUBLE_EQ(one.se, 0.0);
  EXPECT_EQ(one.n_runs, 1);
  EXPECT_EQ(error_code_of([] { aggregate({}); }), "invalid_argument");
}

TEST(AggregateTest, MatchesTwoPassOracleAndIsPermutationInvariant) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> acc(0.0, 100.0);
  std::uniform_int_distribution<int> len(2, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(len(rng));
    for (auto& e : v) e = acc(rng);
    const AccuracyStat s = aggregate(v);
    EXPECT_NEAR(s.se, testing::two_pass_se(v), 1e-9);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(aggregate(v).mean, s.mean, 1e-9);
  }
}

TEST(AccuracyTableTest, PooledThenPerSubject) {
  std::vector<RunRecord> records;
  // Two runs; algebra 2/2 then 1/2, geometry 0/2 then 1/2.
  for (int run = 0; run < 2; ++run) {
    records.push_back(record("algebra/1", true, CommunicationMode::kSingleAgent, run));
    records.push_back(record("algebra/2", run == 0, CommunicationMode::kSingleAgent, run));
    records.push_back(record("geometry/1", false, CommunicationMode::kSingleAgent, run,
                             Subject::kGeometry));
    records.push_back(record("geometry/2", run == 1, CommunicationMode::kSingleAgent, run,
                             Subject::kGeometry));
  }
  const auto table = accuracy_table(records);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_FALSE(table[0].subject.has_value());
  EXPECT_EQ(table[0].per_run_accuracy, (std::vector<double>{50.0, 50.0}));
  EXPECT_DOUBLE_EQ(table[0].mean, 50.0);
  EXPECT_DOUBLE_EQ(table[0].se, 0.0);
  ASSERT_TRUE(table[0].se_subjects.has_value());
  // Subject means 75 and 25: sd 35.355..., se 25.
  EXPECT_NEAR(*table[0].se_subjects, 25.0, 1e-12);
  EXPECT_EQ(table[1].subject, Subject::kAlgebra);
  EXPECT_DOUBLE_EQ(table[1].mean, 75.0);
  EXPECT_NEAR(table[1].se, 25.0, 1e-12);
  EXPECT_EQ(table[2].subject, Subject::kGeometry);
  EXPECT_DOUBLE_EQ(table[2].mean, 25.0);
}

TEST(RecordCsvTest, RoundTrip) {
  RunRecord r = record("counting_and_probability/3", true);
  r.produced_answer = "\\frac{1}{2}, \"quoted\"\nline";
  r.wall_time = 1.25;
  r.error = std::nullopt;
  EXPECT_EQ(record_from_csv_fields(to_csv_fields(r)), r);
  r.produced_answer.reset();
  r.terminated_by = Termination::kBackendError;
  r.error = "transport_error: reset";
  EXPECT_EQ(record_from_csv_fields(to_csv_fields(r)), r);
  EXPECT_EQ(error_code_of([] { record_from_csv_fields({"a"}); }), "parse_error");
}

TEST(ReadRecordsTest, MissingOrEmptyDirectory) {
  TempDir dir;
  EXPECT_EQ(error_code_of([&] { read_records(dir.path()); }), "missing_records");
  EXPECT_TRUE(read_transcripts(dir.path()).empty());
}

// A tiny experiment: `n` problems, every mode answered by a reply function.
struct Fixture {
  std::vector<ProblemInstance> problems;
  ExperimentOptions options;
};

Fixture small_experiment(const std::filesystem::path& out, std::vector<CommunicationMode> modes,
                         int n_problems = 4, int n_runs = 2) {
  Fixture f;
  for (int i = 0; i < n_problems; ++i) {
    const Subject s = i % 2 == 0 ? Subject::kAlgebra : Subject::kPrealgebra;
    f.problems.push_back(ProblemInstance{std::string(to_string(s)) + "/" + std::to_string(i), s,
                                         5, "What is " + std::to_string(i) + "?", "",
                                         std::to_string(i)});
  }
  f.options.modes = std::move(modes);
  for (auto m : f.options.modes) {
    f.options.specs[m] = load_mode_spec(m, DUETMATH_DEFAULT_TEMPLATE_DIR, {}, 3);
  }
  f.options.n_runs = n_runs;
  f.options.parallelism = 3;
  f.options.out_dir = out;
  f.options.measure_wall_time = false;
  return f;
}

// Answers correctly on even problem numbers when run_index is 0, always on
// odd ones, and never otherwise.
BackendFactory deterministic_backends() {
  return [](const SessionKey& key) -> std::shared_ptr<ChatBackend> {
    const int n = std::stoi(key.problem->ground_truth);
    const bool right = n % 2 == 1 || key.run_index == 0;
    const std::string answer = right ? key.problem->ground_truth : "999";
    return std::make_shared<ScriptedBackend>(
        std::vector<std::string>{"FINAL ANSWER: \\boxed{" + answer + "}"});
  };
}

TEST(RunExperimentTest, ConfigErrors) {
  TempDir dir;
  Fixture f = small_experiment(dir.path(), {CommunicationMode::kSingleAgent});
  f.options.n_runs = 0;
  EXPECT_EQ(error_code_of([&] { run_experiment(f.options, f.problems, deterministic_backends()); }),
            "config_error");
  f.options.n_runs = 1;
  f.options.parallelism = 0;
  EXPECT_EQ(error_code_of([&] { run_experiment(f.options, f.problems, deterministic_backends()); }),
            "config_error");
  f.options.parallelism = 1;
  f.options.modes.push_back(CommunicationMode::kCriticalDebate);
  EXPECT_EQ(error_code_of([&] { run_experiment(f.options, f.problems, deterministic_backends()); }),
            "config_error");
}

TEST(RunExperimentTest, SingleModeTableHasOneDataColumn) {
  TempDir dir;
  Fixture f = small_experiment(dir.path(), {CommunicationMode::kSingleAgent});
  const ExperimentResult r = run_experiment(f.options, f.problems, deterministic_backends());
  EXPECT_EQ(r.executed, 8u);
  EXPECT_EQ(r.records.size(), 8u);
  const std::string txt = read_file(dir / kReportTxtFile);
  EXPECT_NE(txt.find("Single Agent"), std::string::npos);
  EXPECT_EQ(txt.find("Peer-to-Peer"), std::string::npos);
  // Run 0: 4/4 correct; run 1: 2/4.
  const auto rows = csv::parse(read_file(dir / kReportCsvFile));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "single_agent");
  EXPECT_EQ(rows[1][1], "all");
  EXPECT_EQ(rows[1][2], "75.0");
  EXPECT_EQ(rows[1][3], "25.0");
}

TEST(RunExperimentTest, EveryTableCellRecomputesFromPersistedRecords) {
  TempDir dir;
  Fixture f = small_experiment(dir.path(), {CommunicationMode::kSingleAgent,
                                            CommunicationMode::kPeerToPeer,
                                            CommunicationMode::kTeacherStudent});
  run_experiment(f.options, f.problems, deterministic_backends());
  const auto table = accuracy_table(read_records(dir.path()));
  const auto rows = csv::parse(read_file(dir / kReportCsvFile));
  ASSERT_EQ(rows.size(), table.size() + 1);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = rows[i + 1];
    EXPECT_EQ(row[0], to_string(table[i].mode));
    EXPECT_EQ(std::stod(row[2]), table[i].mean);
    EXPECT_EQ(std::stod(row[3]), table[i].se);
    EXPECT_EQ(std::stoi(row[4]), table[i].n_runs);
  }
  const auto failures = nlohmann::json::parse(read_file(dir / kFailuresFile));
  EXPECT_EQ(failures["count"], 0);
  EXPECT_EQ(failures["total_sessions"], 24);
  // Transcripts and records cover the same sessions.
  EXPECT_EQ(read_transcripts(dir.path()).size(), 24u);
}

TEST(RunExperimentTest, BackendFailuresAreRecordedAndReported) {
  TempDir dir;
  Fixture f = small_experiment(dir.path(), {CommunicationMode::kPeerToPeer}, 2, 1);
  const BackendFactory flaky = [](const SessionKey& key) -> std::shared_ptr<ChatBackend> {
    if (key.problem->id == "algebra/0") throw Error(ErrorCode::kAuthError, "no key");
    return std::make_shared<ReplayBackend>(Cassette{});
  };
  const ExperimentResult r = run_experiment(f.options, f.problems, flaky);
  EXPECT_TRUE(r.partial_failure());
  EXPECT_EQ(r.failed, 2u);
  const auto failures = nlohmann::json::parse(read_file(dir / kFailuresFile));
  EXPECT_EQ(failures["count"], 2);
  for (const auto& rec : r.records) EXPECT_FALSE(rec.correct);
}

TEST(RunExperimentTest, ResumeSkipsRecordedSessionsAndIgnoresTornTail) {
  TempDir full_dir, partial_dir;
  const std::vector<CommunicationMode> modes = {CommunicationMode::kSingleAgent,
                                                CommunicationMode::kCriticalDebate};
  Fixture full = small_experiment(full_dir.path(), modes);
  run_experiment(full.options, full.problems, deterministic_backends());

  // Keep 5 complete sessions, one record without its transcript, and a
  // torn final line in each file.
  const auto records = csv::parse(read_file(full_dir / kRecordsFile));
  std::string records_text = csv::format_row(records[0]);
  for (int i = 1; i <= 6; ++i) records_text += csv::format_row(records[i]);
  records_text += "algebra/2,alge";
  std::string transcripts_text;
  std::istringstream lines(read_file(full_dir / kTranscriptsFile));
  std::string line;
  for (int i = 0; i < 5 && std::getline(lines, line); ++i) transcripts_text += line + "\n";
  transcripts_text += "{\"problem_id\":\"alg";
  testing::write_file(partial_dir / kRecordsFile, records_text);
  testing::write_file(partial_dir / kTranscriptsFile, transcripts_text);

  Fixture partial = small_experiment(partial_dir.path(), modes);
  const ExperimentResult r =
      run_experiment(partial.options, partial.problems, deterministic_backends());
  EXPECT_EQ(r.skipped, 5u);
  EXPECT_EQ(r.executed, 11u);
  for (const char* file : {kReportTxtFile, kReportCsvFile, kRecordsFile, kTranscriptsFile}) {
    EXPECT_EQ(read_file(partial_dir / file), read_file(full_dir / file)) << file;
  }

  // A third invocation has nothing left to do.
  const ExperimentResult again =
      run_experiment(partial.options, partial.problems, deterministic_backends());
  EXPECT_EQ(again.executed, 0u);
  EXPECT_EQ(again.skipped, 16u);
}

TEST(RunExperimentTest, PersistHookSeesEverySession) {
  TempDir dir;
  Fixture f = small_experiment(dir.path(), {CommunicationMode::kReciprocalPeer}, 3, 1);
  std::atomic<std::size_t> last{0};
  f.options.on_session_persisted = [&](std::size_t n) { last = n; };
  run_experiment(f.options, f.problems, deterministic_backends());
  EXPECT_EQ(last.load(), 3u);
}

TEST(GradeOutcomeTest, AnswerCountsOnlyOnMarkerOrSingleAgent) {
  const ProblemInstance p{"algebra/1", Subject::kAlgebra, 5, "Q", "", "7"};
  SessionOutcome dual;
  dual.transcript.mode = CommunicationMode::kPeerToPeer;
  dual.transcript.messages = {Message{Speaker::kAgentA, 0, "maybe \\boxed{7}", {}}};
  dual.transcript.terminated_by = Termination::kMaxTurns;
  EXPECT_FALSE(grade_outcome(dual, p).correct);

  dual.transcript.terminated_by = Termination::kFinalAnswerMarker;
  dual.raw_final_answer = "\\boxed{7}";
  EXPECT_TRUE(grade_outcome(dual, p).correct);

  SessionOutcome solo;
  solo.transcript.mode = CommunicationMode::kSingleAgent;
  solo.transcript.messages = {Message{Speaker::kSolo, 0, "so \\boxed{7.0}", {}}};
  const RunRecord r = grade_outcome(solo, p);
  EXPECT_TRUE(r.correct);
  EXPECT_EQ(r.produced_answer, "7.0");
}

}  // namespace
}  // namespace duetmath
