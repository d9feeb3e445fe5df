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

// Experiment runner and accuracy statistics.
//
// An output directory holds two append-only files written by one writer
// thread: transcripts.jsonl (one Transcript per line) and records.csv (one
// RunRecord per row). Everything else in the directory is derived from
// those two files and can be regenerated with write_reports().

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "duetmath/llm_gateway.h"
#include "duetmath/protocol.h"
#include "duetmath/types.h"

namespace duetmath {

inline constexpr char kTranscriptsFile[] = "transcripts.jsonl";
inline constexpr char kRecordsFile[] = "records.csv";
inline constexpr char kReportCsvFile[] = "report.csv";
inline constexpr char kReportTxtFile[] = "report.txt";
inline constexpr char kFailuresFile[] = "failures.json";

struct RunRecord {
  std::string problem_id;
  Subject subject = Subject::kAlgebra;
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  int run_index = 0;
  std::optional<std::string> produced_answer;
  bool correct = false;
  int rounds_used = 0;
  double wall_time = 0.0;  // seconds
  Termination terminated_by = Termination::kMaxTurns;
  std::optional<std::string> error;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Grades a finished session. The answer counts only when the session ended
/// on the final-answer marker, or for the single agent, whose one reply is
/// its answer whether or not it used the marker. Backend failures and
/// sessions that ran out of rounds score incorrect.
RunRecord grade_outcome(const SessionOutcome& outcome, const ProblemInstance& problem);

/// 100 * correct / total. Records must share (mode, run_index).
/// Throws Error(kEmptyRun) on an empty list, kInvalidArgument if mixed.
double score_run(const std::vector<RunRecord>& records);

struct AccuracyStat {
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  std::optional<Subject> subject;  // nullopt = all subjects pooled
  std::vector<double> per_run_accuracy;
  double mean = 0.0;
  double se = 0.0;
  int n_runs = 0;
  /// Pooled rows only: standard error of the per-subject mean accuracies.
  std::optional<double> se_subjects;
};

/// Mean and standard error (sample sd over n-1, divided by sqrt(n)); se is 0
/// for a single run. Mode and subject are left for the caller to fill.
/// Throws Error(kInvalidArgument) on an empty list.
AccuracyStat aggregate(const std::vector<double>& per_run);

/// One pooled row per mode (mean over runs of the all-subject accuracy of
/// that run) followed by one row per (mode, subject). Modes in table order,
/// subjects in enum order.
std::vector<AccuracyStat> accuracy_table(const std::vector<RunRecord>& records);

/// CSV codec for records.csv.
std::vector<std::string> record_csv_header();
std::vector<std::string> to_csv_fields(const RunRecord& record);
RunRecord record_from_csv_fields(const std::vector<std::string>& fields);

/// Reads the persisted files of an output directory, ignoring a torn final
/// line. Throws Error(kMissingRecords) when records.csv is absent or empty.
std::vector<RunRecord> read_records(const std::filesystem::path& dir);
/// `path` is an output directory or a .jsonl file. Empty when absent.
std::vector<Transcript> read_transcripts(const std::filesystem::path& path);

/// Regenerates report.csv, report.txt and failures.json from the persisted
/// records. `model_label` is the row label of the text table.
void write_reports(const std::filesystem::path& dir, const std::string& model_label);

/// Text rendering of the pooled rows: one row per model, one column per
/// mode, cells "mean_{se}" to two decimals; a per-subject table follows.
std::string render_table(const std::vector<AccuracyStat>& table,
                         const std::string& model_label);

struct SessionKey {
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  const ProblemInstance* problem = nullptr;
  int run_index = 0;
};

/// Supplies the backend one session talks to. Called from worker threads.
using BackendFactory = std::function<std::shared_ptr<ChatBackend>(const SessionKey&)>;

struct ExperimentOptions {
  std::vector<CommunicationMode> modes;
  std::map<CommunicationMode, ModeSpec> specs;
  int n_runs = 3;
  int parallelism = 1;
  std::filesystem::path out_dir;
  std::string model_label = "gpt-4o";
  /// With replay and scripted backends the clock is meaningless and would
  /// make records.csv differ between identical invocations.
  bool measure_wall_time = true;
  /// Called by the writer after each session is flushed to disk, with the
  /// number of sessions persisted so far in this invocation.
  std::function<void(std::size_t persisted)> on_session_persisted;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // all records in the directory, sorted
  std::size_t executed = 0;        // sessions run by this invocation
  std::size_t skipped = 0;         // already present from an earlier invocation
  std::size_t failed = 0;          // records that ended in a backend error
  bool partial_failure() const { return failed > 0; }
};

/// Runs every (mode, problem, run) session not already recorded in
/// out_dir, persisting each as soon as it finishes, then sorts the two
/// persisted files and writes the reports. Throws Error(kConfigError) for
/// n_runs < 1, parallelism < 1, no modes or a mode without a spec.
ExperimentResult run_experiment(const ExperimentOptions& options,
                                const std::vector<ProblemInstance>& problems,
                                const BackendFactory& backends);

}  // namespace duetmath
