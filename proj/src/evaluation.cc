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
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "duetmath/answer.h"
#include "duetmath/csv.h"
#include "duetmath/error.h"

namespace duetmath {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Key = std::tuple<int, std::string, int>;  // (mode order, problem, run)

Key key_of(CommunicationMode mode, const std::string& problem_id, int run) {
  return {static_cast<int>(mode), problem_id, run};
}
Key key_of(const RunRecord& r) { return key_of(r.mode, r.problem_id, r.run_index); }
Key key_of(const Transcript& t) { return key_of(t.mode, t.problem_id, t.run_index); }

// Shortest text that reads back as the same double ("70.0", "1.1547005383792515").
std::string number_text(double v) { return json(v).dump(); }

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Drops a final line that was cut off mid-write.
std::string drop_torn_tail(std::string text) {
  const auto last_newline = text.rfind('\n');
  text.resize(last_newline == std::string::npos ? 0 : last_newline + 1);
  return text;
}

void write_atomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<RunRecord> parse_records(const std::string& text) {
  std::vector<RunRecord> records;
  const auto rows = csv::parse(drop_torn_tail(text));
  const auto header = record_csv_header();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 && rows[i] == header) continue;
    if (rows[i].size() != header.size()) {
      if (i + 1 == rows.size()) break;  // torn row whose tail held a newline
      throw Error(ErrorCode::kParseError,
                  "records.csv row " + std::to_string(i + 1) + " has " +
                      std::to_string(rows[i].size()) + " fields");
    }
    records.push_back(record_from_csv_fields(rows[i]));
  }
  return records;
}

std::vector<Transcript> parse_transcripts(const std::string& text) {
  std::vector<Transcript> transcripts;
  std::istringstream in(drop_torn_tail(text));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    transcripts.push_back(transcript_from_jsonl_line(line));
  }
  return transcripts;
}

std::string records_document(const std::vector<RunRecord>& records) {
  std::string out = csv::format_row(record_csv_header());
  for (const auto& r : records) out += csv::format_row(to_csv_fields(r));
  return out;
}

std::string transcripts_document(const std::vector<Transcript>& transcripts) {
  std::string out;
  for (const auto& t : transcripts) out += to_jsonl_line(t) + "\n";
  return out;
}

template <typename T>
void sort_by_key(std::vector<T>& items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const T& a, const T& b) { return key_of(a) < key_of(b); });
}

// Single writer for both append-only files.
class Persister {
 public:
  Persister(const fs::path& dir, std::function<void(std::size_t)> hook)
      : hook_(std::move(hook)) {
    const bool fresh = !fs::exists(dir / kRecordsFile);
    records_.open(dir / kRecordsFile, std::ios::binary | std::ios::app);
    transcripts_.open(dir / kTranscriptsFile, std::ios::binary | std::ios::app);
    if (!records_ || !transcripts_) {
      throw Error(ErrorCode::kIoError, "cannot open output files in " + dir.string());
    }
    if (fresh) records_ << csv::format_row(record_csv_header()) << std::flush;
    thread_ = std::thread([this] { loop(); });
  }

  ~Persister() { close(); }

  void submit(Transcript transcript, RunRecord record) {
    {
      std::lock_guard lock(mu_);
      queue_.emplace_back(std::move(transcript), std::move(record));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      closed_ = true;
    }
    cv_.notify_one();
    thread_.join();
    if (failure_) std::rethrow_exception(failure_);
  }

 private:
  void loop() {
    std::size_t persisted = 0;
    for (;;) {
      std::pair<Transcript, RunRecord> item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return closed_ || !queue_.empty(); });
        if (queue_.empty()) return;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      if (failure_) continue;
      try {
        // Transcript first: a record without its transcript would be skipped
        // on resume and its dialogue lost.
        transcripts_ << to_jsonl_line(item.first) << '\n' << std::flush;
        records_ << csv::format_row(to_csv_fields(item.second)) << std::flush;
        if (!transcripts_ || !records_) throw Error(ErrorCode::kIoError, "write failed");
        if (hook_) hook_(++persisted);
      } catch (...) {
        failure_ = std::current_exception();
      }
    }
  }

  std::function<void(std::size_t)> hook_;
  std::ofstream records_;
  std::ofstream transcripts_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<Transcript, RunRecord>> queue_;
  bool closed_ = false;
  std::exception_ptr failure_;
  std::thread thread_;
};

// Keeps only sessions present in both files and rewrites them, so a crash
// between the two appends cannot leave a half-recorded session behind.
std::set<Key> reconcile_existing(const fs::path& dir) {
  const fs::path records_path = dir / kRecordsFile;
  const fs::path transcripts_path = dir / kTranscriptsFile;
  if (!fs::exists(records_path) && !fs::exists(transcripts_path)) return {};
  std::vector<RunRecord> records;
  std::vector<Transcript> transcripts;
  if (fs::exists(records_path)) records = parse_records(read_text(records_path));
  if (fs::exists(transcripts_path)) transcripts = parse_transcripts(read_text(transcripts_path));

  std::set<Key> in_records;
  std::set<Key> in_transcripts;
  for (const auto& r : records) in_records.insert(key_of(r));
  for (const auto& t : transcripts) in_transcripts.insert(key_of(t));
  std::set<Key> done;
  std::set_intersection(in_records.begin(), in_records.end(), in_transcripts.begin(),
                        in_transcripts.end(), std::inserter(done, done.end()));

  std::erase_if(records, [&](const RunRecord& r) { return !done.count(key_of(r)); });
  std::erase_if(transcripts, [&](const Transcript& t) { return !done.count(key_of(t)); });
  write_atomically(records_path, records_document(records));
  write_atomically(transcripts_path, transcripts_document(transcripts));
  return done;
}

void finalize_files(const fs::path& dir) {
  auto records = parse_records(read_text(dir / kRecordsFile));
  auto transcripts = parse_transcripts(read_text(dir / kTranscriptsFile));
  sort_by_key(records);
  sort_by_key(transcripts);
  write_atomically(dir / kRecordsFile, records_document(records));
  write_atomically(dir / kTranscriptsFile, transcripts_document(transcripts));
}

}  // namespace

RunRecord grade_outcome(const SessionOutcome& outcome, const ProblemInstance& problem) {
  const Transcript& t = outcome.transcript;
  RunRecord r;
  r.problem_id = problem.id;
  r.subject = problem.subject;
  r.mode = t.mode;
  r.run_index = t.run_index;
  r.rounds_used = outcome.rounds_used;
  r.terminated_by = t.terminated_by;
  r.error = outcome.error;
  const bool answered =
      t.terminated_by == Termination::kFinalAnswerMarker ||
      (t.mode == CommunicationMode::kSingleAgent && t.terminated_by != Termination::kBackendError);
  if (answered) r.produced_answer = extract_final_answer(outcome);
  r.correct = r.produced_answer && equivalent(*r.produced_answer, problem.ground_truth);
  return r;
}

double score_run(const std::vector<RunRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyRun, "no records to score");
  const auto& first = records.front();
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.mode != first.mode || r.run_index != first.run_index) {
      throw Error(ErrorCode::kInvalidArgument, "records mix modes or runs");
    }
    if (r.correct) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(records.size());
}

AccuracyStat aggregate(const std::vector<double>& per_run) {
  if (per_run.empty()) throw Error(ErrorCode::kInvalidArgument, "no runs to aggregate");
  AccuracyStat stat;
  stat.per_run_accuracy = per_run;
  stat.n_runs = static_cast<int>(per_run.size());
  double sum = 0.0;
  for (double v : per_run) sum += v;
  stat.mean = sum / stat.n_runs;
  if (stat.n_runs > 1) {
    double ss = 0.0;
    for (double v : per_run) ss += (v - stat.mean) * (v - stat.mean);
    stat.se = std::sqrt(ss / (stat.n_runs - 1)) / std::sqrt(static_cast<double>(stat.n_runs));
  }
  return stat;
}

std::vector<AccuracyStat> accuracy_table(const std::vector<RunRecord>& records) {
  std::map<CommunicationMode, std::map<int, std::vector<RunRecord>>> pooled;
  std::map<std::pair<CommunicationMode, Subject>, std::map<int, std::vector<RunRecord>>> split;
  for (const auto& r : records) {
    pooled[r.mode][r.run_index].push_back(r);
    split[{r.mode, r.subject}][r.run_index].push_back(r);
  }
  auto per_run = [](const std::map<int, std::vector<RunRecord>>& runs) {
    std::vector<double> acc;
    for (const auto& [run, rs] : runs) acc.push_back(score_run(rs));
    return acc;
  };

  std::vector<AccuracyStat> table;
  for (const auto& [mode, runs] : pooled) {
    AccuracyStat stat = aggregate(per_run(runs));
    stat.mode = mode;
    std::vector<double> subject_means;
    for (const auto& [key, subject_runs] : split) {
      if (key.first == mode) subject_means.push_back(aggregate(per_run(subject_runs)).mean);
    }
    stat.se_subjects = aggregate(subject_means).se;
    table.push_back(std::move(stat));
  }
  for (const auto& [key, runs] : split) {
    AccuracyStat stat = aggregate(per_run(runs));
    stat.mode = key.first;
    stat.subject = key.second;
    table.push_back(std::move(stat));
  }
  return table;
}

std::vector<std::string> record_csv_header() {
  return {"problem_id", "subject",      "mode",          "run_index", "produced_answer",
          "correct",    "rounds_used",  "wall_time",     "terminated_by", "error"};
}

std::vector<std::string> to_csv_fields(const RunRecord& r) {
  // An absent answer is an empty field; a present but empty one cannot occur
  // because extraction never yields "".
  return {r.problem_id,
          std::string(to_string(r.subject)),
          std::string(to_string(r.mode)),
          std::to_string(r.run_index),
          r.produced_answer.value_or(""),
          r.correct ? "true" : "false",
          std::to_string(r.rounds_used),
          number_text(r.wall_time),
          std::string(to_string(r.terminated_by)),
          r.error.value_or("")};
}

RunRecord record_from_csv_fields(const std::vector<std::string>& f) {
  if (f.size() != record_csv_header().size()) {
    throw Error(ErrorCode::kParseError, "record has " + std::to_string(f.size()) + " fields");
  }
  try {
    RunRecord r;
    r.problem_id = f[0];
    r.subject = parse_subject(f[1]);
    r.mode = parse_mode(f[2]);
    r.run_index = std::stoi(f[3]);
    if (!f[4].empty()) r.produced_answer = f[4];
    if (f[5] != "true" && f[5] != "false") {
      throw Error(ErrorCode::kParseError, "correct must be true or false");
    }
    r.correct = f[5] == "true";
    r.rounds_used = std::stoi(f[6]);
    r.wall_time = std::stod(f[7]);
    r.terminated_by = parse_termination(f[8]);
    if (!f[9].empty()) r.error = f[9];
    return r;
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kParseError, std::string("bad record field: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw;
    throw Error(ErrorCode::kParseError, e.what());
  }
}

std::vector<RunRecord> read_records(const fs::path& dir) {
  const fs::path path = dir / kRecordsFile;
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingRecords, "no " + std::string(kRecordsFile) + " in " +
                                                dir.string());
  }
  auto records = parse_records(read_text(path));
  if (records.empty()) {
    throw Error(ErrorCode::kMissingRecords, path.string() + " holds no records");
  }
  return records;
}

std::vector<Transcript> read_transcripts(const fs::path& source) {
  const fs::path path = fs::is_directory(source) ? source / kTranscriptsFile : source;
  if (!fs::exists(path)) return {};
  return parse_transcripts(read_text(path));
}

std::string render_table(const std::vector<AccuracyStat>& table,
                         const std::string& model_label) {
  std::vector<CommunicationMode> modes;
  std::set<Subject> subjects;
  std::map<std::pair<CommunicationMode, std::optional<Subject>>, const AccuracyStat*> cells;
  int n_runs = 0;
  for (const auto& stat : table) {
    if (!stat.subject) {
      modes.push_back(stat.mode);
      n_runs = std::max(n_runs, stat.n_runs);
    } else {
      subjects.insert(*stat.subject);
    }
    cells[{stat.mode, stat.subject}] = &stat;
  }
  std::sort(modes.begin(), modes.end());

  auto cell_text = [&](CommunicationMode mode, std::optional<Subject> subject) {
    auto it = cells.find({mode, subject});
    if (it == cells.end()) return std::string("-");
    return fixed2(it->second->mean) + "_{" + fixed2(it->second->se) + "}";
  };
  auto render = [&](const std::string& corner, const std::vector<std::string>& row_labels,
                    const std::vector<std::optional<Subject>>& row_subjects) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({corner});
    for (auto m : modes) grid[0].emplace_back(display_name(m));
    for (std::size_t i = 0; i < row_labels.size(); ++i) {
      std::vector<std::string> row{row_labels[i]};
      for (auto m : modes) row.push_back(cell_text(m, row_subjects[i]));
      grid.push_back(std::move(row));
    }
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& row : grid) {
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    for (const auto& row : grid) {
      std::string line;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c > 0) line += "  ";
        line += row[c];
        if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
      }
      out += line + "\n";
    }
    return out;
  };

  std::string out = "Average accuracy (%) by communication mode, mean_{SE} over " +
                    std::to_string(n_runs) + (n_runs == 1 ? " run" : " runs") + "\n\n";
  out += render("Model", {model_label}, {std::nullopt});
  if (!subjects.empty()) {
    std::vector<std::string> labels;
    std::vector<std::optional<Subject>> keys;
    for (auto s : subjects) {
      labels.emplace_back(to_string(s));
      keys.emplace_back(s);
    }
    out += "\nPer subject\n\n" + render("Subject", labels, keys);
  }
  return out;
}

void write_reports(const fs::path& dir, const std::string& model_label) {
  auto records = read_records(dir);
  sort_by_key(records);
  const auto table = accuracy_table(records);

  std::string report_csv =
      csv::format_row({"mode", "subject", "mean", "se", "n_runs", "se_subjects"});
  for (const auto& stat : table) {
    report_csv += csv::format_row(
        {std::string(to_string(stat.mode)),
         stat.subject ? std::string(to_string(*stat.subject)) : "all", number_text(stat.mean),
         number_text(stat.se), std::to_string(stat.n_runs),
         stat.se_subjects ? number_text(*stat.se_subjects) : ""});
  }
  write_atomically(dir / kReportCsvFile, report_csv);
  write_atomically(dir / kReportTxtFile, render_table(table, model_label));

  json failures = json::array();
  for (const auto& r : records) {
    if (r.terminated_by != Termination::kBackendError) continue;
    failures.push_back({{"problem_id", r.problem_id},
                        {"mode", to_string(r.mode)},
                        {"run_index", r.run_index},
                        {"error", r.error.value_or("")}});
  }
  json manifest{{"count", failures.size()},
                {"total_sessions", records.size()},
                {"failures", failures}};
  write_atomically(dir / kFailuresFile, manifest.dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentOptions& options,
                                const std::vector<ProblemInstance>& problems,
                                const BackendFactory& backends) {
  if (options.n_runs < 1) throw Error(ErrorCode::kConfigError, "n_runs must be >= 1");
  if (options.parallelism < 1) throw Error(ErrorCode::kConfigError, "parallelism must be >= 1");
  if (options.modes.empty()) throw Error(ErrorCode::kConfigError, "no modes selected");
  for (auto mode : options.modes) {
    if (!options.specs.count(mode)) {
      throw Error(ErrorCode::kConfigError,
                  "no mode spec for " + std::string(to_string(mode)));
    }
  }
  fs::create_directories(options.out_dir);

  const std::set<Key> done = reconcile_existing(options.out_dir);
  std::vector<SessionKey> pending;
  ExperimentResult result;
  for (auto mode : options.modes) {
    for (const auto& problem : problems) {
      for (int run = 0; run < options.n_runs; ++run) {
        if (done.count(key_of(mode, problem.id, run))) {
          ++result.skipped;
        } else {
          pending.push_back({mode, &problem, run});
        }
      }
    }
  }
  std::sort(pending.begin(), pending.end(), [](const SessionKey& a, const SessionKey& b) {
    return key_of(a.mode, a.problem->id, a.run_index) <
           key_of(b.mode, b.problem->id, b.run_index);
  });

  {
    Persister persister(options.out_dir, options.on_session_persisted);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < pending.size(); i = next++) {
        const SessionKey& key = pending[i];
        const auto start = std::chrono::steady_clock::now();
        SessionOutcome outcome;
        try {
          auto backend = backends(key);
          if (!backend) throw Error(ErrorCode::kBackendError, "no backend for session");
          outcome = run_mode(options.specs.at(key.mode), *key.problem, *backend,
                             key.run_index);
        } catch (const std::exception& e) {
          outcome = SessionOutcome{};
          outcome.transcript.problem_id = key.problem->id;
          outcome.transcript.mode = key.mode;
          outcome.transcript.run_index = key.run_index;
          outcome.transcript.terminated_by = Termination::kBackendError;
          outcome.error = e.what();
        }
        RunRecord record = grade_outcome(outcome, *key.problem);
        if (options.measure_wall_time) {
          record.wall_time =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        persister.submit(std::move(outcome.transcript), std::move(record));
      }
    };
    const int n_threads =
        static_cast<int>(std::min<std::size_t>(options.parallelism, std::max<std::size_t>(pending.size(), 1)));
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    persister.close();
  }
  result.executed = pending.size();

  finalize_files(options.out_dir);
  write_reports(options.out_dir, options.model_label);
  result.records = read_records(options.out_dir);
  result.failed = static_cast<std::size_t>(std::count_if(
      result.records.begin(), result.records.end(),
      [](const RunRecord& r) { return r.terminated_by == Termination::kBackendError; }));
  return result;
}

}  // namespace duetmath
