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

// duetmath: run dual-agent experiments, score and report them, analyze
// their dialogue acts, and manage replay cassettes.
//
// Exit codes: 0 success, 1 partial failure (some sessions ended in a backend
// error; reports still cover every completed session), 2 configuration or
// usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duetmath/config.h"
#include "duetmath/dialogue.h"
#include "duetmath/error.h"
#include "duetmath/evaluation.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace duetmath;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;
constexpr char kResolvedConfigFile[] = "config.resolved.json";
constexpr char kManifestFile[] = "dataset_manifest.json";

struct RunFlags {
  std::string config;
  std::optional<std::string> backend;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::string> cassette;
  std::optional<std::string> script;
  std::optional<std::string> templates;
  std::optional<std::string> model;
  std::optional<std::string> modes;
  std::optional<int> runs;
  std::optional<int> parallelism;
  std::optional<int> max_rounds;
  std::optional<int> level;
  std::optional<int> quota;
  std::optional<double> rpm;
  bool lenient = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (.toml or .json)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--backend", f.backend, "live | replay | scripted (overrides config)")
      ->check(CLI::IsMember({"live", "replay", "scripted"}));
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--dataset", f.dataset, "Dataset root directory");
  cmd->add_option("--cassette", f.cassette, "Cassette directory for replay");
  cmd->add_option("--script", f.script, "Reply script for the scripted backend");
  cmd->add_option("--templates", f.templates, "Prompt template directory");
  cmd->add_option("--model", f.model, "Model name");
  cmd->add_option("--modes", f.modes, "Comma-separated communication modes");
  cmd->add_option("--runs", f.runs, "Independent runs per problem");
  cmd->add_option("--parallelism", f.parallelism, "Concurrent sessions");
  cmd->add_option("--max-rounds", f.max_rounds, "Exchange rounds per dual-agent session");
  cmd->add_option("--level", f.level, "Only problems of this difficulty level");
  cmd->add_option("--quota", f.quota, "At most this many problems per subject");
  cmd->add_option("--rpm", f.rpm, "Live backend requests-per-minute cap");
  cmd->add_flag("--lenient-replay", f.lenient, "Match cassette entries by fingerprint in any order");
}

json overrides_from(const RunFlags& f) {
  json o = json::object();
  if (f.backend) o["backend"] = *f.backend;
  if (f.out) o["out"] = *f.out;
  if (f.dataset) o["dataset"] = *f.dataset;
  if (f.cassette) o["cassette"] = *f.cassette;
  if (f.script) o["script"] = *f.script;
  if (f.templates) o["templates"] = *f.templates;
  if (f.model) o["model"] = *f.model;
  if (f.modes) o["modes"] = *f.modes;
  if (f.runs) o["n_runs"] = *f.runs;
  if (f.parallelism) o["parallelism"] = *f.parallelism;
  if (f.max_rounds) o["max_rounds"] = *f.max_rounds;
  if (f.level) o["level"] = *f.level;
  if (f.quota) o["quota"] = *f.quota;
  if (f.rpm) o["requests_per_minute"] = *f.rpm;
  if (f.lenient) o["replay_lenient"] = true;
  return o;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string model_label(const fs::path& dir) {
  std::ifstream in(dir / kResolvedConfigFile);
  if (!in) return "model";
  try {
    const json j = json::parse(in);
    if (j.contains("model") && j["model"].is_string()) return j["model"].get<std::string>();
  } catch (const json::exception&) {
  }
  return "model";
}

// Everything derived from the persisted records and transcripts.
void emit_reports(const fs::path& dir, const std::string& label) {
  write_reports(dir, label);
  RuleClassifier rules;
  const auto transcripts = read_transcripts(dir);
  const auto dists = distribution_by_mode(transcripts, rules);
  write_text(dir / kHistogramFile, histogram_json(dists).dump(2) + "\n");
}

int execute_run(const RunFlags& flags, const std::optional<fs::path>& record_to) {
  ExperimentConfig config = parse_config(flags.config, overrides_from(flags));
  PreparedRun prepared = prepare_run(config, record_to);
  fs::create_directories(config.out);
  write_text(config.out / kResolvedConfigFile, to_json(config).dump(2) + "\n");
  write_text(config.out / kManifestFile, to_json(prepared.manifest).dump(2) + "\n");
  for (const auto& excluded : prepared.manifest.excluded) {
    std::cerr << "excluded " << excluded.path.string() << ": " << excluded.detail << "\n";
  }
  if (prepared.problems.empty()) {
    throw Error(ErrorCode::kConfigError, "no problems selected from " + config.dataset.string());
  }

  const ExperimentResult result =
      run_experiment(prepared.options, prepared.problems, prepared.backends);
  emit_reports(config.out, config.model);
  std::cout << read_text_file(config.out / kReportTxtFile);
  std::cerr << result.executed << " session(s) run, " << result.skipped
            << " already recorded, " << result.failed << " failed\n";
  return result.partial_failure() ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-agent math problem solving: run, score, report, analyze"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "duetmath 0.1.0");

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment and write records and reports");
  add_run_flags(run_cmd, run_flags);

  std::string score_dir;
  auto* score_cmd = app.add_subcommand("score", "Print the accuracy table of a records directory");
  score_cmd->add_option("--records", score_dir, "Output directory of a run")->required();

  std::string report_dir;
  auto* report_cmd =
      app.add_subcommand("report", "Regenerate report.csv, report.txt, failures.json and "
                                   "histogram.json from persisted records");
  report_cmd->add_option("--records", report_dir, "Output directory of a run")->required();

  std::string transcripts_dir;
  std::string classifier_spec = "rules";
  std::string analyze_out;
  bool tau_a = false;
  int analyze_parallelism = 1;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Dialogue-act distribution and Kendall correlation");
  analyze_cmd->add_option("--transcripts", transcripts_dir,
                          "Directory holding transcripts.jsonl, or the file itself")
      ->required();
  analyze_cmd->add_option("--classifier", classifier_spec, "rules | exec:<command>")
      ->capture_default_str();
  analyze_cmd->add_option("--out", analyze_out, "Output directory")->required();
  analyze_cmd->add_flag("--tau-a", tau_a, "Use tau-a instead of the tie-corrected tau-b");
  analyze_cmd->add_option("--parallelism", analyze_parallelism, "Concurrent transcripts")
      ->capture_default_str();

  auto* cassette_cmd = app.add_subcommand("cassette", "Record or inspect replay cassettes");
  cassette_cmd->require_subcommand(1);
  RunFlags record_flags;
  std::string record_dir;
  auto* record_cmd = cassette_cmd->add_subcommand(
      "record", "Run an experiment with a live or scripted backend and save every exchange");
  add_run_flags(record_cmd, record_flags);
  record_cmd->add_option("--cassette-dir", record_dir, "Where to write per-session cassettes")
      ->required();
  std::string inspect_path;
  auto* inspect_cmd = cassette_cmd->add_subcommand("inspect", "Summarize a cassette file");
  inspect_cmd->add_option("file", inspect_path, "Cassette (.jsonl)")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run_cmd->parsed()) return execute_run(run_flags, std::nullopt);

    if (record_cmd->parsed()) {
      if (record_flags.backend == std::optional<std::string>("replay")) {
        throw Error(ErrorCode::kConfigError, "cannot record from the replay backend");
      }
      return execute_run(record_flags, fs::absolute(record_dir));
    }

    if (score_cmd->parsed()) {
      std::cout << render_table(accuracy_table(read_records(score_dir)), model_label(score_dir));
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      emit_reports(report_dir, model_label(report_dir));
      std::cout << read_text_file(fs::path(report_dir) / kReportTxtFile);
      return kExitOk;
    }

    if (analyze_cmd->parsed()) {
      const auto transcripts = read_transcripts(transcripts_dir);
      auto classifier = make_classifier(classifier_spec);
      const auto dists = distribution_by_mode(transcripts, *classifier, analyze_parallelism);
      write_analysis(analyze_out, dists, tau_a ? TauVariant::kA : TauVariant::kB);
      for (const auto& d : dists) {
        std::cout << display_name(d.mode) << " (" << d.total << " chunks):";
        for (DATag tag : d.top5) {
          std::cout << " " << to_string(tag) << "=" << d.percentages.at(tag) << "%";
        }
        std::cout << "\n";
      }
      return kExitOk;
    }

    if (inspect_cmd->parsed()) {
      const Cassette cassette = load_cassette(inspect_path);
      std::cout << cassette.entries.size() << " entr"
                << (cassette.entries.size() == 1 ? "y" : "ies") << "\n";
      int index = 0;
      for (const auto& e : cassette.entries) {
        std::string preview = e.response.content.substr(0, 60);
        for (char& c : preview) {
          if (c == '\n') c = ' ';
        }
        std::cout << index++ << "  " << e.fingerprint.substr(0, 12) << "  " << e.metadata.model
                  << "  " << e.metadata.recorded_at << "  " << preview << "\n";
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "duetmath: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kConfigError:
      case ErrorCode::kParseError:
      case ErrorCode::kValidationError:
      case ErrorCode::kMissingRecords:
      case ErrorCode::kAuthError:
      case ErrorCode::kTemplateMalformed:
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kIoError:
      case ErrorCode::kClassifierUnavailable:
        return kExitUsage;
      default:
        return kExitPartial;
    }
  } catch (const std::exception& e) {
    std::cerr << "duetmath: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitUsage;
}
