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

#include "duetmath/dataset.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "duetmath/answer.h"

namespace duetmath {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::optional<std::string> find_last_boxed(std::string_view text) {
  std::size_t idx = text.rfind("\\boxed");
  std::size_t macro_len = 6;
  if (idx == std::string_view::npos) {
    idx = text.rfind("\\fbox");
    macro_len = 5;
  }
  if (idx == std::string_view::npos) return std::nullopt;
  std::size_t i = idx + macro_len;
  if (i < text.size() && text[i] == ' ') {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t end = i;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
           text[end] != '$') {
      ++end;
    }
    if (end == i) return std::nullopt;
    return std::string(text.substr(i, end - i));
  }
  if (i >= text.size() || text[i] != '{') return std::nullopt;
  int depth = 0;
  for (std::size_t j = i; j < text.size(); ++j) {
    if (text[j] == '{') ++depth;
    if (text[j] == '}' && --depth == 0) {
      return std::string(text.substr(i + 1, j - i - 1));
    }
  }
  return std::nullopt;  // unbalanced
}

std::string extract_boxed(std::string_view solution_text) {
  auto boxed = find_last_boxed(solution_text);
  if (!boxed) throw Error(ErrorCode::kNoBoxedAnswer, "no \\boxed{} answer found");
  return *boxed;
}

int parse_level(std::string_view text) {
  constexpr std::string_view kPrefix = "Level ";
  if (text.substr(0, kPrefix.size()) == kPrefix && text.size() == kPrefix.size() + 1 &&
      text.back() >= '1' && text.back() <= '5') {
    return text.back() - '0';
  }
  throw Error(ErrorCode::kMalformedRecord,
              "unparseable level '" + std::string(text) + "'");
}

json to_json(const DatasetManifest& manifest) {
  json per_subject = json::object();
  for (const auto& [subject, count] : manifest.per_subject) {
    per_subject[std::string(to_string(subject))] = count;
  }
  json excluded = json::array();
  for (const auto& e : manifest.excluded) {
    excluded.push_back({{"path", e.path.generic_string()},
                        {"reason", to_string(e.reason)},
                        {"detail", e.detail}});
  }
  json j{{"root_path", manifest.root_path.generic_string()},
         {"per_subject", per_subject},
         {"total", manifest.total},
         {"level_filter", nullptr},
         {"per_subject_quota", nullptr},
         {"excluded", excluded}};
  if (manifest.level_filter) j["level_filter"] = *manifest.level_filter;
  if (manifest.per_subject_quota) j["per_subject_quota"] = *manifest.per_subject_quota;
  return j;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

DatasetLoad load_dataset(const fs::path& root, const LoadOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::kIoError, "dataset root is not a directory: " + root.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  DatasetLoad load;
  load.manifest.root_path = root;
  load.manifest.level_filter = options.level_filter;
  load.manifest.per_subject_quota = options.per_subject_quota;

  for (const fs::path& path : files) {
    ProblemInstance p;
    try {
      json record;
      try {
        record = json::parse(read_file(path));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kMalformedRecord, e.what());
      }
      if (!record.is_object()) {
        throw Error(ErrorCode::kMalformedRecord, "record is not a JSON object");
      }
      p.statement = required_string(record, "problem");
      p.reference_solution = required_string(record, "solution");
      p.subject = parse_subject(required_string(record, "type"));
      p.level = parse_level(required_string(record, "level"));
      if (options.level_filter && p.level != *options.level_filter) continue;
      if (!options.subjects.empty() &&
          std::find(options.subjects.begin(), options.subjects.end(), p.subject) ==
              options.subjects.end()) {
        continue;
      }
      p.id = std::string(to_string(p.subject)) + "/" + path.stem().string();
      p.ground_truth = normalize(extract_boxed(p.reference_solution)).canonical;
      if (p.ground_truth.empty()) {
        throw Error(ErrorCode::kNoBoxedAnswer, "boxed answer normalizes to empty");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIoError) throw;
      load.manifest.excluded.push_back(ExclusionReport{path, e.code(), e.what()});
      continue;
    }
    load.problems.push_back(std::move(p));
  }

  std::sort(load.problems.begin(), load.problems.end(),
            [](const ProblemInstance& a, const ProblemInstance& b) {
              if (a.subject != b.subject) return a.subject < b.subject;
              return a.id < b.id;
            });
  if (options.per_subject_quota) {
    std::vector<ProblemInstance> kept;
    std::map<Subject, int> taken;
    for (auto& p : load.problems) {
      if (taken[p.subject]++ < *options.per_subject_quota) kept.push_back(std::move(p));
    }
    load.problems = std::move(kept);
  }
  for (const auto& p : load.problems) ++load.manifest.per_subject[p.subject];
  load.manifest.total = static_cast<int>(load.problems.size());
  return load;
}

}  // namespace duetmath
