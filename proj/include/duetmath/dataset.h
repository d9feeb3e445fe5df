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

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "duetmath/error.h"
#include "duetmath/types.h"

namespace duetmath {

/// Contents of the last `\boxed{...}` (or `\fbox{...}`) with nested braces
/// preserved; `\boxed 5` (space-delimited token) is accepted as a fallback.
std::optional<std::string> find_last_boxed(std::string_view text);

/// As find_last_boxed, but throws Error(kNoBoxedAnswer) when absent.
std::string extract_boxed(std::string_view solution_text);

/// A record left out of the load, with the reason.
struct ExclusionReport {
  std::filesystem::path path;
  ErrorCode reason = ErrorCode::kMalformedRecord;
  std::string detail;
};

struct DatasetManifest {
  std::filesystem::path root_path;
  std::map<Subject, int> per_subject;
  int total = 0;
  std::optional<int> level_filter;
  std::optional<int> per_subject_quota;
  std::vector<ExclusionReport> excluded;
};

nlohmann::json to_json(const DatasetManifest& manifest);

struct DatasetLoad {
  /// Sorted by subject, then id.
  std::vector<ProblemInstance> problems;
  DatasetManifest manifest;
};

struct LoadOptions {
  std::optional<int> level_filter;
  /// Restrict to these subjects; empty means all.
  std::vector<Subject> subjects;
  /// Keep the first N problems per subject in id order.
  std::optional<int> per_subject_quota;
};

/// Loads a MATH-layout tree: `<root>/<subject dir>/<stem>.json` records with
/// keys problem, level, type, solution. Records that fail parsing or answer
/// extraction are excluded and listed in manifest.excluded; the level filter
/// is applied before extraction. Throws Error(kIoError) if root is not a
/// readable directory.
DatasetLoad load_dataset(const std::filesystem::path& root,
                         const LoadOptions& options = {});

/// "Level 5" -> 5. Throws Error(kMalformedRecord).
int parse_level(std::string_view text);

}  // namespace duetmath
