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

// Minimal RFC 4180 CSV: quoted fields, embedded commas, quotes and newlines.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace duetmath::csv {

using Row = std::vector<std::string>;

/// One row terminated by "\n". Fields are quoted only when needed.
std::string format_row(const Row& row);

/// Parses a whole document. A final row lacking its newline is still
/// returned; callers that care about torn writes check the text themselves.
/// Throws Error(kParseError) on an unterminated quoted field.
std::vector<Row> parse(std::string_view text);

}  // namespace duetmath::csv
