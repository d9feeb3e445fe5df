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

#include <stdexcept>
#include <string>
#include <string_view>

namespace duetmath {

enum class ErrorCode {
  kInvalidArgument,
  // llm gateway
  kAuthError,
  kRateLimitedExhausted,
  kTransportError,
  kEmptyCompletion,
  kReplayMiss,
  kReplayMismatch,
  // protocol engine
  kTemplateMalformed,
  kBackendError,
  // dataset ingest
  kIoError,
  kMalformedRecord,
  kNoBoxedAnswer,
  // evaluation / cli
  kEmptyRun,
  kConfigError,
  kParseError,
  kValidationError,
  kMissingRecords,
  // dialogue analysis
  kLengthMismatch,
  kAllTies,
  kClassifierUnavailable,
};

std::string_view to_string(ErrorCode code);

/// The single exception type thrown by the library. `code()` identifies the
/// failure class; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace duetmath
