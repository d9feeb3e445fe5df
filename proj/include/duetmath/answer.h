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

// Final-answer grading: pull the answer out of a session, normalize LaTeX
// surface variation, and compare against ground truth.
//
// Comparison is conservative. Canonical strings must match, or both sides
// must be the same exact rational, or (only when a radical is involved) the
// same real number to 1e-9 relative. Tuples compare element-wise in order.
// No computer algebra.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "duetmath/protocol.h"

namespace duetmath {

/// Exact rational in lowest terms, den > 0.
class Rational {
 public:
  Rational() = default;
  /// Throws Error(kInvalidArgument) when den == 0.
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Integers, decimals ("-0.125", ".5"), and \frac{p}{q} with integer or
  /// decimal parts. nullopt for anything else or on int64 overflow.
  static std::optional<Rational> parse(std::string_view text);

  friend bool operator==(const Rational&, const Rational&) = default;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

enum class AnswerForm { kNumeric, kSymbolic, kTuple, kInterval, kOther };

std::string_view to_string(AnswerForm form);

struct NormalizedAnswer {
  std::string canonical;
  std::optional<Rational> numeric_value;
  AnswerForm form = AnswerForm::kOther;
};

/// The graded answer of a session: the payload of the terminating marker,
/// else the last \boxed{} in the last message of a speaker allowed to answer
/// in that mode, else nullopt.
std::optional<std::string> extract_final_answer(const SessionOutcome& outcome);

/// Rewrites applied in order: strip $ and math delimiters; drop \left,
/// \right and thin spaces; remove whitespace; \dfrac/\tfrac -> \frac;
/// \frac12 -> \frac{1}{2}; p/q -> \frac{p}{q}; \sqrt2 -> \sqrt{2}; drop
/// \text{} units (unwrap when nothing else remains), degree and percent
/// signs; "x=" prefix; trailing ".0...0"; add a missing leading "0." ;
/// thousands separators; lowercase all-letter words.
NormalizedAnswer normalize(std::string_view raw);

bool equivalent(std::string_view a, std::string_view b);

/// Evaluates a canonical arithmetic expression (numbers, + - * /, \cdot,
/// \times, \frac, \sqrt, \sqrt[n], ^, parentheses). nullopt if it contains
/// anything else or a radical of a negative number.
std::optional<double> evaluate_real(std::string_view canonical);

}  // namespace duetmath
