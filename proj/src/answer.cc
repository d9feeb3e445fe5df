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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <regex>
#include <vector>

#include "duetmath/dataset.h"
#include "duetmath/error.h"

namespace duetmath {

namespace {

using i128 = __int128;

constexpr i128 kInt64Max = std::numeric_limits<std::int64_t>::max();

i128 abs128(i128 v) { return v < 0 ? -v : v; }

i128 gcd128(i128 a, i128 b) {
  a = abs128(a);
  b = abs128(b);
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::optional<Rational> make_rational(i128 num, i128 den) {
  if (den == 0) return std::nullopt;
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (abs128(num) > kInt64Max || den > kInt64Max) return std::nullopt;
  return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Unsigned decimal "123", "1.25", ".5". At most 18 significant digits.
std::optional<Rational> parse_unsigned_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  i128 num = 0;
  i128 den = 1;
  bool seen_point = false;
  int digits = 0;
  for (char c : s) {
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (!is_digit(c)) return std::nullopt;
    if (++digits > 18) return std::nullopt;
    num = num * 10 + (c - '0');
    if (seen_point) den *= 10;
  }
  if (digits == 0) return std::nullopt;
  return make_rational(num, den);
}

// Index just past the balanced {...} group starting at `open`, or npos.
std::size_t group_end(std::string_view s, std::size_t open) {
  if (open >= s.size() || s[open] != '{') return std::string_view::npos;
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// Removes `\name` when it is a complete control word (not a prefix of a
// longer one, e.g. \right vs \rightarrow).
std::string remove_control_word(std::string s, std::string_view name) {
  std::size_t pos = 0;
  while ((pos = s.find(name, pos)) != std::string::npos) {
    const std::size_t after = pos + name.size();
    if (after < s.size() && is_alpha(s[after])) {
      pos = after;
      continue;
    }
    s.erase(pos, name.size());
  }
  return s;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool wrapped_by(const std::string& s, std::string_view open, std::string_view close) {
  return s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
         s.compare(s.size() - close.size(), close.size(), close) == 0;
}

std::string strip_wrappers(std::string s) {
  for (;;) {
    s = trim(s);
    if (wrapped_by(s, "$", "$") && s.compare(s.size() - 2, 2, "\\$") != 0) {
      s = s.substr(1, s.size() - 2);
    } else if (wrapped_by(s, "\\(", "\\)") || wrapped_by(s, "\\[", "\\]")) {
      s = s.substr(2, s.size() - 4);
    } else if (s.rfind("\\boxed{", 0) == 0 && group_end(s, 6) == s.size()) {
      s = s.substr(7, s.size() - 8);
    } else if (s.size() > 1 && s.back() == '.' && s[s.size() - 2] != '.') {
      s.pop_back();
    } else {
      return s;
    }
  }
}

// Argument of a one-argument macro: a braced group or a single token (one
// character or one control word). Returns the end index and the argument
// without braces.
std::optional<std::pair<std::size_t, std::string>> macro_argument(const std::string& s,
                                                                 std::size_t i) {
  if (i >= s.size()) return std::nullopt;
  if (s[i] == '{') {
    std::size_t end = group_end(s, i);
    if (end == std::string::npos) return std::nullopt;
    return std::make_pair(end, s.substr(i + 1, end - i - 2));
  }
  if (s[i] == '\\') {
    std::size_t j = i + 1;
    while (j < s.size() && is_alpha(s[j])) ++j;
    if (j == i + 1) return std::nullopt;
    return std::make_pair(j, s.substr(i, j - i));
  }
  return std::make_pair(i + 1, s.substr(i, 1));
}

// \frac12 -> \frac{1}{2}, \frac1{b} -> \frac{1}{b}.
std::string fix_fracs(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  constexpr std::string_view kFrac = "\\frac";
  while (i < s.size()) {
    if (s.compare(i, kFrac.size(), kFrac) == 0 &&
        (i + kFrac.size() >= s.size() || !is_alpha(s[i + kFrac.size()]))) {
      auto num = macro_argument(s, i + kFrac.size());
      if (num) {
        auto den = macro_argument(s, num->first);
        if (den) {
          out += "\\frac{" + fix_fracs(num->second) + "}{" + fix_fracs(den->second) + "}";
          i = den->first;
          continue;
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

// \sqrt2 -> \sqrt{2}; \sqrt{..} and \sqrt[n]{..} untouched.
std::string fix_sqrt(const std::string& s) {
  std::string out;
  constexpr std::string_view kSqrt = "\\sqrt";
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, kSqrt.size(), kSqrt) == 0) {
      const std::size_t a = i + kSqrt.size();
      if (a < s.size() && s[a] != '{' && s[a] != '[' && !is_alpha(s[a])) {
        auto arg = macro_argument(s, a);
        if (arg) {
          out += "\\sqrt{" + arg->second + "}";
          i = arg->first;
          continue;
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

constexpr std::string_view kTextMacros[] = {"\\text", "\\textbf", "\\textit",
                                            "\\textrm", "\\mbox", "\\mathrm"};

struct TextGroup {
  std::size_t begin;
  std::size_t end;
  std::string inner;
};

std::vector<TextGroup> find_text_groups(const std::string& s) {
  std::vector<TextGroup> groups;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') continue;
    for (std::string_view macro : kTextMacros) {
      if (s.compare(i, macro.size(), macro) != 0) continue;
      const std::size_t open = i + macro.size();
      if (open >= s.size() || s[open] != '{') continue;
      const std::size_t end = group_end(s, open);
      if (end == std::string::npos) continue;
      groups.push_back({i, end, s.substr(open + 1, end - open - 2)});
      i = end - 1;
      break;
    }
  }
  return groups;
}

// Drops trailing \text{...} unit groups (with an optional ^exponent) when a
// value remains; otherwise unwraps every text group.
std::string strip_text_units(std::string s) {
  for (;;) {
    auto groups = find_text_groups(s);
    if (groups.empty()) return s;
    const TextGroup& last = groups.back();
    std::size_t tail = last.end;
    if (tail < s.size() && s[tail] == '^') {
      if (tail + 1 < s.size() && s[tail + 1] == '{') {
        tail = group_end(s, tail + 1);
      } else {
        tail = std::min(s.size(), tail + 2);
      }
    }
    const bool trailing = tail == s.size();
    if (trailing && last.begin > 0) {
      s.erase(last.begin);
      continue;
    }
    std::string out;
    std::size_t prev = 0;
    for (const auto& g : groups) {
      out += s.substr(prev, g.begin - prev);
      out += g.inner;
      prev = g.end;
    }
    out += s.substr(prev);
    return out;
  }
}

std::string strip_degree_percent(std::string s) {
  for (std::string_view pat : {"^{\\circ}", "^\\circ", "\\circ", "\xC2\xB0", "\\%", "%"}) {
    s = replace_all(std::move(s), pat, "");
  }
  return s;
}

// "x=5" -> "5" for a single variable (optionally subscripted) or a single
// control word on the left.
std::string strip_variable_prefix(const std::string& s) {
  if (std::count(s.begin(), s.end(), '=') != 1) return s;
  const auto eq = s.find('=');
  const std::string lhs = s.substr(0, eq);
  static const std::regex kVariable(R"(^([A-Za-z]|\\[A-Za-z]+)(_\{?[A-Za-z0-9]+\}?)?$)");
  if (eq + 1 < s.size() && std::regex_match(lhs, kVariable)) return s.substr(eq + 1);
  return s;
}

std::string strip_thousands(const std::string& s) {
  static const std::regex kThousands(R"(^-?\d{1,3}(,\d{3})+(\.\d+)?$)");
  if (!std::regex_match(s, kThousands)) return s;
  std::string out;
  std::copy_if(s.begin(), s.end(), std::back_inserter(out), [](char c) { return c != ','; });
  return out;
}

// "5.000" -> "5" wherever a number ends in a run of zero decimals.
std::string drop_zero_decimals(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '.' && i > 0 && is_digit(s[i - 1]) && i + 1 < s.size() && s[i + 1] == '0') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] == '0') ++j;
      if (j == s.size() || !is_digit(s[j])) {
        i = j;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

// ".5" -> "0.5" wherever a decimal point starts a number.
std::string add_leading_zero(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '.' && (i == 0 || !is_digit(s[i - 1])) && i + 1 < s.size() &&
        is_digit(s[i + 1])) {
      out.push_back('0');
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string lowercase_words(std::string s) {
  if (s.size() >= 2 && std::all_of(s.begin(), s.end(), is_alpha)) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return s;
}

// Splits on commas at bracket depth zero.
std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

bool braces_balanced(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    if (c == '{') ++depth;
    if (c == '}' && --depth < 0) return false;
  }
  return depth == 0;
}

struct Bracketed {
  char open = 0;
  char close = 0;
  std::string inner;
};

// "(a,b)" -> {'(', ')', "a,b"} when the outer brackets enclose everything.
std::optional<Bracketed> outer_brackets(const std::string& s) {
  if (s.size() < 2) return std::nullopt;
  const char open = s.front();
  const char close = s.back();
  if ((open != '(' && open != '[') || (close != ')' && close != ']')) return std::nullopt;
  int depth = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (depth == 0) return std::nullopt;  // closed before the end
  }
  return Bracketed{open, close, s.substr(1, s.size() - 2)};
}

AnswerForm classify_form(const std::string& c, const std::optional<Rational>& numeric) {
  if (c.empty() || !braces_balanced(c)) return AnswerForm::kOther;
  if (numeric) return AnswerForm::kNumeric;
  if (c.find("\\cup") != std::string::npos) return AnswerForm::kInterval;
  if (auto b = outer_brackets(c)) {
    const bool has_comma = split_top_level(b->inner).size() > 1;
    if (has_comma) {
      if (b->open == '(' && b->close == ')' && c.find("\\infty") == std::string::npos) {
        return AnswerForm::kTuple;
      }
      return AnswerForm::kInterval;
    }
  }
  if (split_top_level(c).size() > 1) return AnswerForm::kTuple;
  return AnswerForm::kSymbolic;
}

// Recursive-descent evaluator over canonical strings.
class RealEvaluator {
 public:
  explicit RealEvaluator(std::string_view s) : s_(s) {}

  std::optional<double> run() {
    auto v = expr();
    if (!v || pos_ != s_.size() || !std::isfinite(*v)) return std::nullopt;
    return v;
  }

 private:
  bool eat(std::string_view token) {
    if (s_.compare(pos_, token.size(), token) != 0) return false;
    // Control words must not continue with letters (\frac vs \fraction).
    if (token.front() == '\\' && pos_ + token.size() < s_.size() &&
        is_alpha(s_[pos_ + token.size()])) {
      return false;
    }
    pos_ += token.size();
    return true;
  }

  bool at_primary() const {
    if (pos_ >= s_.size()) return false;
    const char c = s_[pos_];
    return is_digit(c) || c == '.' || c == '(' || c == '{' ||
           s_.compare(pos_, 5, "\\frac") == 0 || s_.compare(pos_, 5, "\\sqrt") == 0;
  }

  std::optional<double> expr() {
    auto lhs = term();
    if (!lhs) return std::nullopt;
    double v = *lhs;
    for (;;) {
      if (eat("+")) {
        auto rhs = term();
        if (!rhs) return std::nullopt;
        v += *rhs;
      } else if (eat("-")) {
        auto rhs = term();
        if (!rhs) return std::nullopt;
        v -= *rhs;
      } else {
        return v;
      }
    }
  }

  std::optional<double> term() {
    auto lhs = unary();
    if (!lhs) return std::nullopt;
    double v = *lhs;
    for (;;) {
      if (eat("*") || eat("\\cdot") || eat("\\times")) {
        auto rhs = unary();
        if (!rhs) return std::nullopt;
        v *= *rhs;
      } else if (eat("/") || eat("\\div")) {
        auto rhs = unary();
        if (!rhs || *rhs == 0.0) return std::nullopt;
        v /= *rhs;
      } else if (at_primary()) {
        auto rhs = power();
        if (!rhs) return std::nullopt;
        v *= *rhs;
      } else {
        return v;
      }
    }
  }

  std::optional<double> unary() {
    if (eat("-")) {
      auto v = unary();
      if (!v) return std::nullopt;
      return -*v;
    }
    if (eat("+")) return unary();
    return power();
  }

  std::optional<double> power() {
    auto base = primary();
    if (!base) return std::nullopt;
    if (!eat("^")) return base;
    std::optional<double> exponent;
    if (pos_ < s_.size() && s_[pos_] == '{') {
      exponent = group();
    } else if (pos_ < s_.size() && is_digit(s_[pos_])) {
      exponent = s_[pos_++] - '0';
    }
    if (!exponent) return std::nullopt;
    return std::pow(*base, *exponent);
  }

  std::optional<double> group() {
    if (!eat("{")) return std::nullopt;
    auto v = expr();
    if (!v || !eat("}")) return std::nullopt;
    return v;
  }

  std::optional<double> primary() {
    if (pos_ >= s_.size()) return std::nullopt;
    const char c = s_[pos_];
    if (is_digit(c) || c == '.') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (is_digit(s_[pos_]) || s_[pos_] == '.')) ++pos_;
      auto r = parse_unsigned_decimal(s_.substr(start, pos_ - start));
      if (r) return r->to_double();
      return std::nullopt;
    }
    if (eat("(")) {
      auto v = expr();
      if (!v || !eat(")")) return std::nullopt;
      return v;
    }
    if (c == '{') return group();
    if (eat("\\frac")) {
      auto num = group();
      auto den = num ? group() : std::nullopt;
      if (!den || *den == 0.0) return std::nullopt;
      return *num / *den;
    }
    if (eat("\\sqrt")) {
      double index = 2.0;
      if (eat("[")) {
        auto n = expr();
        if (!n || !eat("]") || *n <= 0.0) return std::nullopt;
        index = *n;
      }
      auto radicand = group();
      if (!radicand || *radicand < 0.0) return std::nullopt;
      return index == 2.0 ? std::sqrt(*radicand) : std::pow(*radicand, 1.0 / index);
    }
    return std::nullopt;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

bool canonical_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b);

bool tuple_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  auto split = [](const std::string& c) {
    Bracketed br;
    if (auto outer = outer_brackets(c)) br = *outer;
    else br.inner = c;
    return std::make_pair(br, split_top_level(br.inner));
  };
  auto [ba, pa] = split(a.canonical);
  auto [bb, pb] = split(b.canonical);
  if (ba.open != bb.open || ba.close != bb.close || pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!canonical_equivalent(normalize(pa[i]), normalize(pb[i]))) return false;
  }
  return true;
}

bool canonical_equivalent(const NormalizedAnswer& a, const NormalizedAnswer& b) {
  if (a.canonical.empty() || b.canonical.empty()) return false;
  if (a.canonical == b.canonical) return true;
  if (a.numeric_value && b.numeric_value) return *a.numeric_value == *b.numeric_value;
  if (a.form == AnswerForm::kTuple && b.form == AnswerForm::kTuple) {
    return tuple_equivalent(a, b);
  }
  const bool radical = a.canonical.find("\\sqrt") != std::string::npos ||
                       b.canonical.find("\\sqrt") != std::string::npos;
  if (!radical) return false;
  auto x = evaluate_real(a.canonical);
  auto y = evaluate_real(b.canonical);
  if (!x || !y) return false;
  const double scale = std::max(std::fabs(*x), std::fabs(*y));
  return std::fabs(*x - *y) <= 1e-9 * scale;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidArgument, "rational with zero denominator");
  i128 n = num;
  i128 d = den;
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const i128 g = gcd128(n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  if (abs128(n) > kInt64Max || d > kInt64Max) {
    throw Error(ErrorCode::kInvalidArgument, "rational out of range");
  }
  num_ = static_cast<std::int64_t>(n);
  den_ = static_cast<std::int64_t>(d);
}

std::optional<Rational> Rational::parse(std::string_view text) {
  bool negative = false;
  while (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    if (text.front() == '-') negative = !negative;
    text.remove_prefix(1);
  }
  std::optional<Rational> value;
  constexpr std::string_view kFrac = "\\frac{";
  if (text.substr(0, kFrac.size()) == kFrac) {
    const std::size_t num_end = group_end(text, kFrac.size() - 1);
    if (num_end == std::string_view::npos) return std::nullopt;
    const std::size_t den_end = group_end(text, num_end);
    if (den_end != text.size()) return std::nullopt;
    auto num = parse(text.substr(kFrac.size(), num_end - kFrac.size() - 1));
    auto den = parse(text.substr(num_end + 1, den_end - num_end - 2));
    if (!num || !den || den->num_ == 0) return std::nullopt;
    value = make_rational(static_cast<i128>(num->num_) * den->den_,
                          static_cast<i128>(num->den_) * den->num_);
  } else {
    value = parse_unsigned_decimal(text);
  }
  if (value && negative) value->num_ = -value->num_;
  return value;
}

std::string_view to_string(AnswerForm form) {
  switch (form) {
    case AnswerForm::kNumeric: return "numeric";
    case AnswerForm::kSymbolic: return "symbolic";
    case AnswerForm::kTuple: return "tuple";
    case AnswerForm::kInterval: return "interval";
    case AnswerForm::kOther: return "other";
  }
  return "other";
}

std::optional<std::string> extract_final_answer(const SessionOutcome& outcome) {
  if (outcome.raw_final_answer) {
    if (auto boxed = find_last_boxed(*outcome.raw_final_answer)) return boxed;
    return outcome.raw_final_answer;
  }
  const auto& messages = outcome.transcript.messages;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (!may_give_final_answer(outcome.transcript.mode, it->speaker)) continue;
    return find_last_boxed(it->content);
  }
  return std::nullopt;
}

NormalizedAnswer normalize(std::string_view raw) {
  std::string s = strip_wrappers(std::string(raw));

  s = replace_all(std::move(s), "\\$", "");
  s.erase(std::remove(s.begin(), s.end(), '$'), s.end());
  s = remove_control_word(std::move(s), "\\left");
  s = remove_control_word(std::move(s), "\\right");
  s = remove_control_word(std::move(s), "\\displaystyle");
  for (std::string_view spacing : {"\\!", "\\,", "\\;", "\\:", "\\ "}) {
    s = replace_all(std::move(s), spacing, "");
  }
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](unsigned char c) { return std::isspace(c) != 0; }),
          s.end());
  s = replace_all(std::move(s), "{,}", ",");

  s = replace_all(std::move(s), "\\dfrac", "\\frac");
  s = replace_all(std::move(s), "\\tfrac", "\\frac");
  s = fix_fracs(s);
  static const std::regex kSlash(R"(^(-?)(\d+)/(\d+)$)");
  s = std::regex_replace(s, kSlash, "$1\\frac{$2}{$3}");
  s = fix_sqrt(s);

  s = strip_text_units(std::move(s));
  s = strip_degree_percent(std::move(s));
  s = strip_wrappers(std::move(s));
  s = strip_variable_prefix(s);
  s = strip_thousands(s);
  s = drop_zero_decimals(s);
  s = add_leading_zero(s);
  s = lowercase_words(std::move(s));

  NormalizedAnswer out;
  out.numeric_value = Rational::parse(s);
  out.form = classify_form(s, out.numeric_value);
  out.canonical = std::move(s);
  return out;
}

bool equivalent(std::string_view a, std::string_view b) {
  return canonical_equivalent(normalize(a), normalize(b));
}

std::optional<double> evaluate_real(std::string_view canonical) {
  return RealEvaluator(canonical).run();
}

}  // namespace duetmath
