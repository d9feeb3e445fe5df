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

#include "duetmath/dialogue.h"

#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "duetmath/csv.h"
#include "duetmath/error.h"

namespace duetmath {

namespace fs = std::filesystem;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool contains(std::string_view s, std::string_view needle) {
  return s.find(needle) != std::string_view::npos;
}

// ---------------------------------------------------------------- segmentation

struct Line {
  std::size_t begin;  // offset of the first character
  std::size_t end;    // offset past the last character, newline excluded
  std::string_view trimmed;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back({start, nl, trim(text.substr(start, nl - start))});
    start = nl + 1;
  }
  return lines;
}

bool is_list_item(std::string_view t) {
  if (starts_with(t, "- ") || starts_with(t, "* ") || starts_with(t, "+ ") ||
      starts_with(t, "\xE2\x80\xA2 ")) {
    return true;
  }
  std::size_t i = 0;
  while (i < t.size() && i < 3 && is_digit(t[i])) ++i;
  return i > 0 && i + 1 < t.size() && (t[i] == '.' || t[i] == ')') && is_space(t[i + 1]);
}

// Closing delimiter for a display-math opener at the start of `t`, if any.
std::optional<std::string> display_math_closer(std::string_view t) {
  if (starts_with(t, "\\[")) return "\\]";
  if (starts_with(t, "$$")) return "$$";
  if (starts_with(t, "\\begin{")) {
    const auto close = t.find('}');
    if (close == std::string_view::npos) return std::nullopt;
    return "\\end{" + std::string(t.substr(7, close - 7)) + "}";
  }
  return std::nullopt;
}

// Words of three or more letters that are not LaTeX control words.
int prose_word_count(std::string_view t) {
  int words = 0;
  std::size_t i = 0;
  while (i < t.size()) {
    if (!is_alpha(t[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < t.size() && is_alpha(t[j])) ++j;
    const bool control_word = i > 0 && t[i - 1] == '\\';
    if (!control_word && j - i >= 3) ++words;
    i = j;
  }
  return words;
}

bool is_equation_line(std::string_view t) {
  if (t.empty()) return false;
  for (std::string_view lead : {"=", "&=", "\\Rightarrow", "\\implies", "\\Longrightarrow"}) {
    if (starts_with(t, lead)) return true;
  }
  // A line that is nothing but inline math, e.g. "$x^2 = 4$" or "$x = 2$,".
  std::string_view u = t;
  while (!u.empty() && (u.back() == '.' || u.back() == ',')) u.remove_suffix(1);
  if (u.size() >= 2 && u.front() == '$' && u.back() == '$' &&
      u.substr(1, u.size() - 2).find('$') == std::string_view::npos) {
    return true;
  }
  const bool relation = contains(t, "=") || contains(t, "\\le") || contains(t, "\\ge") ||
                        contains(t, "\\neq");
  return relation && prose_word_count(t) == 0;
}

// Index just past the matching '}' for the '{' at `open`, or npos.
std::size_t skip_group(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

// If a protected span starts at `i`, the index just past it.
std::optional<std::size_t> protected_span_end(std::string_view s, std::size_t i) {
  auto closing = [&](std::string_view open, std::string_view close) -> std::optional<std::size_t> {
    if (s.compare(i, open.size(), open) != 0) return std::nullopt;
    const auto end = s.find(close, i + open.size());
    if (end == std::string_view::npos) return std::nullopt;
    return end + close.size();
  };
  if (s.compare(i, 2, "\\$") == 0) return i + 2;
  if (auto e = closing("$$", "$$")) return e;
  if (s[i] == '$' && s.compare(i, 2, "$$") != 0) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (s[j] == '\\') {
        ++j;
        continue;
      }
      if (s[j] == '$') return j + 1;
    }
    return std::nullopt;
  }
  if (auto e = closing("\\(", "\\)")) return e;
  if (auto e = closing("\\[", "\\]")) return e;
  if (s.compare(i, 7, "\\boxed{") == 0) {
    const auto e = skip_group(s, i + 6);
    if (e != std::string_view::npos) return e;
  }
  return std::nullopt;
}

void push_chunk(std::vector<std::string>& out, std::string_view piece) {
  piece = trim(piece);
  if (!piece.empty()) out.emplace_back(piece);
}

void split_sentences(std::string_view s, std::vector<std::string>& out) {
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (auto end = protected_span_end(s, i)) {
      i = *end;
      continue;
    }
    const char c = s[i];
    if (c != '.' && c != '?' && c != '!') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && (s[j] == '.' || s[j] == '?' || s[j] == '!')) ++j;
    while (j < s.size() && (s[j] == ')' || s[j] == '"' || s[j] == '\'' || s[j] == '*')) ++j;
    if (j < s.size() && is_space(s[j])) {
      std::size_t k = j;
      while (k < s.size() && is_space(s[k])) ++k;
      std::size_t m = k;
      while (m < s.size() && (s[m] == '*' || s[m] == '"' || s[m] == '(')) ++m;
      if (k == s.size() || (m < s.size() && is_upper(s[m]))) {
        push_chunk(out, s.substr(start, j - start));
        start = j;
      }
    }
    i = j;
  }
  push_chunk(out, s.substr(start));
}

// -------------------------------------------------------------- classification

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// Lowercased text with list markers, emphasis and curly quotes removed.
std::string prepare(std::string_view chunk) {
  std::string s = lower(trim(chunk));
  s = replace_all(std::move(s), "\xE2\x80\x99", "'");
  s = replace_all(std::move(s), "**", "");
  std::string_view v = trim(s);
  if (is_list_item(v)) {
    v.remove_prefix(v.find_first_of(" \t") + 1);
  }
  return std::string(trim(v));
}

bool starts_with_word(std::string_view s, std::string_view word) {
  if (!starts_with(s, word)) return false;
  return s.size() == word.size() || !is_alpha(s[word.size()]);
}

bool any_prefix(std::string_view s, std::initializer_list<std::string_view> words) {
  for (auto w : words) {
    if (starts_with_word(s, w)) return true;
  }
  return false;
}

bool any_of(std::string_view s, std::initializer_list<std::string_view> phrases) {
  for (auto p : phrases) {
    if (contains(s, p)) return true;
  }
  return false;
}

// Occurrence of `phrase` not glued to a preceding letter ("correct!" but not
// "incorrect!") and not negated by a preceding "not ".
bool affirmative_phrase(std::string_view s, std::string_view phrase) {
  for (std::size_t pos = s.find(phrase); pos != std::string_view::npos;
       pos = s.find(phrase, pos + 1)) {
    if (pos > 0 && is_alpha(s[pos - 1])) continue;
    if (pos >= 4 && s.substr(pos - 4, 4) == "not ") continue;
    return true;
  }
  return false;
}

constexpr std::string_view kDirectiveVerbs[] = {
    "compute",  "calculate", "solve",   "substitute", "simplify",  "find",      "evaluate",
    "write",    "plug",      "multiply", "divide",    "add",       "subtract",  "factor",
    "expand",   "set",       "use",     "apply",      "rewrite",   "check",     "verify",
    "determine", "show",     "combine", "isolate",    "square",    "take",      "try",
    "list",     "count",     "draw",    "start",      "convert",   "express",   "compare",
    "move",     "replace",   "collect", "cancel",     "sum",       "differentiate",
};

bool is_directive(std::string_view s) {
  // Leading connectives do not change the mood: "Now simplify", "Next, solve".
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (std::string_view lead : {"now", "next", "then", "first", "finally", "so", "please",
                                  "and", "also"}) {
      if (starts_with_word(s, lead)) {
        s.remove_prefix(lead.size());
        while (!s.empty() && (s.front() == ',' || is_space(s.front()))) s.remove_prefix(1);
        stripped = true;
      }
    }
  }
  if (any_prefix(s, {"you should", "you need to", "make sure to", "be sure to"})) return true;
  for (std::string_view lets : {"let's ", "let us "}) {
    if (starts_with(s, lets)) {
      s.remove_prefix(lets.size());
      break;
    }
  }
  for (auto verb : kDirectiveVerbs) {
    if (starts_with_word(s, verb)) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(DATag tag) {
  switch (tag) {
    case DATag::kH: return "H";
    case DATag::kDIR: return "DIR";
    case DATag::kACK: return "ACK";
    case DATag::kRC: return "RC";
    case DATag::kRF: return "RF";
    case DATag::kPF: return "PF";
    case DATag::kNF: return "NF";
    case DATag::kLF: return "LF";
    case DATag::kQ: return "Q";
    case DATag::kA: return "A";
    case DATag::kS: return "S";
  }
  return "S";
}

std::optional<DATag> parse_tag(std::string_view text) {
  std::string upper(trim(text));
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (DATag tag : kAllTags) {
    if (upper == to_string(tag)) return tag;
  }
  return std::nullopt;
}

std::vector<std::string> segment_text(std::string_view text) {
  const std::vector<Line> lines = split_lines(text);
  std::vector<std::string> chunks;
  auto span = [&](std::size_t first, std::size_t last) {
    return text.substr(lines[first].begin, lines[last].end - lines[first].begin);
  };
  // Last line of a display-math block opened on line `i`.
  auto math_block_end = [&](std::size_t i) {
    const std::string closer = *display_math_closer(lines[i].trimmed);
    const std::size_t opener_len = closer == "$$" ? 2 : (closer == "\\]" ? 2 : 0);
    for (std::size_t j = i; j < lines.size(); ++j) {
      const std::string_view t = lines[j].trimmed;
      const std::size_t from = j == i ? opener_len : 0;
      if (t.find(closer, from) != std::string_view::npos) return j;
      if (j > i && t.empty()) return j - 1;  // unterminated: stop at the paragraph break
    }
    return lines.size() - 1;
  };
  auto is_math_line = [&](std::size_t j) {
    const auto t = lines[j].trimmed;
    return display_math_closer(t).has_value() || is_equation_line(t);
  };

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string_view t = lines[i].trimmed;
    if (t.empty()) {
      ++i;
      continue;
    }
    if (is_math_line(i)) {
      std::size_t last = i;
      for (std::size_t j = i; j < lines.size() && is_math_line(j);) {
        last = display_math_closer(lines[j].trimmed) ? math_block_end(j) : j;
        j = last + 1;
      }
      push_chunk(chunks, span(i, last));
      i = last + 1;
      continue;
    }
    if (is_list_item(t)) {
      std::size_t last = i;
      while (last + 1 < lines.size()) {
        const Line& next = lines[last + 1];
        const bool indented = next.begin < next.end && is_space(text[next.begin]);
        if (next.trimmed.empty() || !indented || is_list_item(next.trimmed)) break;
        ++last;
      }
      push_chunk(chunks, span(i, last));
      i = last + 1;
      continue;
    }
    std::size_t last = i;
    while (last + 1 < lines.size()) {
      const std::string_view next = lines[last + 1].trimmed;
      if (next.empty() || is_list_item(next) || is_math_line(last + 1)) break;
      ++last;
    }
    split_sentences(span(i, last), chunks);
    i = last + 1;
  }
  return chunks;
}

std::vector<Chunk> segment(const Message& message, const std::string& transcript_id) {
  std::vector<Chunk> chunks;
  int index = 0;
  for (auto& text : segment_text(message.content)) {
    chunks.push_back({transcript_id, message.turn_index, index++, std::move(text), std::nullopt});
  }
  return chunks;
}

bool reconstructs(std::string_view source, const std::vector<std::string>& chunks) {
  auto collapse = [](std::string_view s) {
    std::string out;
    std::istringstream in{std::string(s)};
    std::string word;
    while (in >> word) {
      if (!out.empty()) out.push_back(' ');
      out += word;
    }
    return out;
  };
  std::string joined;
  for (const auto& c : chunks) joined += c + " ";
  return collapse(source) == collapse(joined);
}

DATag RuleClassifier::classify(std::string_view chunk_text) {
  const std::string s = prepare(chunk_text);

  if (any_prefix(s, {"thank you", "thanks", "good point", "great point", "fair point",
                     "i agree", "agreed", "you're right", "you are right",
                     "that makes sense"})) {
    return DATag::kACK;
  }
  if (affirmative_phrase(s, "correct!") ||
      any_of(s, {"well done", "exactly right", "great job", "good job", "great work",
                 "good work", "excellent work", "excellent job", "nicely done", "perfect!",
                 "that's correct", "that is correct", "you're correct", "you are correct",
                 "spot on"})) {
    return DATag::kPF;
  }
  if (affirmative_phrase(s, "incorrect!") ||
      any_of(s, {"that's incorrect", "that is incorrect", "this is incorrect", "is incorrect",
                 "this is wrong", "that's wrong", "that is wrong", "is wrong", "not correct",
                 "made a mistake", "there is a mistake", "there's a mistake",
                 "there is an error", "there's an error"})) {
    return DATag::kNF;
  }
  if (any_of(s, {"partially correct", "partly correct", "mostly correct", "somewhat correct",
                 "almost", "not quite", "close, but", "on the right track, but",
                 "good start, but", "good attempt, but"})) {
    return DATag::kLF;
  }
  if (is_directive(s)) return DATag::kDIR;
  if (any_of(s, {"consider", "what if", "notice", "note that", "let's denote", "let us denote",
                 "let's define", "let's call", "let's assume", "let's think", "let's look",
                 "let's explore", "hint", "think about how", "think about what",
                 "think about whether", "think about which", "recall", "remember that",
                 "it might help", "it may help", "you might", "perhaps", "maybe",
                 "according to", "observe that", "keep in mind", "suppose"})) {
    return DATag::kH;
  }
  const bool question = contains(s, "?");
  if (question && any_of(s, {"is that right", "is this right", "is that correct",
                             "is this correct", "am i right", "am i correct", "right?",
                             "correct?", "does that look right", "does this look right",
                             "did i get", "is my"})) {
    return DATag::kRC;
  }
  if (question && any_of(s, {"what do you think", "any feedback", "thoughts?", "do you agree",
                             "would you agree", "how does that sound", "what's your take",
                             "your thoughts", "does that make sense to you"})) {
    return DATag::kRF;
  }
  if (question) return DATag::kQ;
  if (any_of(s, {"final answer", "\\boxed", "the answer is", "answer:"})) return DATag::kA;
  return DATag::kS;
}

ExecClassifier::ExecClassifier(std::string command) : command_(std::move(command)) {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorCode::kClassifierUnavailable, "socketpair failed");
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(sv[0]);
    close(sv[1]);
    throw Error(ErrorCode::kClassifierUnavailable, "fork failed");
  }
  if (pid == 0) {
    dup2(sv[1], STDIN_FILENO);
    dup2(sv[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(sv[1]);
  fd_ = sv[0];
  pid_ = pid;
}

ExecClassifier::~ExecClassifier() {
  if (fd_ >= 0) close(fd_);
  if (pid_ > 0) {
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

DATag ExecClassifier::classify(std::string_view chunk_text) {
  std::lock_guard lock(mu_);
  const std::string request =
      nlohmann::json(std::string(chunk_text))
          .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) +
      "\n";
  for (std::size_t sent = 0; sent < request.size();) {
    const ssize_t n = send(fd_, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      throw Error(ErrorCode::kClassifierUnavailable, "classifier '" + command_ + "' closed its input");
    }
    sent += static_cast<std::size_t>(n);
  }
  std::size_t nl;
  while ((nl = buffer_.find('\n')) == std::string::npos) {
    char buf[512];
    const ssize_t n = recv(fd_, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      throw Error(ErrorCode::kClassifierUnavailable, "classifier '" + command_ + "' exited");
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
  const std::string reply = buffer_.substr(0, nl);
  buffer_.erase(0, nl + 1);
  auto tag = parse_tag(reply);
  if (!tag) {
    throw Error(ErrorCode::kClassifierUnavailable, "classifier replied '" + reply + "', not a tag");
  }
  return *tag;
}

std::unique_ptr<Classifier> make_classifier(std::string_view spec) {
  if (spec == "rules") return std::make_unique<RuleClassifier>();
  if (starts_with(spec, "exec:") && spec.size() > 5) {
    return std::make_unique<ExecClassifier>(std::string(spec.substr(5)));
  }
  throw Error(ErrorCode::kInvalidArgument,
              "classifier must be 'rules' or 'exec:<command>', got '" + std::string(spec) + "'");
}

DATag classify(const Chunk& chunk, Classifier& classifier) {
  return classifier.classify(chunk.text);
}

std::vector<double> DADistribution::vector() const {
  std::vector<double> v;
  for (DATag tag : kAllTags) v.push_back(percentages.at(tag));
  return v;
}

DADistribution tally(CommunicationMode mode, const std::vector<DATag>& tags) {
  DADistribution d;
  d.mode = mode;
  for (DATag tag : kAllTags) d.counts[tag] = 0;
  for (DATag tag : tags) ++d.counts[tag];
  d.total = static_cast<long>(tags.size());
  for (DATag tag : kAllTags) {
    d.percentages[tag] = d.total == 0 ? 0.0 : 100.0 * static_cast<double>(d.counts[tag]) /
                                                  static_cast<double>(d.total);
  }
  std::vector<DATag> ranked(kAllTags.begin(), kAllTags.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](DATag a, DATag b) { return d.counts[a] > d.counts[b]; });
  for (DATag tag : ranked) {
    if (d.top5.size() == 5 || d.counts[tag] == 0) break;
    d.top5.push_back(tag);
  }
  return d;
}

DADistribution distribution(CommunicationMode mode, const std::vector<Transcript>& transcripts,
                            Classifier& classifier, int parallelism) {
  std::vector<const Transcript*> selected;
  for (const auto& t : transcripts) {
    if (t.mode == mode) selected.push_back(&t);
  }
  std::vector<std::vector<DATag>> per_transcript(selected.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) {
      try {
        for (const auto& message : selected[i]->messages) {
          for (const auto& chunk : segment(message, selected[i]->id())) {
            per_transcript[i].push_back(classify(chunk, classifier));
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), 1,
                              std::max<std::size_t>(selected.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<DATag> tags;
  for (const auto& v : per_transcript) tags.insert(tags.end(), v.begin(), v.end());
  return tally(mode, tags);
}

std::vector<DADistribution> distribution_by_mode(const std::vector<Transcript>& transcripts,
                                                 Classifier& classifier, int parallelism) {
  std::set<CommunicationMode> modes;
  for (const auto& t : transcripts) modes.insert(t.mode);
  std::vector<DADistribution> out;
  for (auto mode : modes) out.push_back(distribution(mode, transcripts, classifier, parallelism));
  return out;
}

std::string_view to_string(TauVariant variant) {
  return variant == TauVariant::kB ? "tau_b" : "tau_a";
}

namespace {

// Sorts v[lo, hi) and returns the number of inversions (Knight's swap count).
long long merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum of t(t-1)/2 over runs of equal adjacent values (or pairs) in sorted data.
template <typename T>
long long tied_pairs(const std::vector<T>& sorted) {
  long long total = 0;
  long long run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

CorrelationResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y,
                              TauVariant variant) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "vectors of length " + std::to_string(x.size()) +
                                                " and " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorCode::kLengthMismatch, "need at least two observations");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) {
      throw Error(ErrorCode::kInvalidArgument, "NaN in input");
    }
  }
  const long long n = static_cast<long long>(x.size());
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < x.size(); ++i) pairs.emplace_back(x[i], y[i]);
  std::sort(pairs.begin(), pairs.end());

  std::vector<double> xs, ys;
  for (const auto& p : pairs) {
    xs.push_back(p.first);
    ys.push_back(p.second);
  }
  const long long n0 = n * (n - 1) / 2;
  const long long n1 = tied_pairs(xs);     // tied in x
  const long long n3 = tied_pairs(pairs);  // tied in both
  std::vector<double> scratch(ys.size());
  const long long discordant = merge_count(ys, scratch, 0, ys.size());
  const long long n2 = tied_pairs(ys);  // ys is now sorted
  const long long numerator = n0 - n1 - n2 + n3 - 2 * discordant;  // C - D

  if (n1 == n0 || n2 == n0) throw Error(ErrorCode::kAllTies, "an input is constant");
  CorrelationResult r;
  r.n = static_cast<int>(n);
  r.variant = variant;
  if (variant == TauVariant::kA) {
    r.tau = static_cast<double>(numerator) / static_cast<double>(n0);
  } else {
    r.tau = static_cast<double>(numerator) /
            std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  }
  r.tau = std::clamp(r.tau, -1.0, 1.0);
  return r;
}

std::vector<CorrelationResult> compare_modes(const std::vector<DADistribution>& distributions,
                                             TauVariant variant) {
  if (distributions.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two distributions to compare");
  }
  std::vector<CorrelationResult> matrix;
  for (const auto& a : distributions) {
    for (const auto& b : distributions) {
      CorrelationResult r;
      if (&a == &b) {
        r.tau = 1.0;
        r.n = static_cast<int>(kAllTags.size());
        r.variant = variant;
      } else {
        r = kendall_tau(a.vector(), b.vector(), variant);
      }
      r.mode_a = a.mode;
      r.mode_b = b.mode;
      matrix.push_back(r);
    }
  }
  return matrix;
}

nlohmann::ordered_json histogram_json(const std::vector<DADistribution>& distributions) {
  nlohmann::ordered_json tags = nlohmann::ordered_json::array();
  for (DATag tag : kAllTags) tags.push_back(to_string(tag));
  nlohmann::ordered_json modes = nlohmann::ordered_json::array();
  for (const auto& d : distributions) {
    nlohmann::ordered_json bars = nlohmann::ordered_json::array();
    for (DATag tag : kAllTags) {
      const bool top = std::find(d.top5.begin(), d.top5.end(), tag) != d.top5.end();
      bars.push_back({{"tag", to_string(tag)},
                      {"count", d.counts.at(tag)},
                      {"percentage", d.percentages.at(tag)},
                      {"top5", top}});
    }
    nlohmann::ordered_json top5 = nlohmann::ordered_json::array();
    for (DATag tag : d.top5) top5.push_back(to_string(tag));
    modes.push_back({{"mode", to_string(d.mode)},
                     {"label", display_name(d.mode)},
                     {"total_chunks", d.total},
                     {"top5", top5},
                     {"bars", bars}});
  }
  return {{"tags", tags}, {"modes", modes}};
}

void write_analysis(const fs::path& out_dir, const std::vector<DADistribution>& distributions,
                    TauVariant variant) {
  fs::create_directories(out_dir);
  auto number = [](double v) { return nlohmann::json(v).dump(); };
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (out_dir / name).string());
  };

  std::string dist_csv = csv::format_row({"mode", "tag", "count", "percentage"});
  for (const auto& d : distributions) {
    for (DATag tag : kAllTags) {
      dist_csv += csv::format_row({std::string(to_string(d.mode)), std::string(to_string(tag)),
                                   std::to_string(d.counts.at(tag)),
                                   number(d.percentages.at(tag))});
    }
  }
  write(kDistributionFile, dist_csv);

  std::vector<DADistribution> nonempty;
  for (const auto& d : distributions) {
    if (d.total > 0) nonempty.push_back(d);
  }
  std::string corr_csv = csv::format_row({"mode_a", "mode_b", "tau", "variant"});
  for (const auto& a : nonempty) {
    for (const auto& b : nonempty) {
      if (nonempty.size() < 2) break;
      std::string tau;
      if (&a == &b) {
        tau = number(1.0);
      } else {
        try {
          tau = number(kendall_tau(a.vector(), b.vector(), variant).tau);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kAllTies) throw;  // undefined: empty field
        }
      }
      corr_csv += csv::format_row({std::string(to_string(a.mode)),
                                   std::string(to_string(b.mode)), tau,
                                   std::string(to_string(variant))});
    }
  }
  write(kCorrelationFile, corr_csv);
  write(kHistogramFile, histogram_json(distributions).dump(2) + "\n");
}

}  // namespace duetmath
