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

// Dialogue-act analysis of transcripts: chunk segmentation, an 11-tag
// classifier (rule cascade or external process), per-mode tag
// distributions and Kendall rank correlation between modes.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "duetmath/types.h"

namespace duetmath {

enum class DATag { kH, kDIR, kACK, kRC, kRF, kPF, kNF, kLF, kQ, kA, kS };

/// Canonical vector order, also the tie-break order of top-5 rankings.
inline constexpr std::array<DATag, 11> kAllTags = {
    DATag::kH,  DATag::kDIR, DATag::kACK, DATag::kRC, DATag::kRF, DATag::kPF,
    DATag::kNF, DATag::kLF,  DATag::kQ,   DATag::kA,  DATag::kS,
};

std::string_view to_string(DATag tag);
/// Accepts the short names ("DIR"), case-insensitive. nullopt otherwise.
std::optional<DATag> parse_tag(std::string_view text);

struct Chunk {
  std::string transcript_id;
  int turn_index = 0;
  int chunk_index = 0;
  std::string text;
  std::optional<DATag> tag;
};

/// Splits text into chunk texts. Each chunk is a trimmed, contiguous slice
/// of the input:
///   - display math (\[..\], $$..$$, \begin..\end) and runs of equation
///     lines merge into one chunk;
///   - each bullet or numbered list item is one chunk;
///   - prose splits after . ? ! followed by whitespace and a capital letter
///     (or the end), never inside $..$, \(..\), \[..\] or \boxed{..}.
std::vector<std::string> segment_text(std::string_view text);

std::vector<Chunk> segment(const Message& message, const std::string& transcript_id = "");

/// Whitespace-collapsed equality of the source and the space-joined chunks.
bool reconstructs(std::string_view source, const std::vector<std::string>& chunks);

class Classifier {
 public:
  virtual ~Classifier() = default;
  /// Exactly one tag per chunk text. Implementations must be safe to call
  /// from several threads.
  virtual DATag classify(std::string_view chunk_text) = 0;
};

/// First match wins: ACK, PF, NF, LF, DIR, H, RC, RF, Q, A, else S.
class RuleClassifier : public Classifier {
 public:
  DATag classify(std::string_view chunk_text) override;
};

/// Runs `/bin/sh -c command` once and talks to it over stdin/stdout: one
/// JSON string (the chunk text) per line out, one tag name per line back.
/// Calls are serialized. Throws Error(kClassifierUnavailable) when the
/// process cannot start, dies, or answers with something that is not a tag.
class ExecClassifier : public Classifier {
 public:
  explicit ExecClassifier(std::string command);
  ~ExecClassifier() override;
  ExecClassifier(const ExecClassifier&) = delete;
  ExecClassifier& operator=(const ExecClassifier&) = delete;

  DATag classify(std::string_view chunk_text) override;

 private:
  std::string command_;
  std::mutex mu_;
  int fd_ = -1;
  int pid_ = -1;
  std::string buffer_;
};

/// Builds "rules" or "exec:<command>". Throws Error(kInvalidArgument).
std::unique_ptr<Classifier> make_classifier(std::string_view spec);

DATag classify(const Chunk& chunk, Classifier& classifier);

struct DADistribution {
  CommunicationMode mode = CommunicationMode::kSingleAgent;
  std::map<DATag, long> counts;        // all 11 tags present
  std::map<DATag, double> percentages; // 100 * count / total; all 0 when total is 0
  long total = 0;
  /// Up to five tags with non-zero count, by count then kAllTags order.
  std::vector<DATag> top5;

  /// Percentages in kAllTags order.
  std::vector<double> vector() const;
};

DADistribution tally(CommunicationMode mode, const std::vector<DATag>& tags);

/// Chunks and classifies every message of every transcript of `mode`, both
/// agents merged. Transcripts are processed on up to `parallelism` threads.
DADistribution distribution(CommunicationMode mode, const std::vector<Transcript>& transcripts,
                            Classifier& classifier, int parallelism = 1);

/// One distribution per mode present in `transcripts`, in table order.
std::vector<DADistribution> distribution_by_mode(const std::vector<Transcript>& transcripts,
                                                 Classifier& classifier, int parallelism = 1);

enum class TauVariant { kB, kA };
std::string_view to_string(TauVariant variant);

struct CorrelationResult {
  std::optional<CommunicationMode> mode_a;
  std::optional<CommunicationMode> mode_b;
  double tau = 0.0;
  int n = 0;
  TauVariant variant = TauVariant::kB;
};

/// Kendall rank correlation in O(n log n). tau-b corrects for ties; tau-a
/// divides by all n(n-1)/2 pairs. Throws Error(kLengthMismatch) for
/// differing lengths or n < 2, Error(kAllTies) when either input is constant
/// (the coefficient is undefined), kInvalidArgument on NaN.
CorrelationResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y,
                              TauVariant variant = TauVariant::kB);

/// Full matrix over the aligned percentage vectors, row-major, diagonal 1.
/// Needs at least two distributions.
std::vector<CorrelationResult> compare_modes(const std::vector<DADistribution>& distributions,
                                             TauVariant variant = TauVariant::kB);

/// Plot data: per mode, tag counts and percentages with top-5 flags.
nlohmann::ordered_json histogram_json(const std::vector<DADistribution>& distributions);

inline constexpr char kDistributionFile[] = "da_distribution.csv";
inline constexpr char kCorrelationFile[] = "da_correlation.csv";
inline constexpr char kHistogramFile[] = "histogram.json";

/// Writes da_distribution.csv, da_correlation.csv and histogram.json.
/// Modes with no chunks are left out of the correlation matrix, which is
/// omitted entirely (header only) when fewer than two modes remain.
void write_analysis(const std::filesystem::path& out_dir,
                    const std::vector<DADistribution>& distributions,
                    TauVariant variant = TauVariant::kB);

}  // namespace duetmath
