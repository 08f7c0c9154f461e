// Copyright 2026 The arnn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arnn/error.h"

namespace arnn {

using TokenId = uint32_t;

// Reserved ids occupy the lowest indices of every vocabulary.
inline constexpr TokenId kUnk = 0;
inline constexpr TokenId kPad = 1;
inline constexpr TokenId kEndOfUtterance = 2;
inline constexpr TokenId kEndOfDialogue = 3;
inline constexpr TokenId kSpeakerA = 4;
inline constexpr TokenId kSpeakerB = 5;
inline constexpr size_t kReservedCount = 6;
inline constexpr std::array<std::string_view, kReservedCount> kReservedTokens = {
    "<unk>", "<pad>", "</u>", "</d>", "<A>", "<B>"};

inline bool is_reserved(TokenId id) { return id < kReservedCount; }

class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();

  // Keeps the most frequent tokens up to `max_size` entries in total
  // (reserved ones included). Ties go to the token seen first.
  static Vocabulary build(const std::vector<std::vector<std::string>>& streams,
                          size_t max_size);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  // One non-reserved token per line; line i holds id kReservedCount + i.
  static Vocabulary load(const std::filesystem::path& path);
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

  uint64_t hash() const;

 private:
  void append(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

enum class Speaker : uint8_t { kA = 0, kB = 1 };

inline TokenId speaker_marker(Speaker s) {
  return s == Speaker::kA ? kSpeakerA : kSpeakerB;
}
inline Speaker other(Speaker s) { return s == Speaker::kA ? Speaker::kB : Speaker::kA; }

struct Utterance {
  Speaker speaker = Speaker::kA;
  std::vector<TokenId> tokens;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::vector<Utterance> utterances;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

// [speaker, tokens..., </u>] per turn, then </d>.
std::vector<TokenId> flatten(const Dialogue& d);
// Inverse of flatten. Throws DataError on a malformed sequence.
Dialogue unflatten(const std::vector<TokenId>& seq);

Speaker next_speaker(const Dialogue& history);
// flatten(history) without the </d> terminator, followed by the marker of the
// speaker who talks next. This is the conditioning context for a response.
std::vector<TokenId> response_prefix(const Dialogue& history);
// All utterances but the last.
Dialogue history_of(const Dialogue& d);

// A raw dialogue: utterances of whitespace-separated tokens.
using RawDialogue = std::vector<std::vector<std::string>>;

// Corpus file: one dialogue per line, utterances separated by " | ".
RawDialogue parse_corpus_line(std::string_view line, size_t line_number);
std::vector<RawDialogue> read_corpus(const std::filesystem::path& path);
std::string format_corpus_line(const RawDialogue& d);
void write_corpus(const std::filesystem::path& path, const std::vector<RawDialogue>& corpus);

// Speakers alternate starting with A.
Dialogue encode(const Vocabulary& vocab, const RawDialogue& raw);
std::vector<Dialogue> encode_all(const Vocabulary& vocab, const std::vector<RawDialogue>& raw);
RawDialogue decode(const Vocabulary& vocab, const Dialogue& d);

// Space-joined tokens with reserved markers dropped (UNK is kept).
std::string detokenize(const Vocabulary& vocab, const std::vector<TokenId>& tokens);

std::vector<std::vector<std::string>> token_streams(const std::vector<RawDialogue>& corpus);

struct UnkStats {
  size_t unk = 0;
  size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(unk) / total; }
};
UnkStats unk_stats(const std::vector<Dialogue>& dialogues);

// Throws DataError if any token id is outside the vocabulary.
void validate(const Dialogue& d, size_t vocab_size);

struct CandidateSet {
  Dialogue history;
  std::vector<std::vector<TokenId>> candidates;  // exactly 10
  size_t truth_index = 0;
};

inline constexpr size_t kCandidateCount = 10;

// The truth is the last utterance of corpus[index]; nine negatives are
// distinct utterances of other dialogues, drawn uniformly without
// replacement and never equal to the truth.
CandidateSet sample_candidates(const std::vector<Dialogue>& corpus, size_t index,
                               uint64_t seed);

struct SplitIndices {
  std::vector<size_t> train;
  std::vector<size_t> dev;
  std::vector<size_t> test;
};

// Seeded shuffle, then train = round(n * r_train), dev = round(n * r_dev),
// test = remainder.
SplitIndices split_indices(size_t n, double train_ratio, double dev_ratio,
                           double test_ratio, uint64_t seed);

}  // namespace arnn
