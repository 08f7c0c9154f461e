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

#include "arnn/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "arnn/io.h"

namespace arnn {

Vocabulary::Vocabulary() {
  for (std::string_view t : kReservedTokens) append(std::string(t));
}

void Vocabulary::append(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  auto [it, inserted] = ids_.emplace(token, id);
  if (!inserted) throw DataError("duplicate vocabulary token: " + token);
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& streams,
                             size_t max_size) {
  if (max_size <= kReservedCount) {
    throw UsageError("vocabulary size must exceed the reserved block (" +
                     std::to_string(kReservedCount) + ")");
  }
  struct Count {
    size_t count = 0;
    size_t first = 0;
  };
  std::unordered_map<std::string, Count> counts;
  std::vector<std::string> order;
  size_t total = 0;
  for (const auto& stream : streams) {
    for (const auto& tok : stream) {
      ++total;
      if (std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) !=
          kReservedTokens.end()) {
        continue;
      }
      auto [it, inserted] = counts.try_emplace(tok, Count{0, order.size()});
      if (inserted) order.push_back(tok);
      ++it->second.count;
    }
  }
  if (total == 0) throw DataError("cannot build a vocabulary from an empty corpus");

  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    return counts[a].count > counts[b].count;
  });
  if (order.size() > max_size - kReservedCount) order.resize(max_size - kReservedCount);

  Vocabulary v;
  for (auto& tok : order) v.append(std::move(tok));
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.append(t);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  Vocabulary v;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_of(" \t\r") != std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_number) +
                      ": malformed vocabulary entry");
    }
    v.append(line);
  }
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (size_t i = kReservedCount; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw DataError("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = fnv1a64("");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::vector<TokenId> flatten(const Dialogue& d) {
  std::vector<TokenId> seq;
  for (const auto& u : d.utterances) {
    seq.push_back(speaker_marker(u.speaker));
    seq.insert(seq.end(), u.tokens.begin(), u.tokens.end());
    seq.push_back(kEndOfUtterance);
  }
  seq.push_back(kEndOfDialogue);
  return seq;
}

Dialogue unflatten(const std::vector<TokenId>& seq) {
  Dialogue d;
  size_t i = 0;
  while (i < seq.size() && seq[i] != kEndOfDialogue) {
    if (seq[i] != kSpeakerA && seq[i] != kSpeakerB) {
      throw DataError("unflatten: expected a speaker marker at position " +
                      std::to_string(i));
    }
    Utterance u;
    u.speaker = seq[i] == kSpeakerA ? Speaker::kA : Speaker::kB;
    ++i;
    while (i < seq.size() && seq[i] != kEndOfUtterance) {
      if (seq[i] == kEndOfDialogue || seq[i] == kSpeakerA || seq[i] == kSpeakerB) {
        throw DataError("unflatten: unterminated utterance at position " +
                        std::to_string(i));
      }
      u.tokens.push_back(seq[i++]);
    }
    if (i == seq.size()) throw DataError("unflatten: missing end-of-utterance marker");
    ++i;
    d.utterances.push_back(std::move(u));
  }
  if (i + 1 != seq.size()) throw DataError("unflatten: missing or early end-of-dialogue");
  return d;
}

Speaker next_speaker(const Dialogue& history) {
  return history.utterances.empty() ? Speaker::kA
                                    : other(history.utterances.back().speaker);
}

std::vector<TokenId> response_prefix(const Dialogue& history) {
  std::vector<TokenId> seq = flatten(history);
  seq.back() = speaker_marker(next_speaker(history));
  return seq;
}

Dialogue history_of(const Dialogue& d) {
  Dialogue h = d;
  if (!h.utterances.empty()) h.utterances.pop_back();
  return h;
}

namespace {

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

RawDialogue parse_corpus_line(std::string_view line, size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto fail = [&](const std::string& what) {
    throw DataError("line " + std::to_string(line_number) + ": " + what);
  };
  RawDialogue d;
  constexpr std::string_view kSep = " | ";
  while (true) {
    const size_t pos = line.find(kSep);
    const std::string_view piece = line.substr(0, pos);
    auto tokens = split_whitespace(piece);
    for (const auto& t : tokens) {
      if (t == "|") fail("stray utterance separator");
      if (std::find(kReservedTokens.begin(), kReservedTokens.end(), t) !=
          kReservedTokens.end()) {
        fail("reserved token '" + t + "' in corpus text");
      }
    }
    d.push_back(std::move(tokens));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + kSep.size());
  }
  if (d.size() == 1 && d[0].empty()) fail("empty dialogue");
  return d;
}

std::vector<RawDialogue> read_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<RawDialogue> corpus;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    try {
      corpus.push_back(parse_corpus_line(line, line_number));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + e.what());
    }
  }
  return corpus;
}

std::string format_corpus_line(const RawDialogue& d) {
  std::string out;
  for (size_t u = 0; u < d.size(); ++u) {
    if (u > 0) out += " | ";
    for (size_t i = 0; i < d[u].size(); ++i) {
      if (i > 0) out += ' ';
      out += d[u][i];
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<RawDialogue>& corpus) {
  std::string out;
  for (const auto& d : corpus) {
    out += format_corpus_line(d);
    out += '\n';
  }
  write_file_atomic(path, out);
}

Dialogue encode(const Vocabulary& vocab, const RawDialogue& raw) {
  Dialogue d;
  Speaker s = Speaker::kA;
  for (const auto& u : raw) {
    d.utterances.push_back({s, vocab.encode(u)});
    s = other(s);
  }
  return d;
}

std::vector<Dialogue> encode_all(const Vocabulary& vocab,
                                 const std::vector<RawDialogue>& raw) {
  std::vector<Dialogue> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(encode(vocab, r));
  return out;
}

RawDialogue decode(const Vocabulary& vocab, const Dialogue& d) {
  RawDialogue raw;
  for (const auto& u : d.utterances) {
    std::vector<std::string> toks;
    for (TokenId t : u.tokens) toks.push_back(vocab.token(t));
    raw.push_back(std::move(toks));
  }
  return raw;
}

std::string detokenize(const Vocabulary& vocab, const std::vector<TokenId>& tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (is_reserved(t) && t != kUnk) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(t);
  }
  return out;
}

std::vector<std::vector<std::string>> token_streams(const std::vector<RawDialogue>& corpus) {
  std::vector<std::vector<std::string>> streams;
  streams.reserve(corpus.size());
  for (const auto& d : corpus) {
    std::vector<std::string> s;
    for (const auto& u : d) s.insert(s.end(), u.begin(), u.end());
    streams.push_back(std::move(s));
  }
  return streams;
}

UnkStats unk_stats(const std::vector<Dialogue>& dialogues) {
  UnkStats s;
  for (const auto& d : dialogues) {
    for (const auto& u : d.utterances) {
      s.total += u.tokens.size();
      s.unk += static_cast<size_t>(std::count(u.tokens.begin(), u.tokens.end(), kUnk));
    }
  }
  return s;
}

void validate(const Dialogue& d, size_t vocab_size) {
  for (const auto& u : d.utterances) {
    for (TokenId t : u.tokens) {
      if (t >= vocab_size) {
        throw DataError("token id " + std::to_string(t) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
      }
    }
  }
}

CandidateSet sample_candidates(const std::vector<Dialogue>& corpus, size_t index,
                               uint64_t seed) {
  if (index >= corpus.size()) throw DataError("sample_candidates: index out of range");
  const Dialogue& d = corpus[index];
  if (d.utterances.size() < 2) {
    throw DataError("sample_candidates: dialogue needs at least two utterances");
  }
  const std::vector<TokenId>& truth = d.utterances.back().tokens;

  // Distinct utterances from other dialogues, in first-seen order.
  std::vector<const std::vector<TokenId>*> pool;
  std::map<std::vector<TokenId>, bool> seen;
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (i == index) continue;
    for (const auto& u : corpus[i].utterances) {
      if (u.tokens == truth) continue;
      if (seen.emplace(u.tokens, true).second) pool.push_back(&u.tokens);
    }
  }
  if (pool.size() < kCandidateCount - 1) {
    throw DataError("sample_candidates: corpus has fewer than 10 distinct utterances");
  }

  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (size_t i = 0; i < kCandidateCount - 1; ++i) {
    std::uniform_int_distribution<size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::uniform_int_distribution<size_t> slot(0, kCandidateCount - 1);

  CandidateSet set;
  set.history = history_of(d);
  set.truth_index = slot(rng);
  size_t next = 0;
  for (size_t i = 0; i < kCandidateCount; ++i) {
    set.candidates.push_back(i == set.truth_index ? truth : *pool[next++]);
  }
  return set;
}

SplitIndices split_indices(size_t n, double train_ratio, double dev_ratio,
                           double test_ratio, uint64_t seed) {
  if (train_ratio < 0 || dev_ratio < 0 || test_ratio < 0 ||
      std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9) {
    throw UsageError("split ratios must be non-negative and sum to 1");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const size_t n_train = std::min(n, static_cast<size_t>(std::llround(n * train_ratio)));
  const size_t n_dev =
      std::min(n - n_train, static_cast<size_t>(std::llround(n * dev_ratio)));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.dev.assign(order.begin() + n_train, order.begin() + n_train + n_dev);
  s.test.assign(order.begin() + n_train + n_dev, order.end());
  return s;
}

}  // namespace arnn
