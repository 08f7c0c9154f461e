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

#include <string>
#include <string_view>
#include <vector>

#include "arnn/corpus.h"
#include "arnn/model.h"

namespace arnn {

// Attention weights recorded while producing a continuation. `columns` are
// the attended positions: for language models the history prefix followed by
// the continuation, for seq2seq the encoded source. Row t covers the first
// scope(t) columns.
struct AttentionTrace {
  std::vector<TokenId> columns;
  std::vector<TokenId> generated;
  std::vector<Vector> rows;
};

struct Candidate {
  std::vector<TokenId> tokens;  // ends with </u> when the hypothesis completed
  double log_likelihood = 0.0;  // raw sum of log P over `tokens`
  double score = 0.0;           // log_likelihood / |tokens|^length_alpha
  bool complete = false;
  AttentionTrace trace;         // filled when attention recording is on
};

struct GenerateConfig {
  size_t beam_width = 10;
  size_t max_len = 30;
  size_t n_best = 10;
  double length_alpha = 1.0;
  bool record_attention = false;
  // Never proposed during search.
  std::vector<TokenId> banned = {kUnk, kPad, kEndOfDialogue, kSpeakerA, kSpeakerB};
};

// Beam search. Each step expands every live hypothesis by every allowed
// token and keeps the `beam_width` best by raw log-likelihood; hypotheses
// leave the beam on </u> or at max_len. Finished hypotheses are ranked by
// length-normalized score, ties by completion order. beam_width = 1 is
// greedy decoding.
std::vector<Candidate> generate(const Model& model, const Dialogue& history,
                                const GenerateConfig& config, const Vector& theta = {});

// One generate() call per history, decoded in parallel.
std::vector<std::vector<Candidate>> generate_all(const Model& model,
                                                 const std::vector<Dialogue>& histories,
                                                 const GenerateConfig& config,
                                                 const std::vector<Vector>& thetas = {});

// Teacher-forces `continuation` after the history and records alpha at every
// step. Throws UsageError for attention-free models.
AttentionTrace trace_attention(const Model& model, const Dialogue& history,
                               const std::vector<TokenId>& continuation,
                               const Vector& theta = {});

// Sum of log P(continuation | history) by full rescoring.
double continuation_log_likelihood(const Model& model, const Dialogue& history,
                                   const std::vector<TokenId>& continuation,
                                   const Vector& theta = {});

// One line per candidate: history<TAB>rank<TAB>score<TAB>log_likelihood<TAB>text,
// with rank starting at 1 and scores printed with round-trip precision.
std::string format_candidates(const Vocabulary& vocab, size_t history_index,
                              const std::vector<Candidate>& candidates);

struct CandidateRecord {
  size_t history = 0;
  size_t rank = 0;
  double score = 0.0;
  double log_likelihood = 0.0;
  std::vector<TokenId> tokens;  // re-encoded text, without </u>
};

std::vector<CandidateRecord> parse_candidates(const Vocabulary& vocab, std::string_view text);

// {"columns": [...], "generated": [...], "rows": [[...], ...]} with token
// strings as labels.
std::string trace_to_json(const Vocabulary& vocab, const AttentionTrace& trace);

}  // namespace arnn
