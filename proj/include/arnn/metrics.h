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

#include <map>
#include <string>
#include <vector>

#include "arnn/corpus.h"
#include "arnn/model.h"

namespace arnn {

// Teacher-forced outcome at one target position.
struct PositionScore {
  double log_prob = 0.0;
  TokenId predicted = 0;
  TokenId reference = 0;
  bool in_last = false;  // inside the final utterance
};

// Anything that can score reference tokens position by position. Metrics
// are computed from these records, so hand-built predictors can stand in for
// a model in tests.
class PositionScorer {
 public:
  virtual ~PositionScorer() = default;
  virtual std::vector<PositionScore> score(const Example& example) const = 0;
};

class ModelScorer : public PositionScorer {
 public:
  explicit ModelScorer(const Model& model) : model_(model) {}
  std::vector<PositionScore> score(const Example& example) const override;

 private:
  const Model& model_;
};

// Builds one example per dialogue. Topic-feature models need `thetas`
// (one per dialogue); other kinds ignore it.
std::vector<Example> make_examples(ModelKind kind, const std::vector<Dialogue>& dialogues,
                                   const std::vector<Vector>& thetas = {});

struct SpanTotals {
  double log_prob = 0.0;
  size_t tokens = 0;
  size_t errors = 0;
};

struct EvalTotals {
  SpanTotals all;
  SpanTotals last;
  size_t examples = 0;
};

// Scores every example (in parallel) and reduces in example order.
EvalTotals accumulate(const PositionScorer& scorer, const std::vector<Example>& examples);

// exp(-sum log P / tokens). Throws DataError on an empty span.
double perplexity_of(const SpanTotals& span);
// Fraction of positions whose top-1 prediction differs from the reference.
double error_rate_of(const SpanTotals& span);

double perplexity(const PositionScorer& scorer, const std::vector<Example>& examples,
                  bool last_utterance_only);
double word_error_rate(const PositionScorer& scorer, const std::vector<Example>& examples,
                       bool last_utterance_only);

struct EvalReport {
  std::map<std::string, double> values;
  std::map<std::string, size_t> counts;

  // {"metrics": {...}, "counts": {...}}
  std::string to_json() const;
  // metric<TAB>value lines, sorted by metric name.
  std::string to_tsv() const;
};

// PPL, PPL@L, WER and WER@L from a single pass.
EvalReport evaluate(const PositionScorer& scorer, const std::vector<Example>& examples);

// Length-normalized conditional log-likelihood of each candidate (with its
// closing </u>) given the history: sum log P / len^length_alpha.
std::vector<double> candidate_scores(const Model& model, const CandidateSet& set,
                                     const Vector& theta = {}, double length_alpha = 1.0);

// 0-based rank of the truth; ties go to the lower candidate index.
size_t truth_rank(const std::vector<double>& scores, size_t truth_index);

double recall_at_n(const std::vector<std::vector<double>>& scores,
                   const std::vector<size_t>& truth_indices, size_t n);
double recall_at_n(const Model& model, const std::vector<CandidateSet>& sets, size_t n,
                   const std::vector<Vector>& thetas = {}, double length_alpha = 1.0);

// Corpus BLEU over n = 1..max_n with uniform weights and the standard
// brevity penalty. Orders n >= 2 use add-one smoothing ((m+1)/(c+1)); the
// unigram precision is unsmoothed, so a corpus with no unigram match scores 0.
double corpus_bleu(const std::vector<std::vector<TokenId>>& hypotheses,
                   const std::vector<std::vector<TokenId>>& references, size_t max_n = 4);

// Distinct unigrams over all generations / total generated tokens.
double distinct_1(const std::vector<std::vector<TokenId>>& generations);

}  // namespace arnn
