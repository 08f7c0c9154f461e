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

#include "arnn/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "arnn/parallel.h"
#include "json.hpp"

namespace arnn {

std::vector<PositionScore> ModelScorer::score(const Example& example) const {
  const TokenScores s = score_example(model_, example);
  std::vector<PositionScore> out(example.target.size());
  for (size_t t = 0; t < out.size(); ++t) {
    out[t] = {s.log_probs[t], s.argmax[t], example.target[t],
              t >= example.last_begin && t < example.last_end};
  }
  return out;
}

std::vector<Example> make_examples(ModelKind kind, const std::vector<Dialogue>& dialogues,
                                   const std::vector<Vector>& thetas) {
  if (uses_topics(kind) && thetas.size() != dialogues.size()) {
    throw UsageError("topic-feature model needs one topic vector per dialogue");
  }
  std::vector<Example> out;
  out.reserve(dialogues.size());
  for (size_t i = 0; i < dialogues.size(); ++i) {
    out.push_back(make_example(kind, dialogues[i], uses_topics(kind) ? thetas[i] : Vector{}));
  }
  return out;
}

EvalTotals accumulate(const PositionScorer& scorer, const std::vector<Example>& examples) {
  std::vector<std::vector<PositionScore>> per(examples.size());
  parallel_for(examples.size(), [&](size_t i) { per[i] = scorer.score(examples[i]); });
  EvalTotals totals;
  totals.examples = examples.size();
  for (const auto& positions : per) {
    for (const auto& p : positions) {
      const bool wrong = p.predicted != p.reference;
      totals.all.log_prob += p.log_prob;
      ++totals.all.tokens;
      totals.all.errors += wrong;
      if (p.in_last) {
        totals.last.log_prob += p.log_prob;
        ++totals.last.tokens;
        totals.last.errors += wrong;
      }
    }
  }
  return totals;
}

double perplexity_of(const SpanTotals& span) {
  if (span.tokens == 0) throw DataError("perplexity over zero tokens");
  return std::exp(-span.log_prob / static_cast<double>(span.tokens));
}

double error_rate_of(const SpanTotals& span) {
  if (span.tokens == 0) throw DataError("error rate over zero tokens");
  return static_cast<double>(span.errors) / static_cast<double>(span.tokens);
}

double perplexity(const PositionScorer& scorer, const std::vector<Example>& examples,
                  bool last_utterance_only) {
  if (examples.empty()) throw DataError("perplexity: empty evaluation set");
  const EvalTotals t = accumulate(scorer, examples);
  return perplexity_of(last_utterance_only ? t.last : t.all);
}

double word_error_rate(const PositionScorer& scorer, const std::vector<Example>& examples,
                       bool last_utterance_only) {
  if (examples.empty()) throw DataError("word_error_rate: empty evaluation set");
  const EvalTotals t = accumulate(scorer, examples);
  return error_rate_of(last_utterance_only ? t.last : t.all);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : values) j["metrics"][k] = v;
  j["counts"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : counts) j["counts"][k] = v;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_tsv() const {
  std::string out;
  char buf[64];
  for (const auto& [k, v] : values) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += k + "\t" + buf + "\n";
  }
  return out;
}

EvalReport evaluate(const PositionScorer& scorer, const std::vector<Example>& examples) {
  if (examples.empty()) throw DataError("evaluate: empty evaluation set");
  const EvalTotals t = accumulate(scorer, examples);
  EvalReport r;
  r.values["ppl"] = perplexity_of(t.all);
  r.values["ppl@L"] = perplexity_of(t.last);
  r.values["wer"] = error_rate_of(t.all);
  r.values["wer@L"] = error_rate_of(t.last);
  r.counts["dialogues"] = t.examples;
  r.counts["tokens"] = t.all.tokens;
  r.counts["tokens@L"] = t.last.tokens;
  return r;
}

std::vector<double> candidate_scores(const Model& model, const CandidateSet& set,
                                     const Vector& theta, double length_alpha) {
  if (set.candidates.size() != kCandidateCount || set.truth_index >= kCandidateCount) {
    throw DataError("candidate set must hold exactly 10 candidates");
  }
  std::vector<double> out;
  out.reserve(set.candidates.size());
  for (const auto& c : set.candidates) {
    std::vector<TokenId> cont = c;
    cont.push_back(kEndOfUtterance);
    const Example ex = make_continuation_example(model.kind(), set.history, cont, theta);
    const TokenScores s = score_example(model, ex);
    double ll = 0.0;
    for (size_t t = ex.last_begin; t < ex.last_end; ++t) ll += s.log_probs[t];
    out.push_back(ll / std::pow(static_cast<double>(cont.size()), length_alpha));
  }
  return out;
}

size_t truth_rank(const std::vector<double>& scores, size_t truth_index) {
  const double truth = scores.at(truth_index);
  size_t rank = 0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > truth || (scores[j] == truth && j < truth_index)) ++rank;
  }
  return rank;
}

double recall_at_n(const std::vector<std::vector<double>>& scores,
                   const std::vector<size_t>& truth_indices, size_t n) {
  if (scores.empty() || scores.size() != truth_indices.size()) {
    throw DataError("recall_at_n: need one truth index per candidate set");
  }
  if (n < 1 || n > kCandidateCount) throw UsageError("recall_at_n: N must be in [1, 10]");
  size_t hits = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != kCandidateCount) {
      throw DataError("candidate set must hold exactly 10 candidates");
    }
    hits += truth_rank(scores[i], truth_indices[i]) < n;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double recall_at_n(const Model& model, const std::vector<CandidateSet>& sets, size_t n,
                   const std::vector<Vector>& thetas, double length_alpha) {
  if (uses_topics(model.kind()) && thetas.size() != sets.size()) {
    throw UsageError("topic-feature model needs one topic vector per candidate set");
  }
  std::vector<std::vector<double>> scores(sets.size());
  std::vector<size_t> truth(sets.size());
  parallel_for(sets.size(), [&](size_t i) {
    scores[i] = candidate_scores(model, sets[i], thetas.empty() ? Vector{} : thetas[i],
                                 length_alpha);
    truth[i] = sets[i].truth_index;
  });
  return recall_at_n(scores, truth, n);
}

namespace {

std::map<std::vector<TokenId>, size_t> ngram_counts(const std::vector<TokenId>& s, size_t n) {
  std::map<std::vector<TokenId>, size_t> counts;
  for (size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::vector<TokenId>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                  s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<TokenId>>& hypotheses,
                   const std::vector<std::vector<TokenId>>& references, size_t max_n) {
  if (hypotheses.empty()) throw DataError("corpus_bleu: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw DataError("corpus_bleu: hypothesis and reference counts differ");
  }
  if (max_n == 0) throw UsageError("corpus_bleu: max_n must be positive");
  std::vector<double> matches(max_n, 0.0), totals(max_n, 0.0);
  double hyp_len = 0.0, ref_len = 0.0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += static_cast<double>(hypotheses[i].size());
    ref_len += static_cast<double>(references[i].size());
    for (size_t n = 1; n <= max_n; ++n) {
      const auto hyp = ngram_counts(hypotheses[i], n);
      const auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : hyp) {
        totals[n - 1] += static_cast<double>(count);
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }
  if (matches[0] == 0.0 || hyp_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (size_t n = 0; n < max_n; ++n) {
    const double p = n == 0 ? matches[0] / totals[0] : (matches[n] + 1.0) / (totals[n] + 1.0);
    log_sum += std::log(p);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

double distinct_1(const std::vector<std::vector<TokenId>>& generations) {
  std::set<TokenId> distinct;
  size_t total = 0;
  for (const auto& g : generations) {
    distinct.insert(g.begin(), g.end());
    total += g.size();
  }
  if (total == 0) throw DataError("distinct_1: no generated tokens");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

}  // namespace arnn
