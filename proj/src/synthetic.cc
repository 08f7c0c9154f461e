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

#include "arnn/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace arnn {

namespace {

size_t uniform(std::mt19937_64& rng, size_t n) {
  return std::uniform_int_distribution<size_t>(0, n - 1)(rng);
}

std::vector<std::string> names(const std::string& prefix, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void finish(SyntheticCorpus& c, const std::vector<std::string>& tokens) {
  c.vocab = Vocabulary::from_tokens(tokens);
  c.dialogues = encode_all(c.vocab, c.raw);
}

}  // namespace

SyntheticCorpus make_recall_corpus(const RecallTaskConfig& cfg) {
  if (cfg.keys == 0 || cfg.fillers == 0 || cfg.first_len == 0) {
    throw UsageError("recall task needs keys, fillers and a non-empty first utterance");
  }
  const auto keys = names("key", cfg.keys);
  const auto fillers = names("f", cfg.fillers);
  std::vector<std::string> tokens{"recall"};
  tokens.insert(tokens.end(), keys.begin(), keys.end());
  tokens.insert(tokens.end(), fillers.begin(), fillers.end());

  SyntheticCorpus c;
  std::mt19937_64 rng(cfg.seed);
  for (size_t n = 0; n < cfg.dialogues; ++n) {
    const size_t key = uniform(rng, cfg.keys);
    const size_t at = uniform(rng, cfg.first_len);
    RawDialogue d;
    std::vector<std::string> first;
    for (size_t i = 0; i < cfg.first_len; ++i) {
      first.push_back(i == at ? keys[key] : fillers[uniform(rng, cfg.fillers)]);
    }
    d.push_back(std::move(first));
    for (size_t t = 0; t < cfg.filler_turns; ++t) {
      std::vector<std::string> u;
      for (size_t i = 0; i < cfg.filler_len; ++i) u.push_back(fillers[uniform(rng, cfg.fillers)]);
      d.push_back(std::move(u));
    }
    d.push_back({"recall", keys[key]});
    c.raw.push_back(std::move(d));
    c.labels.push_back(key);
    // Each turn contributes marker + tokens + </u>.
    c.source_pos.push_back(1 + at);
    const size_t final_start = (cfg.first_len + 2) + cfg.filler_turns * (cfg.filler_len + 2);
    c.target_pos.push_back(final_start + 2);
  }
  finish(c, tokens);
  return c;
}

SyntheticCorpus make_grammar_corpus(const GrammarTaskConfig& cfg) {
  if (cfg.words < 2 || cfg.successors == 0 || cfg.successors > cfg.words ||
      cfg.min_len == 0 || cfg.max_len < cfg.min_len || cfg.turns < 2) {
    throw UsageError("invalid grammar task configuration");
  }
  const auto words = names("w", cfg.words);
  std::mt19937_64 g(cfg.grammar_seed);
  std::vector<std::vector<size_t>> next(cfg.words);
  std::vector<std::discrete_distribution<size_t>> pick;
  std::vector<size_t> reply(cfg.words);
  for (size_t w = 0; w < cfg.words; ++w) {
    std::vector<size_t> all(cfg.words);
    std::iota(all.begin(), all.end(), size_t{0});
    std::shuffle(all.begin(), all.end(), g);
    next[w].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.successors));
    std::vector<double> weights;
    for (size_t j = 0; j < cfg.successors; ++j) weights.push_back(1.0 / static_cast<double>(j + 1));
    pick.emplace_back(weights.begin(), weights.end());
    reply[w] = uniform(g, cfg.words);
  }

  SyntheticCorpus c;
  std::mt19937_64 rng(cfg.seed);
  for (size_t n = 0; n < cfg.dialogues; ++n) {
    RawDialogue d;
    size_t last = 0;
    for (size_t t = 0; t < cfg.turns; ++t) {
      const size_t len = cfg.min_len + uniform(rng, cfg.max_len - cfg.min_len + 1);
      size_t w = t == 0 ? uniform(rng, cfg.words) : reply[last];
      std::vector<std::string> u{words[w]};
      for (size_t i = 1; i < len; ++i) {
        w = next[w][pick[w](rng)];
        u.push_back(words[w]);
      }
      last = w;
      d.push_back(std::move(u));
    }
    c.raw.push_back(std::move(d));
  }
  finish(c, words);
  return c;
}

SyntheticCorpus make_topic_corpus(const TopicTaskConfig& cfg) {
  if (cfg.topics == 0 || cfg.topic_words == 0 || cfg.shared_words == 0 || cfg.turns < 2 ||
      cfg.utterance_len == 0) {
    throw UsageError("invalid topic task configuration");
  }
  std::vector<std::vector<std::string>> topic_words;
  std::vector<std::string> tokens;
  for (size_t k = 0; k < cfg.topics; ++k) {
    topic_words.push_back(names("t" + std::to_string(k) + "_", cfg.topic_words));
    tokens.insert(tokens.end(), topic_words.back().begin(), topic_words.back().end());
  }
  const auto shared = names("s", cfg.shared_words);
  tokens.insert(tokens.end(), shared.begin(), shared.end());

  SyntheticCorpus c;
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution history_topic(cfg.history_topic_rate);
  std::bernoulli_distribution response_topic(cfg.response_topic_rate);
  for (size_t n = 0; n < cfg.dialogues; ++n) {
    const size_t k = uniform(rng, cfg.topics);
    RawDialogue d;
    for (size_t t = 0; t < cfg.turns; ++t) {
      auto& is_topic = t + 1 == cfg.turns ? response_topic : history_topic;
      std::vector<std::string> u;
      for (size_t i = 0; i < cfg.utterance_len; ++i) {
        u.push_back(is_topic(rng) ? topic_words[k][uniform(rng, cfg.topic_words)]
                                  : shared[uniform(rng, cfg.shared_words)]);
      }
      d.push_back(std::move(u));
    }
    c.raw.push_back(std::move(d));
    c.labels.push_back(k);
  }
  finish(c, tokens);
  return c;
}

size_t LdaTask::topic_of(TokenId w) const {
  return (w - kReservedCount) / words_per_topic;
}

LdaTask make_lda_task(const LdaTaskConfig& cfg) {
  if (cfg.topics < 2 || cfg.words_per_topic == 0 || cfg.doc_len == 0) {
    throw UsageError("invalid LDA task configuration");
  }
  LdaTask task;
  task.words_per_topic = cfg.words_per_topic;
  task.vocab_size = kReservedCount + cfg.topics * cfg.words_per_topic;
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution pure(cfg.purity);
  for (size_t n = 0; n < cfg.documents; ++n) {
    const size_t k = uniform(rng, cfg.topics);
    BagOfWords doc;
    for (size_t i = 0; i < cfg.doc_len; ++i) {
      size_t topic = k;
      if (!pure(rng)) topic = (k + 1 + uniform(rng, cfg.topics - 1)) % cfg.topics;
      doc.push_back(static_cast<TokenId>(kReservedCount + topic * cfg.words_per_topic +
                                         uniform(rng, cfg.words_per_topic)));
    }
    task.docs.push_back(std::move(doc));
    task.labels.push_back(k);
  }
  return task;
}

std::vector<RawDialogue> make_zipf_corpus(size_t dialogues, size_t types, double s,
                                          size_t utterance_len, uint64_t seed) {
  if (types == 0 || utterance_len == 0) throw UsageError("invalid Zipf corpus configuration");
  std::vector<double> weights;
  for (size_t r = 0; r < types; ++r) weights.push_back(std::pow(static_cast<double>(r + 1), -s));
  std::discrete_distribution<size_t> draw(weights.begin(), weights.end());
  std::mt19937_64 rng(seed);
  std::vector<RawDialogue> out;
  for (size_t n = 0; n < dialogues; ++n) {
    std::vector<std::string> u;
    for (size_t i = 0; i < utterance_len; ++i) u.push_back("z" + std::to_string(draw(rng)));
    out.push_back({std::move(u)});
  }
  return out;
}

}  // namespace arnn
