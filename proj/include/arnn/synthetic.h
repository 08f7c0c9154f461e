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

#include <cstdint>
#include <string>
#include <vector>

#include "arnn/corpus.h"
#include "arnn/topics.h"

namespace arnn {

// Generated dialogues together with the vocabulary that covers all of them
// (token order fixed by the generator, so ids are reproducible).
struct SyntheticCorpus {
  std::vector<RawDialogue> raw;
  Vocabulary vocab;
  std::vector<Dialogue> dialogues;
  // Task-specific annotations, one entry per dialogue (empty when unused).
  std::vector<size_t> labels;         // topic or key index
  std::vector<size_t> source_pos;     // position of the source token in flatten()
  std::vector<size_t> target_pos;     // position of the recalling token in flatten()
};

// Long-range recall. The first utterance hides one key token among fillers;
// filler turns follow; the final utterance is "recall <key>". Fillers are
// uniform, so only the recalled key is predictable from context.
struct RecallTaskConfig {
  size_t dialogues = 1000;
  size_t keys = 8;
  size_t fillers = 12;
  size_t first_len = 6;      // tokens in the first utterance, key included
  size_t filler_turns = 3;
  size_t filler_len = 8;
  uint64_t seed = 1;
};
SyntheticCorpus make_recall_corpus(const RecallTaskConfig& config);

// Every turn follows the same sparse bigram grammar; the first word of each
// reply is a fixed function of the last word of the previous turn.
struct GrammarTaskConfig {
  size_t dialogues = 2000;
  size_t words = 40;
  size_t successors = 3;
  size_t turns = 4;
  size_t min_len = 3;
  size_t max_len = 6;
  uint64_t seed = 1;
  uint64_t grammar_seed = 7;  // fixes the grammar independently of sampling
};
SyntheticCorpus make_grammar_corpus(const GrammarTaskConfig& config);

// Each dialogue has one topic. Every utterance mixes shared function words
// with words of that topic; the final utterance (the response) is denser in
// topic words than the history. Labels hold the topic index.
struct TopicTaskConfig {
  size_t dialogues = 600;
  size_t topics = 4;
  size_t topic_words = 8;
  size_t shared_words = 3;  // few shared words, each more likely than any topic word
  size_t turns = 3;
  size_t utterance_len = 6;
  double history_topic_rate = 0.3;   // P(token is a topic word) in the history
  double response_topic_rate = 0.5;  // same for the final utterance
  uint64_t seed = 1;
};
SyntheticCorpus make_topic_corpus(const TopicTaskConfig& config);

// LDA documents over `topics` disjoint vocabularies of `words_per_topic`
// words (word w belongs to topic w / words_per_topic, ids offset by the
// reserved range). Each document draws a dominant topic (label) and takes
// every token from it with probability `purity`, otherwise from another
// topic.
struct LdaTaskConfig {
  size_t documents = 500;
  size_t topics = 2;
  size_t words_per_topic = 50;
  size_t doc_len = 100;
  double purity = 0.9;
  uint64_t seed = 1;
};
struct LdaTask {
  std::vector<BagOfWords> docs;
  std::vector<size_t> labels;
  size_t vocab_size = 0;
  size_t topic_of(TokenId w) const;
  size_t words_per_topic = 0;
};
LdaTask make_lda_task(const LdaTaskConfig& config);

// Single-utterance dialogues with Zipf(s) token frequencies over `types`
// token types named "z0", "z1", ...
std::vector<RawDialogue> make_zipf_corpus(size_t dialogues, size_t types, double s,
                                          size_t utterance_len, uint64_t seed);

}  // namespace arnn
