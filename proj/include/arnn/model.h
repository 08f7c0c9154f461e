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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arnn/corpus.h"
#include "arnn/numeric.h"

namespace arnn {

enum class ModelKind : uint32_t {
  kRnnLm = 0,            // tanh RNN language model
  kAttnRnnLm = 1,        // RNN-LM with attention over the growing history
  kTopicAttnRnnLm = 2,   // attention RNN-LM with a topic-proportion feature
  kSeq2Seq = 3,          // encoder-decoder, decoder starts from the last encoder state
  kAttnSeq2Seq = 4,      // encoder-decoder with attention over encoder states
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

bool has_attention(ModelKind kind);
bool is_seq2seq(ModelKind kind);
bool uses_topics(ModelKind kind);

struct ModelDims {
  size_t hidden = 0;  // d
  size_t embed = 0;   // d_e
  size_t vocab = 0;   // V
  size_t topics = 0;  // K, T-A-RNN only
};

// Parameter arrays. Shapes (rows x cols):
//   H d x d, P d x d_e, E d_e x V, O d x V,
//   W d x d, U d x d_r, b d x 1, O_h d x d, O_z d x d_r, O_theta d x K,
//   enc.H d x d, enc.P d x d_e, enc.E d_e x V.
// d_r = d_e + d for the language models (r_i = [E w_i; h_i]) and d for
// seq2seq (attention over encoder states).
enum class Slot : size_t { kH, kP, kE, kO, kW, kU, kB, kOh, kOz, kOtheta, kEncH, kEncP, kEncE, kCount };

std::string_view slot_name(Slot slot);

class Model {
 public:
  // All parameters zero.
  Model(ModelKind kind, ModelDims dims);

  // Uniform in [-scale, scale] from a seeded generator.
  static Model random(ModelKind kind, ModelDims dims, uint64_t seed, double scale = 0.08);

  ModelKind kind() const { return kind_; }
  const ModelDims& dims() const { return dims_; }
  size_t rep_size() const;

  bool has(Slot slot) const { return index_[static_cast<size_t>(slot)] >= 0; }
  Matrix& param(Slot slot);
  const Matrix& param(Slot slot) const;
  size_t index(Slot slot) const;

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  uint64_t vocab_hash() const { return vocab_hash_; }
  void set_vocab_hash(uint64_t h) { vocab_hash_ = h; }

 private:
  ModelKind kind_;
  ModelDims dims_;
  ParamSet params_;
  std::array<int, static_cast<size_t>(Slot::kCount)> index_{};
  uint64_t vocab_hash_ = 0;
};

// Binary checkpoint; see docs/formats.md.
std::string serialize_checkpoint(const Model& model);
Model parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

// A scored unit. Language models score `target` (the flattened dialogue)
// from the zero state; seq2seq models encode `source` and score `target`.
// [last_begin, last_end) marks the final utterance inside `target`.
struct Example {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
  size_t last_begin = 0;
  size_t last_end = 0;
  Vector theta;
};

// Language models: target = flatten(d), last span = final utterance tokens
// plus its </u>. Seq2seq: source = response_prefix(history), target = final
// utterance tokens plus </u>.
Example make_example(ModelKind kind, const Dialogue& d, Vector theta = {});

// Scores `continuation` given `history`; the last span covers exactly the
// continuation tokens.
Example make_continuation_example(ModelKind kind, const Dialogue& history,
                                  const std::vector<TokenId>& continuation,
                                  Vector theta = {});

// ---- single-step primitives ----

// h_t = tanh(H h_{t-1} + P E_{w_{t-1}}) using the decoder/LM recurrence.
Vector rnn_step(const Model& model, std::span<const double> h_prev, TokenId w_prev);

// softmax(O^T h)
Vector lm_next_dist(const Model& model, std::span<const double> h);

struct AttentionResult {
  Vector z;
  Vector alpha;
};

// beta_i = b . tanh(W h_prev + U r_i), alpha = softmax(beta), z = sum alpha_i r_i.
AttentionResult attend(const Model& model, std::span<const double> h_prev,
                       const std::vector<Vector>& reps);

// softmax(O^T (O_h h + O_z z))
Vector arnn_next_dist(const Model& model, std::span<const double> h,
                      std::span<const double> z);

// softmax(O^T (O_h h + O_z z + O_theta theta)); theta must be a probability
// vector of length K (within 1e-6).
Vector tarnn_next_dist(const Model& model, std::span<const double> h,
                       std::span<const double> z, std::span<const double> theta);

void check_theta(const Model& model, std::span<const double> theta);

// ---- whole-sequence scoring ----

struct TokenScores {
  std::vector<double> log_probs;       // one per target position
  std::vector<TokenId> argmax;         // top-1 prediction per position
  std::vector<Vector> attention;       // alpha per position; empty rows when none
  std::vector<Vector> distributions;   // filled only on request
};

struct ScoreOptions {
  bool attention = false;
  bool distributions = false;
};

TokenScores score_example(const Model& model, const Example& example,
                          const ScoreOptions& options = {});

struct SequenceLikelihood {
  double total = 0.0;
  std::vector<double> per_token;
};

SequenceLikelihood sequence_log_likelihood(const Model& model, const Example& example);

// Teacher-forced seq2seq scoring: per-token log-probs of `target`.
std::vector<double> seq2seq_forward(const Model& model, const std::vector<TokenId>& source,
                                    const std::vector<TokenId>& target);

// Returns -sum log P(target) and accumulates its gradient into `grads`
// (which must have the model's parameter layout).
double loss_and_gradient(const Model& model, const Example& example, ParamSet& grads);

// Stepwise decoding state. Language models consume `context` as the history
// prefix; seq2seq models encode it as the source sentence.
class Decoder {
 public:
  Decoder(const Model& model, std::span<const TokenId> context, Vector theta = {});

  // Distribution over the next token given everything consumed so far.
  const Vector& distribution();
  // Attention weights behind the last distribution() (empty if none).
  const Vector& attention();
  void advance(TokenId token);

  // LM: tokens consumed; seq2seq: decoder steps taken.
  size_t consumed() const { return consumed_; }
  // Length of the attention scope for the next distribution.
  size_t scope() const;

 private:
  void compute();

  const Model* model_;
  Vector theta_;
  Vector h_;
  Vector h_prev_;
  std::vector<double> reps_;   // scope x rep_size
  std::vector<double> ureps_;  // scope x d
  size_t n_reps_ = 0;
  size_t consumed_ = 0;
  bool valid_ = false;
  Vector dist_;
  Vector alpha_;
};

}  // namespace arnn
