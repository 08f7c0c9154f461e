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

#include <span>
#include <vector>

#include "arnn/model.h"

namespace arnn::internal {

// probs = softmax(O^T x); returns log P(target) computed in log space.
double output_layer(const Matrix& o, std::span<const double> x, TokenId target,
                    std::span<double> probs);
// First index of the maximum (lowest token id wins ties).
TokenId argmax(std::span<const double> v);

// Teacher-forced forward pass of the language-model family with every
// intermediate kept for the backward pass.
class LmForward {
 public:
  LmForward(const Model& model, std::span<const TokenId> seq, std::span<const double> theta);

  TokenScores scores(const ScoreOptions& options) const;
  double loss() const { return loss_; }
  // Accumulates d(loss)/d(params) into grads.
  void backward(ParamSet& grads) const;

 private:
  const double* h(size_t t) const { return &h_[t * d_]; }
  const double* emb(size_t t) const { return &emb_[t * de_]; }
  // r_t = [emb_t; h_t]
  void rep(size_t t, std::span<double> out) const;

  const Model& model_;
  std::vector<TokenId> seq_;
  std::vector<double> theta_;
  size_t T_, d_, de_, dr_, V_;
  bool attention_, topics_;

  std::vector<double> h_;      // T x d
  std::vector<double> emb_;    // T x de
  std::vector<double> urep_;   // T x d, U r_t
  std::vector<size_t> att_off_;
  std::vector<double> alpha_;  // sum_t t
  std::vector<double> act_;    // sum_t t x d, tanh(W h_{t-1} + U r_i)
  std::vector<double> z_;      // T x dr
  std::vector<double> x_;      // T x d, input to the output projection
  std::vector<double> probs_;  // T x V
  std::vector<double> logp_;   // T
  double loss_ = 0.0;
};

class Seq2SeqForward {
 public:
  Seq2SeqForward(const Model& model, std::span<const TokenId> source,
                 std::span<const TokenId> target);

  TokenScores scores(const ScoreOptions& options) const;
  double loss() const { return loss_; }
  void backward(ParamSet& grads) const;

 private:
  const Model& model_;
  std::vector<TokenId> src_, tgt_;
  size_t S_, L_, d_, V_;
  bool attention_;

  std::vector<double> enc_;    // S x d
  std::vector<double> dec_;    // L x d
  std::vector<double> urep_;   // S x d
  std::vector<double> alpha_;  // L x S
  std::vector<double> act_;    // L x S x d
  std::vector<double> z_;      // L x d
  std::vector<double> x_;      // L x d
  std::vector<double> probs_;  // L x V
  std::vector<double> logp_;   // L
  double loss_ = 0.0;
};

}  // namespace arnn::internal
