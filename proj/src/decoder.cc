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

#include <cmath>

#include "arnn/model.h"
#include "model_internal.h"

namespace arnn {

Decoder::Decoder(const Model& model, std::span<const TokenId> context, Vector theta)
    : model_(&model), theta_(std::move(theta)) {
  const size_t d = model.dims().hidden;
  if (uses_topics(model.kind())) check_theta(model, theta_);
  h_.assign(d, 0.0);
  h_prev_.assign(d, 0.0);
  if (!is_seq2seq(model.kind())) {
    for (TokenId w : context) advance(w);
    return;
  }
  if (context.empty()) throw DataError("seq2seq decoding needs a non-empty source");
  const size_t de = model.dims().embed;
  const Matrix& H = model.param(Slot::kEncH);
  const Matrix& P = model.param(Slot::kEncP);
  const Matrix& E = model.param(Slot::kEncE);
  Vector e(de), g(d, 0.0), next(d);
  for (TokenId w : context) {
    if (w >= model.dims().vocab) throw DataError("source token id out of range");
    matvec(H, g, next);
    column_copy(E, w, e);
    matvec_add(P, e, next);
    for (double& v : next) v = std::tanh(v);
    g = next;
    reps_.insert(reps_.end(), g.begin(), g.end());
    if (has_attention(model.kind())) {
      ureps_.resize(ureps_.size() + d);
      matvec(model.param(Slot::kU), g, {ureps_.data() + ureps_.size() - d, d});
    }
    ++n_reps_;
  }
  h_ = g;
}

size_t Decoder::scope() const { return has_attention(model_->kind()) ? n_reps_ : 0; }

void Decoder::advance(TokenId token) {
  const Model& m = *model_;
  if (token >= m.dims().vocab) {
    throw DataError("token id " + std::to_string(token) + " out of range");
  }
  const size_t d = m.dims().hidden;
  if (!is_seq2seq(m.kind()) && has_attention(m.kind())) {
    // r_n = [E w_n; h_n] joins the attention pool.
    const size_t de = m.dims().embed;
    const size_t dr = m.rep_size();
    reps_.resize(reps_.size() + dr);
    std::span<double> r(reps_.data() + reps_.size() - dr, dr);
    column_copy(m.param(Slot::kE), token, r.subspan(0, de));
    std::copy(h_.begin(), h_.end(), r.begin() + static_cast<std::ptrdiff_t>(de));
    ureps_.resize(ureps_.size() + d);
    matvec(m.param(Slot::kU), r, {ureps_.data() + ureps_.size() - d, d});
    ++n_reps_;
  }
  h_prev_ = h_;
  h_ = rnn_step(m, h_prev_, token);
  ++consumed_;
  valid_ = false;
}

void Decoder::compute() {
  const Model& m = *model_;
  const size_t d = m.dims().hidden;
  alpha_.clear();
  if (!has_attention(m.kind())) {
    dist_ = lm_next_dist(m, h_);
    valid_ = true;
    return;
  }
  Vector x(d);
  matvec(m.param(Slot::kOh), h_, x);
  if (uses_topics(m.kind())) matvec_add(m.param(Slot::kOtheta), theta_, x);
  if (n_reps_ > 0) {
    const size_t dr = m.rep_size();
    Vector q(d, 0.0);
    if (!is_seq2seq(m.kind()) || consumed_ > 0) matvec(m.param(Slot::kW), h_prev_, q);
    const Matrix& b = m.param(Slot::kB);
    Vector beta(n_reps_);
    for (size_t i = 0; i < n_reps_; ++i) {
      const double* ur = &ureps_[i * d];
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) s += b(k, 0) * std::tanh(q[k] + ur[k]);
      beta[i] = s;
    }
    alpha_ = softmax(beta);
    Vector z(dr, 0.0);
    for (size_t i = 0; i < n_reps_; ++i) axpy(alpha_[i], {&reps_[i * dr], dr}, z);
    matvec_add(m.param(Slot::kOz), z, x);
  }
  dist_ = lm_next_dist(m, x);
  valid_ = true;
}

const Vector& Decoder::distribution() {
  if (!valid_) compute();
  return dist_;
}

const Vector& Decoder::attention() {
  if (!valid_) compute();
  return alpha_;
}

}  // namespace arnn
