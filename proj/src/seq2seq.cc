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

#include <algorithm>
#include <cmath>

#include "model_internal.h"

namespace arnn::internal {

Seq2SeqForward::Seq2SeqForward(const Model& model, std::span<const TokenId> source,
                               std::span<const TokenId> target)
    : model_(model),
      src_(source.begin(), source.end()),
      tgt_(target.begin(), target.end()),
      S_(source.size()),
      L_(target.size()),
      d_(model.dims().hidden),
      V_(model.dims().vocab),
      attention_(has_attention(model.kind())) {
  if (!is_seq2seq(model.kind())) throw UsageError("Seq2SeqForward needs a seq2seq model");
  if (S_ == 0 || L_ == 0) throw DataError("seq2seq needs non-empty source and target");
  for (TokenId w : src_) {
    if (w >= V_) throw DataError("source token id " + std::to_string(w) + " out of range");
  }
  for (TokenId w : tgt_) {
    if (w >= V_) throw DataError("target token id " + std::to_string(w) + " out of range");
  }
  const size_t de = model.dims().embed;
  std::vector<double> e(de);

  enc_.assign(S_ * d_, 0.0);
  {
    const Matrix& H = model.param(Slot::kEncH);
    const Matrix& P = model.param(Slot::kEncP);
    const Matrix& E = model.param(Slot::kEncE);
    for (size_t m = 0; m < S_; ++m) {
      std::span<double> g(&enc_[m * d_], d_);
      if (m >= 1) matvec(H, {&enc_[(m - 1) * d_], d_}, g);
      column_copy(E, src_[m], e);
      matvec_add(P, e, g);
      for (double& v : g) v = std::tanh(v);
    }
  }

  const Matrix& H = model.param(Slot::kH);
  const Matrix& P = model.param(Slot::kP);
  const Matrix& E = model.param(Slot::kE);
  const Matrix& O = model.param(Slot::kO);
  dec_.assign(L_ * d_, 0.0);
  x_.assign(L_ * d_, 0.0);
  probs_.assign(L_ * V_, 0.0);
  logp_.assign(L_, 0.0);
  if (attention_) {
    urep_.assign(S_ * d_, 0.0);
    for (size_t m = 0; m < S_; ++m) {
      matvec(model.param(Slot::kU), {&enc_[m * d_], d_}, {&urep_[m * d_], d_});
    }
    alpha_.assign(L_ * S_, 0.0);
    act_.assign(L_ * S_ * d_, 0.0);
    z_.assign(L_ * d_, 0.0);
  }

  std::vector<double> q(d_), beta(S_);
  std::copy(enc_.end() - static_cast<std::ptrdiff_t>(d_), enc_.end(), dec_.begin());
  for (size_t l = 0; l < L_; ++l) {
    std::span<double> s(&dec_[l * d_], d_);
    if (l >= 1) {
      matvec(H, {&dec_[(l - 1) * d_], d_}, s);
      column_copy(E, tgt_[l - 1], e);
      matvec_add(P, e, s);
      for (double& v : s) v = std::tanh(v);
    }
    std::span<double> x(&x_[l * d_], d_);
    if (!attention_) {
      std::copy(s.begin(), s.end(), x.begin());
    } else {
      // The query before the first decoder step is the zero state.
      std::fill(q.begin(), q.end(), 0.0);
      if (l >= 1) matvec(model.param(Slot::kW), {&dec_[(l - 1) * d_], d_}, q);
      const Matrix& b = model.param(Slot::kB);
      for (size_t m = 0; m < S_; ++m) {
        double* a = &act_[(l * S_ + m) * d_];
        const double* ur = &urep_[m * d_];
        double sum = 0.0;
        for (size_t k = 0; k < d_; ++k) {
          a[k] = std::tanh(q[k] + ur[k]);
          sum += b(k, 0) * a[k];
        }
        beta[m] = sum;
      }
      std::span<double> alpha(&alpha_[l * S_], S_);
      softmax_into(beta, alpha);
      std::span<double> z(&z_[l * d_], d_);
      for (size_t m = 0; m < S_; ++m) axpy(alpha[m], {&enc_[m * d_], d_}, z);
      matvec(model.param(Slot::kOh), s, x);
      matvec_add(model.param(Slot::kOz), z, x);
    }
    logp_[l] = output_layer(O, x, tgt_[l], {&probs_[l * V_], V_});
    loss_ -= logp_[l];
  }
  if (!std::isfinite(loss_)) throw NumericalError("non-finite sequence loss");
}

TokenScores Seq2SeqForward::scores(const ScoreOptions& options) const {
  TokenScores s;
  s.log_probs = logp_;
  s.argmax.resize(L_);
  for (size_t l = 0; l < L_; ++l) {
    std::span<const double> p(&probs_[l * V_], V_);
    s.argmax[l] = argmax(p);
    if (options.distributions) s.distributions.emplace_back(p.begin(), p.end());
  }
  if (options.attention) {
    s.attention.resize(L_);
    if (attention_) {
      for (size_t l = 0; l < L_; ++l) {
        s.attention[l].assign(alpha_.begin() + static_cast<std::ptrdiff_t>(l * S_),
                              alpha_.begin() + static_cast<std::ptrdiff_t>((l + 1) * S_));
      }
    }
  }
  return s;
}

void Seq2SeqForward::backward(ParamSet& grads) const {
  const size_t de = model_.dims().embed;
  const Matrix& H = model_.param(Slot::kH);
  const Matrix& P = model_.param(Slot::kP);
  const Matrix& E = model_.param(Slot::kE);
  const Matrix& O = model_.param(Slot::kO);
  Matrix& dH = grads[model_.index(Slot::kH)];
  Matrix& dP = grads[model_.index(Slot::kP)];
  Matrix& dE = grads[model_.index(Slot::kE)];
  Matrix& dO = grads[model_.index(Slot::kO)];

  std::vector<double> ds(L_ * d_, 0.0), dg(S_ * d_, 0.0);
  std::vector<double> durep(attention_ ? S_ * d_ : 0, 0.0);
  std::vector<double> dlogits(V_), dx(d_), dz(d_), dq(d_), dpre(d_), e(de), de_buf(de),
      dalpha(S_);

  for (size_t l = L_; l-- > 0;) {
    std::span<double> dsl(&ds[l * d_], d_);
    std::span<const double> x(&x_[l * d_], d_);
    std::copy(probs_.begin() + static_cast<std::ptrdiff_t>(l * V_),
              probs_.begin() + static_cast<std::ptrdiff_t>((l + 1) * V_), dlogits.begin());
    dlogits[tgt_[l]] -= 1.0;
    outer_add(dO, x, dlogits);
    matvec(O, dlogits, dx);

    if (!attention_) {
      axpy(1.0, dx, dsl);
    } else {
      outer_add(grads[model_.index(Slot::kOh)], dx, {&dec_[l * d_], d_});
      matvec_transpose_add(model_.param(Slot::kOh), dx, dsl);
      outer_add(grads[model_.index(Slot::kOz)], dx, {&z_[l * d_], d_});
      std::fill(dz.begin(), dz.end(), 0.0);
      matvec_transpose_add(model_.param(Slot::kOz), dx, dz);

      std::span<const double> alpha(&alpha_[l * S_], S_);
      double weighted = 0.0;
      for (size_t m = 0; m < S_; ++m) {
        dalpha[m] = dot({&enc_[m * d_], d_}, dz);
        weighted += alpha[m] * dalpha[m];
        axpy(alpha[m], dz, {&dg[m * d_], d_});
      }
      const Matrix& b = model_.param(Slot::kB);
      Matrix& db = grads[model_.index(Slot::kB)];
      std::fill(dq.begin(), dq.end(), 0.0);
      for (size_t m = 0; m < S_; ++m) {
        const double dbeta = alpha[m] * (dalpha[m] - weighted);
        if (dbeta == 0.0) continue;
        const double* a = &act_[(l * S_ + m) * d_];
        double* du = &durep[m * d_];
        for (size_t k = 0; k < d_; ++k) {
          db(k, 0) += dbeta * a[k];
          const double g = dbeta * b(k, 0) * (1.0 - a[k] * a[k]);
          dq[k] += g;
          du[k] += g;
        }
      }
      if (l >= 1) {
        outer_add(grads[model_.index(Slot::kW)], dq, {&dec_[(l - 1) * d_], d_});
        matvec_transpose_add(model_.param(Slot::kW), dq, {&ds[(l - 1) * d_], d_});
      }
    }

    if (l >= 1) {
      const double* s = &dec_[l * d_];
      for (size_t k = 0; k < d_; ++k) dpre[k] = dsl[k] * (1.0 - s[k] * s[k]);
      outer_add(dH, dpre, {&dec_[(l - 1) * d_], d_});
      matvec_transpose_add(H, dpre, {&ds[(l - 1) * d_], d_});
      column_copy(E, tgt_[l - 1], e);
      outer_add(dP, dpre, e);
      std::fill(de_buf.begin(), de_buf.end(), 0.0);
      matvec_transpose_add(P, dpre, de_buf);
      column_add(dE, tgt_[l - 1], de_buf);
    }
  }

  // Decoder starts from the final encoder state.
  axpy(1.0, std::span<const double>(&ds[0], d_), {&dg[(S_ - 1) * d_], d_});

  if (attention_) {
    Matrix& dU = grads[model_.index(Slot::kU)];
    for (size_t m = 0; m < S_; ++m) {
      std::span<const double> du(&durep[m * d_], d_);
      outer_add(dU, du, {&enc_[m * d_], d_});
      matvec_transpose_add(model_.param(Slot::kU), du, {&dg[m * d_], d_});
    }
  }

  const Matrix& eH = model_.param(Slot::kEncH);
  const Matrix& eP = model_.param(Slot::kEncP);
  const Matrix& eE = model_.param(Slot::kEncE);
  Matrix& deH = grads[model_.index(Slot::kEncH)];
  Matrix& deP = grads[model_.index(Slot::kEncP)];
  Matrix& deE = grads[model_.index(Slot::kEncE)];
  for (size_t m = S_; m-- > 0;) {
    const double* g = &enc_[m * d_];
    const double* dgm = &dg[m * d_];
    for (size_t k = 0; k < d_; ++k) dpre[k] = dgm[k] * (1.0 - g[k] * g[k]);
    if (m >= 1) {
      outer_add(deH, dpre, {&enc_[(m - 1) * d_], d_});
      matvec_transpose_add(eH, dpre, {&dg[(m - 1) * d_], d_});
    }
    column_copy(eE, src_[m], e);
    outer_add(deP, dpre, e);
    std::fill(de_buf.begin(), de_buf.end(), 0.0);
    matvec_transpose_add(eP, dpre, de_buf);
    column_add(deE, src_[m], de_buf);
  }
}

}  // namespace arnn::internal
