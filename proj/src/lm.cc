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

// Fills probs with softmax(O^T x) and returns log P(target).
double output_layer(const Matrix& o, std::span<const double> x, TokenId target,
                    std::span<double> probs) {
  std::fill(probs.begin(), probs.end(), 0.0);
  matvec_transpose_add(o, x, probs);
  const double max = *std::max_element(probs.begin(), probs.end());
  const double logit = probs[target];
  double sum = 0.0;
  for (double& p : probs) {
    p = std::exp(p - max);
    sum += p;
  }
  for (double& p : probs) p /= sum;
  return logit - max - std::log(sum);
}

TokenId argmax(std::span<const double> v) {
  return static_cast<TokenId>(std::max_element(v.begin(), v.end()) - v.begin());
}

LmForward::LmForward(const Model& model, std::span<const TokenId> seq,
                     std::span<const double> theta)
    : model_(model),
      seq_(seq.begin(), seq.end()),
      theta_(theta.begin(), theta.end()),
      T_(seq.size()),
      d_(model.dims().hidden),
      de_(model.dims().embed),
      dr_(model.rep_size()),
      V_(model.dims().vocab),
      attention_(has_attention(model.kind())),
      topics_(uses_topics(model.kind())) {
  if (is_seq2seq(model.kind())) throw UsageError("LmForward needs a language model");
  if (T_ == 0) throw DataError("cannot score an empty sequence");
  for (TokenId w : seq_) {
    if (w >= V_) throw DataError("token id " + std::to_string(w) + " out of range");
  }
  if (topics_) check_theta(model, theta_);

  const Matrix& H = model.param(Slot::kH);
  const Matrix& P = model.param(Slot::kP);
  const Matrix& E = model.param(Slot::kE);
  const Matrix& O = model.param(Slot::kO);

  h_.assign(T_ * d_, 0.0);
  emb_.assign(T_ * de_, 0.0);
  x_.assign(T_ * d_, 0.0);
  probs_.assign(T_ * V_, 0.0);
  logp_.assign(T_, 0.0);
  if (attention_) {
    urep_.assign(T_ * d_, 0.0);
    z_.assign(T_ * dr_, 0.0);
    att_off_.assign(T_ + 1, 0);
    for (size_t t = 0; t < T_; ++t) att_off_[t + 1] = att_off_[t] + t;
    alpha_.assign(att_off_[T_], 0.0);
    act_.assign(att_off_[T_] * d_, 0.0);
  }

  std::vector<double> r(dr_), q(d_), beta;
  std::vector<double> topic_term;
  if (topics_) {
    topic_term.assign(d_, 0.0);
    matvec(model.param(Slot::kOtheta), theta_, topic_term);
  }

  for (size_t t = 0; t < T_; ++t) {
    std::span<double> ht(&h_[t * d_], d_);
    if (t >= 1) {
      matvec(H, {h(t - 1), d_}, ht);
      matvec_add(P, {emb(t - 1), de_}, ht);
      for (double& v : ht) v = std::tanh(v);
    }
    column_copy(E, seq_[t], {&emb_[t * de_], de_});

    std::span<double> xt(&x_[t * d_], d_);
    if (!attention_) {
      std::copy(ht.begin(), ht.end(), xt.begin());
    } else {
      matvec(model.param(Slot::kOh), ht, xt);
      if (topics_) axpy(1.0, topic_term, xt);
      if (t >= 1) {
        rep(t - 1, r);
        matvec(model.param(Slot::kU), r, {&urep_[(t - 1) * d_], d_});
        matvec(model.param(Slot::kW), {h(t - 1), d_}, q);
        const Matrix& b = model.param(Slot::kB);
        beta.assign(t, 0.0);
        for (size_t i = 0; i < t; ++i) {
          double* a = &act_[(att_off_[t] + i) * d_];
          const double* ur = &urep_[i * d_];
          double s = 0.0;
          for (size_t k = 0; k < d_; ++k) {
            a[k] = std::tanh(q[k] + ur[k]);
            s += b(k, 0) * a[k];
          }
          beta[i] = s;
        }
        std::span<double> alpha(&alpha_[att_off_[t]], t);
        softmax_into(beta, alpha);
        std::span<double> zt(&z_[t * dr_], dr_);
        for (size_t i = 0; i < t; ++i) {
          axpy(alpha[i], {emb(i), de_}, zt.subspan(0, de_));
          axpy(alpha[i], {h(i), d_}, zt.subspan(de_, d_));
        }
        matvec_add(model.param(Slot::kOz), zt, xt);
      }
    }
    logp_[t] = output_layer(O, xt, seq_[t], {&probs_[t * V_], V_});
    loss_ -= logp_[t];
  }
  if (!std::isfinite(loss_)) throw NumericalError("non-finite sequence loss");
}

void LmForward::rep(size_t t, std::span<double> out) const {
  std::copy(emb(t), emb(t) + de_, out.begin());
  std::copy(h(t), h(t) + d_, out.begin() + static_cast<std::ptrdiff_t>(de_));
}

TokenScores LmForward::scores(const ScoreOptions& options) const {
  TokenScores s;
  s.log_probs = logp_;
  s.argmax.resize(T_);
  for (size_t t = 0; t < T_; ++t) {
    std::span<const double> p(&probs_[t * V_], V_);
    s.argmax[t] = argmax(p);
    if (options.distributions) s.distributions.emplace_back(p.begin(), p.end());
  }
  if (options.attention) {
    s.attention.resize(T_);
    if (attention_) {
      for (size_t t = 1; t < T_; ++t) {
        s.attention[t].assign(alpha_.begin() + static_cast<std::ptrdiff_t>(att_off_[t]),
                              alpha_.begin() + static_cast<std::ptrdiff_t>(att_off_[t] + t));
      }
    }
  }
  return s;
}

void LmForward::backward(ParamSet& grads) const {
  const Matrix& H = model_.param(Slot::kH);
  const Matrix& P = model_.param(Slot::kP);
  const Matrix& O = model_.param(Slot::kO);
  Matrix& dH = grads[model_.index(Slot::kH)];
  Matrix& dP = grads[model_.index(Slot::kP)];
  Matrix& dE = grads[model_.index(Slot::kE)];
  Matrix& dO = grads[model_.index(Slot::kO)];

  std::vector<double> dh(T_ * d_, 0.0), demb(T_ * de_, 0.0);
  std::vector<double> durep(attention_ ? T_ * d_ : 0, 0.0);
  std::vector<double> dlogits(V_), dx(d_), dz(dr_), dq(d_), dpre(d_), r(dr_), dr(dr_),
      dalpha;

  for (size_t t = T_; t-- > 0;) {
    std::span<double> dht(&dh[t * d_], d_);
    std::span<const double> xt(&x_[t * d_], d_);
    std::copy(probs_.begin() + static_cast<std::ptrdiff_t>(t * V_),
              probs_.begin() + static_cast<std::ptrdiff_t>((t + 1) * V_), dlogits.begin());
    dlogits[seq_[t]] -= 1.0;
    outer_add(dO, xt, dlogits);
    matvec(O, dlogits, dx);

    if (!attention_) {
      axpy(1.0, dx, dht);
    } else {
      outer_add(grads[model_.index(Slot::kOh)], dx, {h(t), d_});
      matvec_transpose_add(model_.param(Slot::kOh), dx, dht);
      if (topics_) outer_add(grads[model_.index(Slot::kOtheta)], dx, theta_);
      if (t >= 1) {
        std::span<const double> zt(&z_[t * dr_], dr_);
        outer_add(grads[model_.index(Slot::kOz)], dx, zt);
        std::fill(dz.begin(), dz.end(), 0.0);
        matvec_transpose_add(model_.param(Slot::kOz), dx, dz);

        std::span<const double> alpha(&alpha_[att_off_[t]], t);
        dalpha.assign(t, 0.0);
        double weighted = 0.0;
        for (size_t i = 0; i < t; ++i) {
          dalpha[i] = dot({emb(i), de_}, std::span<const double>(dz).subspan(0, de_)) +
                      dot({h(i), d_}, std::span<const double>(dz).subspan(de_, d_));
          weighted += alpha[i] * dalpha[i];
          axpy(alpha[i], std::span<const double>(dz).subspan(0, de_), {&demb[i * de_], de_});
          axpy(alpha[i], std::span<const double>(dz).subspan(de_, d_), {&dh[i * d_], d_});
        }
        const Matrix& b = model_.param(Slot::kB);
        Matrix& db = grads[model_.index(Slot::kB)];
        std::fill(dq.begin(), dq.end(), 0.0);
        for (size_t i = 0; i < t; ++i) {
          const double dbeta = alpha[i] * (dalpha[i] - weighted);
          if (dbeta == 0.0) continue;
          const double* a = &act_[(att_off_[t] + i) * d_];
          double* du = &durep[i * d_];
          for (size_t k = 0; k < d_; ++k) {
            db(k, 0) += dbeta * a[k];
            const double g = dbeta * b(k, 0) * (1.0 - a[k] * a[k]);
            dq[k] += g;
            du[k] += g;
          }
        }
        outer_add(grads[model_.index(Slot::kW)], dq, {h(t - 1), d_});
        matvec_transpose_add(model_.param(Slot::kW), dq, {&dh[(t - 1) * d_], d_});
      }
      // r_t enters the attention pool of every later step.
      if (t + 1 < T_) {
        std::span<const double> du(&durep[t * d_], d_);
        rep(t, r);
        outer_add(grads[model_.index(Slot::kU)], du, r);
        std::fill(dr.begin(), dr.end(), 0.0);
        matvec_transpose_add(model_.param(Slot::kU), du, dr);
        axpy(1.0, std::span<const double>(dr).subspan(0, de_), {&demb[t * de_], de_});
        axpy(1.0, std::span<const double>(dr).subspan(de_, d_), dht);
      }
    }

    column_add(dE, seq_[t], {&demb[t * de_], de_});

    if (t >= 1) {
      const double* ht = h(t);
      for (size_t k = 0; k < d_; ++k) dpre[k] = dht[k] * (1.0 - ht[k] * ht[k]);
      outer_add(dH, dpre, {h(t - 1), d_});
      matvec_transpose_add(H, dpre, {&dh[(t - 1) * d_], d_});
      outer_add(dP, dpre, {emb(t - 1), de_});
      matvec_transpose_add(P, dpre, {&demb[(t - 1) * de_], de_});
    }
  }
}

}  // namespace arnn::internal
