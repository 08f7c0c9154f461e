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
#include <random>

#include "arnn/model.h"
#include "doctest.h"
#include "test_util.h"

using namespace arnn;
using arnn::testing::tiny_dims;

namespace {

// Independent step-by-step scorer for the attention language models built only
// from the single-step primitives.
std::vector<double> manual_arnn_scores(const Model& m, const std::vector<TokenId>& seq,
                                       const Vector& theta) {
  const size_t d = m.dims().hidden;
  std::vector<double> out;
  std::vector<Vector> reps;
  Vector h(d, 0.0), h_prev(d, 0.0);
  for (size_t t = 0; t < seq.size(); ++t) {
    Vector dist;
    if (t == 0) {
      Vector x(d, 0.0);
      for (size_t r = 0; r < d; ++r) {
        for (size_t c = 0; c < d; ++c) x[r] += m.param(Slot::kOh)(r, c) * h[c];
        if (uses_topics(m.kind())) {
          for (size_t k = 0; k < theta.size(); ++k) x[r] += m.param(Slot::kOtheta)(r, k) * theta[k];
        }
      }
      dist = lm_next_dist(m, x);
    } else {
      const AttentionResult att = attend(m, h_prev, reps);
      dist = uses_topics(m.kind()) ? tarnn_next_dist(m, h, att.z, theta)
                                   : arnn_next_dist(m, h, att.z);
    }
    out.push_back(std::log(dist[seq[t]]));
    Vector r = m.param(Slot::kE).column(seq[t]);
    r.insert(r.end(), h.begin(), h.end());
    reps.push_back(r);
    h_prev = h;
    h = rnn_step(m, h, seq[t]);
  }
  return out;
}

double loss_for(const Model& base, const Example& ex, const ParamSet& params, ParamSet* g) {
  Model m = base;
  m.params() = params;
  if (g) return loss_and_gradient(m, ex, *g);
  return -sequence_log_likelihood(m, ex).total;
}

}  // namespace

TEST_CASE("rnn_step") {
  Model zero(ModelKind::kRnnLm, {3, 2, 5, 0});
  CHECK(rnn_step(zero, Vector{0.3, -0.2, 0.9}, 4) == Vector(3, 0.0));

  // d=2, d_e=1, V=2, hand-set weights.
  Model m(ModelKind::kRnnLm, {2, 1, 2, 0});
  m.param(Slot::kH)(0, 0) = 0.5;
  m.param(Slot::kH)(0, 1) = -1.0;
  m.param(Slot::kH)(1, 0) = 2.0;
  m.param(Slot::kH)(1, 1) = 0.25;
  m.param(Slot::kP)(0, 0) = 1.0;
  m.param(Slot::kP)(1, 0) = -3.0;
  m.param(Slot::kE)(0, 1) = 0.4;
  const Vector h = rnn_step(m, Vector{0.2, 0.6}, 1);
  CHECK(h[0] == doctest::Approx(std::tanh(0.5 * 0.2 - 0.6 + 0.4)).epsilon(1e-15));
  CHECK(h[1] == doctest::Approx(std::tanh(2.0 * 0.2 + 0.25 * 0.6 - 1.2)).epsilon(1e-15));

  CHECK_THROWS_AS(rnn_step(m, Vector{0, 0}, 2), DataError);

  const Model big = Model::random(ModelKind::kRnnLm, {6, 4, 9, 0}, 1, 5.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    for (double v : rnn_step(big, testing::random_vector(rng, 6, 3.0), i % 9)) {
      CHECK(std::abs(v) <= 1.0);
    }
  }
}

TEST_CASE("lm_next_dist") {
  Model zero(ModelKind::kRnnLm, {4, 3, 7, 0});
  for (double p : lm_next_dist(zero, Vector{1, 2, 3, 4})) CHECK(p == doctest::Approx(1.0 / 7));

  Model m(ModelKind::kRnnLm, {2, 1, 3, 0});
  const double o[2][3] = {{1.0, -0.5, 0.0}, {0.25, 2.0, -1.0}};
  for (size_t r = 0; r < 2; ++r) {
    for (size_t c = 0; c < 3; ++c) m.param(Slot::kO)(r, c) = o[r][c];
  }
  const Vector h{0.3, -0.7};
  Vector logits(3);
  for (size_t j = 0; j < 3; ++j) logits[j] = o[0][j] * h[0] + o[1][j] * h[1];
  const Vector expect = testing::naive_softmax(logits);
  const Vector got = lm_next_dist(m, h);
  for (size_t j = 0; j < 3; ++j) CHECK(got[j] == doctest::Approx(expect[j]).epsilon(1e-14));

  const Model r = Model::random(ModelKind::kRnnLm, tiny_dims(), 4, 1.0);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vector p = lm_next_dist(r, testing::random_vector(rng, 8));
    double s = 0.0;
    for (double v : p) s += v;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("attend") {
  const Model m = Model::random(ModelKind::kAttnRnnLm, tiny_dims(), 9, 1.0);
  std::mt19937_64 rng(9);
  const size_t dr = m.rep_size();
  CHECK(dr == 14);

  const Vector r0 = testing::random_vector(rng, dr);
  const AttentionResult one = attend(m, testing::random_vector(rng, 8), {r0});
  CHECK(one.alpha == Vector{1.0});
  CHECK(one.z == r0);

  const AttentionResult same = attend(m, testing::random_vector(rng, 8), {r0, r0, r0, r0});
  for (double a : same.alpha) CHECK(a == doctest::Approx(0.25).epsilon(1e-15));
  for (size_t k = 0; k < dr; ++k) CHECK(same.z[k] == doctest::Approx(r0[k]).epsilon(1e-14));

  const Vector h = testing::random_vector(rng, 8);
  const std::vector<Vector> reps{testing::random_vector(rng, dr), testing::random_vector(rng, dr),
                                 testing::random_vector(rng, dr)};
  Vector beta(3, 0.0);
  for (size_t i = 0; i < 3; ++i) {
    for (size_t k = 0; k < 8; ++k) {
      double pre = 0.0;
      for (size_t c = 0; c < 8; ++c) pre += m.param(Slot::kW)(k, c) * h[c];
      for (size_t c = 0; c < dr; ++c) pre += m.param(Slot::kU)(k, c) * reps[i][c];
      beta[i] += m.param(Slot::kB)(k, 0) * std::tanh(pre);
    }
  }
  const Vector alpha = testing::naive_softmax(beta);
  const AttentionResult got = attend(m, h, reps);
  for (size_t i = 0; i < 3; ++i) CHECK(std::abs(got.alpha[i] - alpha[i]) < 1e-12);
  for (size_t k = 0; k < dr; ++k) {
    const double z = alpha[0] * reps[0][k] + alpha[1] * reps[1][k] + alpha[2] * reps[2][k];
    CHECK(std::abs(got.z[k] - z) < 1e-12);
  }

  CHECK_THROWS_AS(attend(m, h, {}), DataError);
}

TEST_CASE("arnn_next_dist") {
  std::mt19937_64 rng(21);
  Model m = Model::random(ModelKind::kAttnRnnLm, tiny_dims(), 21, 1.0);
  const Vector h = testing::random_vector(rng, 8);
  const Vector z = testing::random_vector(rng, 14);

  // Brute force: g_j = O_j . (O_h h + O_z z)
  Vector logits(20, 0.0);
  for (size_t j = 0; j < 20; ++j) {
    for (size_t k = 0; k < 8; ++k) {
      double x = 0.0;
      for (size_t c = 0; c < 8; ++c) x += m.param(Slot::kOh)(k, c) * h[c];
      for (size_t c = 0; c < 14; ++c) x += m.param(Slot::kOz)(k, c) * z[c];
      logits[j] += m.param(Slot::kO)(k, j) * x;
    }
  }
  const Vector expect = testing::naive_softmax(logits);
  const Vector got = arnn_next_dist(m, h, z);
  double sum = 0.0;
  for (size_t j = 0; j < 20; ++j) {
    CHECK(std::abs(got[j] - expect[j]) < 1e-12);
    sum += got[j];
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);

  // With O_z = 0 the output is an RNN-LM with effective output matrix O_h^T O.
  m.param(Slot::kOz).fill(0.0);
  Model rnn(ModelKind::kRnnLm, tiny_dims());
  Matrix& o_eff = rnn.param(Slot::kO);
  for (size_t c = 0; c < 8; ++c) {
    for (size_t j = 0; j < 20; ++j) {
      for (size_t k = 0; k < 8; ++k) o_eff(c, j) += m.param(Slot::kOh)(k, c) * m.param(Slot::kO)(k, j);
    }
  }
  const Vector a = arnn_next_dist(m, h, z);
  const Vector b = lm_next_dist(rnn, h);
  for (size_t j = 0; j < 20; ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
}

TEST_CASE("tarnn_next_dist") {
  std::mt19937_64 rng(33);
  const ModelDims dims = tiny_dims(4);
  Model t = Model::random(ModelKind::kTopicAttnRnnLm, dims, 33, 1.0);
  const Vector h = testing::random_vector(rng, 8);
  const Vector z = testing::random_vector(rng, 14);
  const Vector uniform(4, 0.25);
  const Vector one_hot{0, 0, 1, 0};

  CHECK(tarnn_next_dist(t, h, z, uniform) != tarnn_next_dist(t, h, z, one_hot));

  const Vector theta = testing::random_simplex(rng, 4);
  Vector logits(20, 0.0);
  for (size_t j = 0; j < 20; ++j) {
    for (size_t k = 0; k < 8; ++k) {
      double x = 0.0;
      for (size_t c = 0; c < 8; ++c) x += t.param(Slot::kOh)(k, c) * h[c];
      for (size_t c = 0; c < 14; ++c) x += t.param(Slot::kOz)(k, c) * z[c];
      for (size_t c = 0; c < 4; ++c) x += t.param(Slot::kOtheta)(k, c) * theta[c];
      logits[j] += t.param(Slot::kO)(k, j) * x;
    }
  }
  const Vector expect = testing::naive_softmax(logits);
  const Vector got = tarnn_next_dist(t, h, z, theta);
  for (size_t j = 0; j < 20; ++j) CHECK(std::abs(got[j] - expect[j]) < 1e-12);

  t.param(Slot::kOtheta).fill(0.0);
  CHECK(tarnn_next_dist(t, h, z, theta) == arnn_next_dist(t, h, z));

  CHECK_THROWS_AS(tarnn_next_dist(t, h, z, Vector{0.5, 0.5, 0.5, 0.0}), DataError);
  CHECK_THROWS_AS(tarnn_next_dist(t, h, z, Vector{0.5, 0.5}), ShapeError);
}

TEST_CASE("seq2seq_forward") {
  std::mt19937_64 rng(41);
  const ModelDims dims = tiny_dims();
  const Model att = Model::random(ModelKind::kAttnSeq2Seq, dims, 41, 1.0);
  Example ex;
  ex.source = {7};
  ex.target = {1, 2, 3, 4};
  const TokenScores s = score_example(att, ex, {.attention = true});
  for (const auto& row : s.attention) CHECK(row == Vector{1.0});

  Model zero(ModelKind::kSeq2Seq, dims);
  for (double lp : seq2seq_forward(zero, {3, 4, 5}, {6, 7})) {
    CHECK(lp == doctest::Approx(-std::log(20.0)).epsilon(1e-14));
  }

  // Brute-force recomputation of a plain seq2seq model.
  const Model plain = Model::random(ModelKind::kSeq2Seq, dims, 42, 1.0);
  const std::vector<TokenId> src{3, 9, 1}, tgt{4, 4, 2};
  Vector g(8, 0.0);
  for (TokenId w : src) {
    Vector next(8);
    for (size_t k = 0; k < 8; ++k) {
      double pre = 0.0;
      for (size_t c = 0; c < 8; ++c) pre += plain.param(Slot::kEncH)(k, c) * g[c];
      for (size_t c = 0; c < 6; ++c) pre += plain.param(Slot::kEncP)(k, c) * plain.param(Slot::kEncE)(c, w);
      next[k] = std::tanh(pre);
    }
    g = next;
  }
  Vector s_state = g;
  const std::vector<double> got = seq2seq_forward(plain, src, tgt);
  for (size_t l = 0; l < tgt.size(); ++l) {
    if (l > 0) s_state = rnn_step(plain, s_state, tgt[l - 1]);
    const Vector p = lm_next_dist(plain, s_state);
    CHECK(std::abs(got[l] - std::log(p[tgt[l]])) < 1e-12);
  }

  CHECK_THROWS_AS(seq2seq_forward(plain, {}, tgt), DataError);
  CHECK_THROWS_AS(seq2seq_forward(plain, src, {}), DataError);
}

TEST_CASE("sequence_log_likelihood") {
  const ModelDims dims = tiny_dims();
  Model zero(ModelKind::kAttnRnnLm, dims);
  Example ex;
  ex.target = {4, 8, 9, 2, 5, 11, 2, 3};
  const SequenceLikelihood u = sequence_log_likelihood(zero, ex);
  CHECK(u.total == doctest::Approx(8 * std::log(1.0 / 20)).epsilon(1e-14));

  std::mt19937_64 rng(51);
  for (ModelKind kind : {ModelKind::kAttnRnnLm, ModelKind::kTopicAttnRnnLm}) {
    const Model m = Model::random(kind, dims, 51, 1.0);
    Example e = testing::random_example(kind, rng, dims, 9);
    const SequenceLikelihood ll = sequence_log_likelihood(m, e);
    double sum = 0.0;
    for (double v : ll.per_token) sum += v;
    CHECK(std::abs(sum - ll.total) < 1e-10);
    const std::vector<double> manual = manual_arnn_scores(m, e.target, e.theta);
    for (size_t t = 0; t < manual.size(); ++t) CHECK(std::abs(manual[t] - ll.per_token[t]) < 1e-12);
  }
}

TEST_CASE("dynamic attention scope grows by one per token; seq2seq scope is fixed") {
  std::mt19937_64 rng(61);
  const ModelDims dims = tiny_dims();
  const Model lm = Model::random(ModelKind::kAttnRnnLm, dims, 61, 0.5);
  const Example e = testing::random_example(ModelKind::kAttnRnnLm, rng, dims, 12);
  const TokenScores s = score_example(lm, e, {.attention = true});
  CHECK(s.attention[0].empty());
  for (size_t t = 1; t < s.attention.size(); ++t) {
    CHECK(s.attention[t].size() == t);
    double sum = 0.0;
    for (double a : s.attention[t]) sum += a;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  const Model s2s = Model::random(ModelKind::kAttnSeq2Seq, dims, 62, 0.5);
  Example x;
  x.source = testing::random_tokens(rng, 7, 20);
  x.target = testing::random_tokens(rng, 5, 20);
  for (const auto& row : score_example(s2s, x, {.attention = true}).attention) {
    CHECK(row.size() == 7);
  }
}

TEST_CASE("attention ablation reproduces the RNN-LM") {
  std::mt19937_64 rng(71);
  const ModelDims dims = tiny_dims();
  for (int trial = 0; trial < 20; ++trial) {
    const Model rnn = Model::random(ModelKind::kRnnLm, dims, 100 + trial, 0.5);
    Model arnn = Model::random(ModelKind::kAttnRnnLm, dims, 200 + trial, 0.5);
    for (Slot s : {Slot::kH, Slot::kP, Slot::kE, Slot::kO}) arnn.param(s) = rnn.param(s);
    arnn.param(Slot::kOz).fill(0.0);
    arnn.param(Slot::kOh) = Matrix::identity(8);
    const Example e = testing::random_example(ModelKind::kRnnLm, rng, dims, 10);
    const TokenScores a = score_example(rnn, e, {.distributions = true});
    const TokenScores b = score_example(arnn, e, {.distributions = true});
    for (size_t t = 0; t < e.target.size(); ++t) {
      for (size_t j = 0; j < 20; ++j) {
        CHECK(std::abs(a.distributions[t][j] - b.distributions[t][j]) < 1e-12);
      }
    }
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const ModelDims dims = tiny_dims();
  for (ModelKind kind : testing::kAllKinds) {
    CAPTURE(to_string(kind));
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      const Model m = Model::random(kind, dims, 1000 + seed, 1.0);
      const Example ex = testing::random_example(kind, rng, dims, 5);
      LossFn f = [&](const ParamSet& p, ParamSet* g) { return loss_for(m, ex, p, g); };
      worst = std::max(worst, grad_check(f, m.params()).max_rel_error);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("teacher-forced scoring matches stepwise decoding") {
  const ModelDims dims = tiny_dims();
  for (ModelKind kind : testing::kAllKinds) {
    CAPTURE(to_string(kind));
    std::mt19937_64 rng(81);
    const Model m = Model::random(kind, dims, 81, 0.5);
    const Example ex = testing::random_example(kind, rng, dims, 9);
    const TokenScores s = score_example(m, ex, {.attention = true, .distributions = true});
    Decoder dec(m, is_seq2seq(kind) ? std::span<const TokenId>(ex.source)
                                    : std::span<const TokenId>(),
                ex.theta);
    for (size_t t = 0; t < ex.target.size(); ++t) {
      const Vector& p = dec.distribution();
      for (size_t j = 0; j < dims.vocab; ++j) CHECK(std::abs(p[j] - s.distributions[t][j]) < 1e-12);
      const Vector& a = dec.attention();
      REQUIRE(a.size() == s.attention[t].size());
      for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - s.attention[t][i]) < 1e-12);
      dec.advance(ex.target[t]);
    }
  }
}

TEST_CASE("checkpoint round trip") {
  for (ModelKind kind : testing::kAllKinds) {
    Model m = Model::random(kind, tiny_dims(), 5);
    m.set_vocab_hash(0x1234abcd5678ef90ULL);
    const Model back = parse_checkpoint(serialize_checkpoint(m));
    CHECK(back.kind() == kind);
    CHECK(back.vocab_hash() == m.vocab_hash());
    CHECK(back.params() == m.params());
  }
  std::string bytes = serialize_checkpoint(Model(ModelKind::kRnnLm, tiny_dims()));
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bytes), DataError);
}

TEST_CASE("examples mark the final utterance") {
  Dialogue d;
  d.utterances = {{Speaker::kA, {6, 7, 8}}, {Speaker::kB, {9, 10}}};
  const Example lm = make_example(ModelKind::kRnnLm, d);
  CHECK(lm.target == std::vector<TokenId>{4, 6, 7, 8, 2, 5, 9, 10, 2, 3});
  CHECK(lm.last_begin == 6);
  CHECK(lm.last_end == 9);
  const Example s2s = make_example(ModelKind::kSeq2Seq, d);
  CHECK(s2s.source == std::vector<TokenId>{4, 6, 7, 8, 2, 5});
  CHECK(s2s.target == std::vector<TokenId>{9, 10, 2});
  const Example cont = make_continuation_example(ModelKind::kAttnRnnLm, history_of(d), {9, 10, 2});
  CHECK(cont.target == std::vector<TokenId>{4, 6, 7, 8, 2, 5, 9, 10, 2});
  CHECK(cont.last_begin == 6);
  CHECK(cont.last_end == 9);
}
