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
#include <filesystem>
#include <map>
#include <numeric>
#include <random>

#include "arnn/io.h"
#include "arnn/metrics.h"
#include "arnn/synthetic.h"
#include "arnn/topics.h"
#include "doctest.h"
#include "test_util.h"

using namespace arnn;

namespace {

const LdaTask& two_topic_task() {
  static const LdaTask task = make_lda_task({});
  return task;
}

const LdaResult& two_topic_model() {
  static const LdaResult r = [] {
    LdaConfig c;
    c.topics = 2;
    c.sweeps = 200;
    c.seed = 1;
    return lda_train(two_topic_task().docs, two_topic_task().vocab_size, c);
  }();
  return r;
}

double sum(const Vector& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("LDA recovers two disjoint topics") {
  const LdaTask& task = two_topic_task();
  const TopicModel& m = two_topic_model().model;
  CHECK(two_topic_model().skipped_documents == 0);
  for (size_t k = 0; k < 2; ++k) {
    double row = 0.0;
    for (double v : m.phi().row(k)) row += v;
    CHECK(std::abs(row - 1.0) < 1e-9);

    std::vector<size_t> ids(m.vocab());
    std::iota(ids.begin(), ids.end(), size_t{0});
    std::partial_sort(ids.begin(), ids.begin() + 10, ids.end(),
                      [&](size_t a, size_t b) { return m.phi()(k, a) > m.phi()(k, b); });
    std::map<size_t, size_t> sources;
    for (size_t i = 0; i < 10; ++i) ++sources[task.topic_of(static_cast<TokenId>(ids[i]))];
    size_t majority = 0;
    for (const auto& [t, n] : sources) majority = std::max(majority, n);
    CHECK(static_cast<double>(majority) / 10.0 >= 0.9);
  }
}

TEST_CASE("LDA likelihood rises and then stays flat") {
  const auto& ll = two_topic_model().log_likelihood;
  REQUIRE(ll.size() == 200);
  std::vector<double> avg;
  for (size_t i = 0; i + 10 <= ll.size(); ++i) {
    avg.push_back(std::accumulate(ll.begin() + i, ll.begin() + i + 10, 0.0) / 10.0);
  }
  // Non-decreasing up to stationary sampling noise.
  double best = avg.front();
  for (double a : avg) {
    CHECK(a >= best - 1e-4 * std::abs(best));
    best = std::max(best, a);
  }
  CHECK(avg.back() > avg.front());
}

TEST_CASE("LDA with one topic is the smoothed unigram distribution") {
  const std::vector<BagOfWords> docs = {{6, 7, 7}, {8, 6}, {}, {7}};
  LdaConfig c;
  c.topics = 1;
  c.sweeps = 5;
  const LdaResult r = lda_train(docs, 10, c);
  CHECK(r.skipped_documents == 1);
  const double counts[10] = {0, 0, 0, 0, 0, 0, 2, 3, 1, 0};
  for (size_t w = 0; w < 10; ++w) {
    CHECK(r.model.phi()(0, w) ==
          doctest::Approx((counts[w] + 0.01) / (6.0 + 10 * 0.01)).epsilon(1e-12));
  }
  CHECK(r.model.xi() == Vector{50.0});
}

TEST_CASE("LDA is deterministic under a seed") {
  const LdaTask task = make_lda_task({.documents = 60, .seed = 4});
  LdaConfig c;
  c.topics = 3;
  c.sweeps = 20;
  c.seed = 8;
  const LdaResult a = lda_train(task.docs, task.vocab_size, c);
  const LdaResult b = lda_train(task.docs, task.vocab_size, c);
  CHECK(a.model == b.model);
  CHECK(a.log_likelihood == b.log_likelihood);
  c.seed = 9;
  CHECK(!(lda_train(task.docs, task.vocab_size, c).model == a.model));
  CHECK_THROWS_AS(lda_train({{}, {}}, 10, c), DataError);
  CHECK_THROWS_AS(lda_train({{99}}, 10, c), DataError);
}

TEST_CASE("theta inference") {
  const LdaTask& task = two_topic_task();
  const TopicModel& m = two_topic_model().model;

  SUBCASE("empty document falls back to the prior mean") {
    const ThetaEstimate e = infer_theta(m, {});
    CHECK(e.prior_fallback);
    CHECK(e.theta == Vector{0.5, 0.5});
    CHECK(infer_theta(m, {kEndOfUtterance, 4000}).prior_fallback);
  }
  SUBCASE("single-topic documents") {
    std::mt19937_64 rng(5);
    // Which learned topic holds true topic 0.
    const size_t k0 = m.phi()(0, kReservedCount) > m.phi()(1, kReservedCount) ? 0 : 1;
    for (size_t truth = 0; truth < 2; ++truth) {
      for (int trial = 0; trial < 5; ++trial) {
        BagOfWords doc;
        std::uniform_int_distribution<size_t> w(0, task.words_per_topic - 1);
        for (int i = 0; i < 150; ++i) {
          doc.push_back(static_cast<TokenId>(kReservedCount + truth * task.words_per_topic +
                                             w(rng)));
        }
        const Vector theta = infer_theta(m, doc).theta;
        CHECK(theta[truth == 0 ? k0 : 1 - k0] >= 0.8);
      }
    }
  }
  SUBCASE("always a probability vector and deterministic per document") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<size_t> len(1, 40);
    for (int i = 0; i < 100; ++i) {
      BagOfWords doc = testing::random_tokens(rng, len(rng), m.vocab());
      const Vector theta = infer_theta(m, doc).theta;
      CHECK(std::abs(sum(theta) - 1.0) < 1e-9);
      for (double t : theta) CHECK(t > 0.0);
      CHECK(infer_theta(m, doc).theta == theta);
    }
  }
}

TEST_CASE("topic similarity") {
  CHECK(topic_similarity({0.2, 0.8}, {0.2, 0.8}) == doctest::Approx(1.0));
  CHECK(topic_similarity({1.0, 0.0}, {0.0, 1.0}) == 0.0);
  CHECK(topic_similarity({0.5, 0.5}, {1.0, 0.0}) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(topic_similarity({0.3, 0.7}, {0.3, 0.7}, Similarity::kNegJensenShannon) == 0.0);
  CHECK(topic_similarity({1.0, 0.0}, {0.0, 1.0}, Similarity::kNegJensenShannon) ==
        doctest::Approx(-std::log(2.0)));
  CHECK_THROWS_AS(topic_similarity({0.0, 0.0}, {1.0, 0.0}), DataError);
  CHECK_THROWS_AS(topic_similarity({1.0}, {1.0, 0.0}), DataError);
  CHECK(parse_similarity("neg-js") == Similarity::kNegJensenShannon);
  CHECK_THROWS_AS(parse_similarity("l2"), UsageError);
}

TEST_CASE("rerank mixing") {
  SUBCASE("hand-computed three-candidate case") {
    // l = (-1, -2, -3): mean -2, population sd sqrt(2/3), z = (1.2247, 0, -1.2247).
    // S = (0.1, 0.9, 0.5), lambda 0.5:
    //   c0 0.05 + 0.61237 = 0.66237, c1 0.45, c2 0.25 - 0.61237 = -0.36237.
    const auto r = rerank_scores({0.1, 0.9, 0.5}, {-1.0, -2.0, -3.0}, 0.5);
    CHECK(r[0].original == 0);
    CHECK(r[1].original == 1);
    CHECK(r[2].original == 2);
    CHECK(r[0].combined == doctest::Approx(0.05 + 0.5 * std::sqrt(1.5)));
    // lambda 0.8: c0 0.08 + 0.24495 = 0.32495, c1 0.72, c2 0.4 - 0.24495 = 0.15505.
    const auto s = rerank_scores({0.1, 0.9, 0.5}, {-1.0, -2.0, -3.0}, 0.8);
    CHECK(s[0].original == 1);
    CHECK(s[1].original == 0);
    CHECK(s[2].original == 2);
  }
  SUBCASE("degenerate mixes") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(-8.0, -1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> sims(10), lls(10);
      for (auto& s : sims) s = u(rng);
      for (auto& x : lls) x = l(rng);
      const size_t by_ll = std::max_element(lls.begin(), lls.end()) - lls.begin();
      const size_t by_sim = std::max_element(sims.begin(), sims.end()) - sims.begin();
      CHECK(rerank_scores(sims, lls, 0.0).front().original == by_ll);
      CHECK(rerank_scores(sims, lls, 1.0).front().original == by_sim);
      // lambda = 0 keeps the whole likelihood order.
      const auto r0 = rerank_scores(sims, lls, 0.0);
      for (size_t i = 1; i < r0.size(); ++i) {
        CHECK(lls[r0[i].original] <= lls[r0[i - 1].original]);
      }
    }
  }
  SUBCASE("ties keep the input order") {
    const auto r = rerank_scores({0.5, 0.5, 0.5}, {-1.0, -1.0, -1.0}, 0.3);
    CHECK(r[0].original == 0);
    CHECK(r[2].original == 2);
    CHECK(r[1].z_likelihood == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(rerank_scores({}, {}, 0.5), DataError);
    CHECK_THROWS_AS(rerank_scores({0.1}, {0.1}, 1.5), UsageError);
  }
}

TEST_CASE("rerank grid tuning") {
  const LdaTask& task = two_topic_task();
  const TopicModel& m2 = two_topic_model().model;
  LdaConfig c;
  c.topics = 10;
  c.sweeps = 30;
  const TopicModel m10 = lda_train(task.docs, task.vocab_size, c).model;

  // Histories from one topic; candidates mix both, generation order random.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<size_t> w(0, task.words_per_topic - 1);
  std::uniform_real_distribution<double> ll(-5.0, -1.0);
  auto word = [&](size_t topic) {
    return static_cast<TokenId>(kReservedCount + topic * task.words_per_topic + w(rng));
  };
  std::vector<RerankItem> items;
  for (int i = 0; i < 30; ++i) {
    RerankItem item;
    const size_t topic = i % 2;
    for (int j = 0; j < 12; ++j) item.history.push_back(word(topic));
    for (int j = 0; j < 4; ++j) item.reference.push_back(word(topic));
    for (int k = 0; k < 5; ++k) {
      std::vector<TokenId> cand;
      for (int j = 0; j < 4; ++j) cand.push_back(word(k % 2 == 0 ? topic : 1 - topic));
      item.candidates.push_back(cand);
      item.likelihoods.push_back(ll(rng));
    }
    std::sort(item.likelihoods.rbegin(), item.likelihoods.rend());
    items.push_back(item);
  }

  SUBCASE("single grid point") {
    const TuneResult r = tune_rerank({m10}, {0.45}, items, Similarity::kCosine,
                                     TuneObjective::kBleu);
    CHECK(r.topics == 10);
    CHECK(r.lambda == 0.45);
    CHECK(r.table.size() == 1);
  }
  SUBCASE("table values match independent re-evaluation") {
    const TuneResult r = tune_rerank({m10, m2}, default_lambda_grid(), items,
                                     Similarity::kCosine, TuneObjective::kBleu);
    REQUIRE(r.table.size() == 42);
    CHECK(r.table.front().topics == 2);  // smaller K first
    for (size_t idx : {3u, 20u, 30u}) {
      const TuneRow& row = r.table[idx];
      const TopicModel& m = row.topics == 2 ? m2 : m10;
      std::vector<std::vector<TokenId>> hyps, refs;
      for (const auto& item : items) {
        std::vector<BagOfWords> cands(item.candidates.begin(), item.candidates.end());
        const auto order = rerank(m, item.history, cands, item.likelihoods,
                                  {row.lambda, Similarity::kCosine, m.topics()});
        hyps.push_back(item.candidates[order.front().original]);
        refs.push_back(item.reference);
      }
      CHECK(row.objective == corpus_bleu(hyps, refs));
    }
    double best = -1.0;
    for (const auto& row : r.table) best = std::max(best, row.objective);
    CHECK(r.objective == best);
    for (const auto& row : r.table) {
      if (row.objective == best) {
        CHECK(row.topics == r.topics);
        CHECK(row.lambda == r.lambda);
        break;
      }
    }
    // Topic-matched candidates sit at even indices; pure topic scoring picks one.
    for (const auto& item : items) {
      std::vector<BagOfWords> cands(item.candidates.begin(), item.candidates.end());
      const auto order = rerank(m2, item.history, cands, item.likelihoods,
                                {1.0, Similarity::kCosine, 2});
      CHECK(order.front().original % 2 == 0);
    }
    CHECK(format_tune_table(r).substr(0, 7) == "2\t0.00\t");
  }
}

TEST_CASE("topic model file round trip") {
  TopicModel m = two_topic_model().model;
  m.set_vocab_hash(0x1234);
  const std::string bytes = serialize_topic_model(m);
  CHECK(bytes.substr(0, 8) == "ARNNLDA1");
  CHECK(parse_topic_model(bytes) == m);
  const auto path = std::filesystem::temp_directory_path() / "arnn_test_topics.bin";
  save_topic_model(m, path);
  CHECK(load_topic_model(path) == m);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_topic_model(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(parse_topic_model("garbage"), DataError);
  CHECK(lda_document(Dialogue{{{Speaker::kA, {kEndOfUtterance, 6, kUnk}}}}) == BagOfWords{6});
}
