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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "arnn/corpus.h"
#include "arnn/numeric.h"

namespace arnn {

// Token occurrences of one document; order is irrelevant to the model.
using BagOfWords = std::vector<TokenId>;

// Dialogue tokens with reserved and speaker tokens removed.
BagOfWords lda_document(const Dialogue& d);
BagOfWords lda_document(const std::vector<TokenId>& tokens);

struct LdaConfig {
  size_t topics = 10;         // K
  double eta = 0.01;          // topic-word prior
  double xi = 0.0;            // document-topic prior per topic; <= 0 means 50 / K
  size_t sweeps = 200;
  size_t infer_sweeps = 50;   // Gibbs sweeps when inferring theta
  uint64_t seed = 1;
};

class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(Matrix phi, double eta, Vector xi, uint64_t seed, size_t sweeps,
             size_t infer_sweeps);

  size_t topics() const { return phi_.rows(); }
  size_t vocab() const { return phi_.cols(); }
  double eta() const { return eta_; }
  const Vector& xi() const { return xi_; }
  uint64_t seed() const { return seed_; }
  size_t sweeps() const { return sweeps_; }
  size_t infer_sweeps() const { return infer_sweeps_; }
  // K x V; every row sums to 1.
  const Matrix& phi() const { return phi_; }
  uint64_t vocab_hash() const { return vocab_hash_; }
  void set_vocab_hash(uint64_t h) { vocab_hash_ = h; }

  friend bool operator==(const TopicModel&, const TopicModel&) = default;

 private:
  Matrix phi_;
  double eta_ = 0.01;
  Vector xi_;
  uint64_t seed_ = 0;
  size_t sweeps_ = 0;
  size_t infer_sweeps_ = 0;
  uint64_t vocab_hash_ = 0;
};

struct LdaResult {
  TopicModel model;
  // Sum over tokens of log sum_k theta_dk phi_kw after every sweep.
  std::vector<double> log_likelihood;
  size_t skipped_documents = 0;  // documents with no tokens
};

// Collapsed Gibbs sampling; phi_kw = (n_kw + eta) / (n_k + V eta).
LdaResult lda_train(const std::vector<BagOfWords>& docs, size_t vocab_size,
                    const LdaConfig& config);

struct ThetaEstimate {
  Vector theta;
  bool prior_fallback = false;  // no in-vocabulary tokens
};

// Gibbs inference with phi frozen. theta = (n_dk + xi_k) / (N + sum xi),
// averaged over the second half of the sweeps. The generator is seeded from
// the model seed and the document content.
ThetaEstimate infer_theta(const TopicModel& model, const BagOfWords& doc);
std::vector<Vector> infer_thetas(const TopicModel& model, const std::vector<BagOfWords>& docs);

enum class Similarity { kCosine, kNegJensenShannon };

std::string_view to_string(Similarity s);
Similarity parse_similarity(std::string_view name);

// Cosine by default. Throws DataError on length mismatch or a zero vector.
double topic_similarity(const Vector& a, const Vector& b,
                        Similarity metric = Similarity::kCosine);

struct RerankConfig {
  double lambda = 0.45;
  Similarity similarity = Similarity::kCosine;
  size_t topics = 10;
};

struct RerankEntry {
  size_t original = 0;       // index in the input order
  double similarity = 0.0;   // S_m
  double z_likelihood = 0.0; // l_m standardized within the set
  double combined = 0.0;     // lambda S_m + (1 - lambda) z_m
};

// Standardizes the likelihoods to zero mean and unit variance (all zero when
// they are constant), mixes, and sorts by the combined score descending with
// ties kept in input order.
std::vector<RerankEntry> rerank_scores(const std::vector<double>& similarities,
                                       const std::vector<double>& likelihoods, double lambda);

// S_m = similarity(theta(history), theta(candidate m)).
std::vector<RerankEntry> rerank(const TopicModel& model, const BagOfWords& history,
                                const std::vector<BagOfWords>& candidates,
                                const std::vector<double>& likelihoods,
                                const RerankConfig& config);

// One reranking instance of a tuning set.
struct RerankItem {
  BagOfWords history;
  std::vector<std::vector<TokenId>> candidates;  // in generation order
  std::vector<double> likelihoods;
  std::vector<TokenId> reference;
};

enum class TuneObjective { kBleu, kRecallAt1 };

struct TuneRow {
  size_t topics = 0;
  double lambda = 0.0;
  double objective = 0.0;
};

struct TuneResult {
  size_t topics = 0;
  double lambda = 0.0;
  double objective = 0.0;
  std::vector<TuneRow> table;  // K-major, lambda ascending
};

// 0.00, 0.05, ..., 1.00
std::vector<double> default_lambda_grid();

// Objective of one (model, lambda) point: corpus BLEU of the reranked top-1
// against the references, or the fraction of items whose reranked top-1
// equals the reference.
double rerank_objective(const TopicModel& model, const std::vector<RerankItem>& items,
                        double lambda, Similarity similarity, TuneObjective objective);

// Exhaustive grid; ties go to the smaller K, then the smaller lambda.
TuneResult tune_rerank(const std::vector<TopicModel>& models, const std::vector<double>& lambdas,
                       const std::vector<RerankItem>& items, Similarity similarity,
                       TuneObjective objective);

// K<TAB>lambda<TAB>objective lines.
std::string format_tune_table(const TuneResult& result);

std::string serialize_topic_model(const TopicModel& model);
TopicModel parse_topic_model(std::string_view bytes);
void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_topic_model(const std::filesystem::path& path);

// The n most probable words of every topic, one topic per line.
std::string top_words(const TopicModel& model, const Vocabulary& vocab, size_t n);

}  // namespace arnn
