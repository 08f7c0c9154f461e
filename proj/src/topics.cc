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

#include "arnn/topics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "arnn/io.h"
#include "arnn/metrics.h"
#include "arnn/parallel.h"

namespace arnn {

BagOfWords lda_document(const std::vector<TokenId>& tokens) {
  BagOfWords out;
  for (TokenId t : tokens) {
    if (t >= kReservedCount) out.push_back(t);
  }
  return out;
}

BagOfWords lda_document(const Dialogue& d) {
  BagOfWords out;
  for (const auto& u : d.utterances) {
    for (TokenId t : u.tokens) {
      if (t >= kReservedCount) out.push_back(t);
    }
  }
  return out;
}

TopicModel::TopicModel(Matrix phi, double eta, Vector xi, uint64_t seed, size_t sweeps,
                       size_t infer_sweeps)
    : phi_(std::move(phi)),
      eta_(eta),
      xi_(std::move(xi)),
      seed_(seed),
      sweeps_(sweeps),
      infer_sweeps_(infer_sweeps) {
  if (xi_.size() != phi_.rows()) throw ShapeError("xi length must equal K");
  if (!(eta_ > 0.0)) throw DataError("eta must be positive");
  for (double x : xi_) {
    if (!(x > 0.0)) throw DataError("xi entries must be positive");
  }
}

namespace {

Vector resolve_xi(const LdaConfig& c) {
  const double x = c.xi > 0.0 ? c.xi : 50.0 / static_cast<double>(c.topics);
  return Vector(c.topics, x);
}

size_t draw(std::mt19937_64& rng, const Vector& cumulative) {
  std::uniform_real_distribution<double> u(0.0, cumulative.back());
  const double x = u(rng);
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return std::min(static_cast<size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

LdaResult lda_train(const std::vector<BagOfWords>& docs, size_t vocab_size,
                    const LdaConfig& config) {
  const size_t K = config.topics;
  const size_t V = vocab_size;
  if (K == 0) throw UsageError("K must be positive");
  if (V == 0) throw UsageError("vocabulary must be non-empty");
  if (!(config.eta > 0.0)) throw UsageError("eta must be positive");
  const Vector xi = resolve_xi(config);
  const double xi_sum = std::accumulate(xi.begin(), xi.end(), 0.0);

  LdaResult result;
  std::vector<const BagOfWords*> used;
  for (const auto& d : docs) {
    if (d.empty()) {
      ++result.skipped_documents;
      continue;
    }
    for (TokenId w : d) {
      if (w >= V) throw DataError("document token id " + std::to_string(w) + " out of range");
    }
    used.push_back(&d);
  }
  if (used.empty()) throw DataError("LDA corpus has no non-empty documents");

  std::mt19937_64 rng(config.seed);
  std::vector<std::vector<uint32_t>> z(used.size());
  Matrix n_kw(K, V);
  Vector n_k(K, 0.0);
  Matrix n_dk(used.size(), K);
  std::uniform_int_distribution<size_t> init(0, K - 1);
  for (size_t d = 0; d < used.size(); ++d) {
    z[d].resize(used[d]->size());
    for (size_t i = 0; i < used[d]->size(); ++i) {
      const size_t k = init(rng);
      z[d][i] = static_cast<uint32_t>(k);
      n_kw(k, (*used[d])[i]) += 1.0;
      n_k[k] += 1.0;
      n_dk(d, k) += 1.0;
    }
  }

  const double v_eta = static_cast<double>(V) * config.eta;
  Vector cumulative(K);
  for (size_t sweep = 0; sweep < config.sweeps; ++sweep) {
    for (size_t d = 0; d < used.size(); ++d) {
      const BagOfWords& doc = *used[d];
      for (size_t i = 0; i < doc.size(); ++i) {
        const TokenId w = doc[i];
        size_t k = z[d][i];
        n_kw(k, w) -= 1.0;
        n_k[k] -= 1.0;
        n_dk(d, k) -= 1.0;
        double acc = 0.0;
        for (size_t j = 0; j < K; ++j) {
          acc += (n_dk(d, j) + xi[j]) * (n_kw(j, w) + config.eta) / (n_k[j] + v_eta);
          cumulative[j] = acc;
        }
        k = draw(rng, cumulative);
        z[d][i] = static_cast<uint32_t>(k);
        n_kw(k, w) += 1.0;
        n_k[k] += 1.0;
        n_dk(d, k) += 1.0;
      }
    }
    double ll = 0.0;
    for (size_t d = 0; d < used.size(); ++d) {
      const double denom = static_cast<double>(used[d]->size()) + xi_sum;
      for (TokenId w : *used[d]) {
        double p = 0.0;
        for (size_t j = 0; j < K; ++j) {
          p += (n_dk(d, j) + xi[j]) / denom * (n_kw(j, w) + config.eta) / (n_k[j] + v_eta);
        }
        ll += std::log(p);
      }
    }
    result.log_likelihood.push_back(ll);
  }

  Matrix phi(K, V);
  for (size_t k = 0; k < K; ++k) {
    for (size_t w = 0; w < V; ++w) phi(k, w) = (n_kw(k, w) + config.eta) / (n_k[k] + v_eta);
  }
  result.model = TopicModel(std::move(phi), config.eta, xi, config.seed, config.sweeps,
                            config.infer_sweeps);
  return result;
}

ThetaEstimate infer_theta(const TopicModel& model, const BagOfWords& doc) {
  const size_t K = model.topics();
  const Vector& xi = model.xi();
  const double xi_sum = std::accumulate(xi.begin(), xi.end(), 0.0);
  BagOfWords words;
  for (TokenId w : doc) {
    if (w < model.vocab() && w >= kReservedCount) words.push_back(w);
  }
  ThetaEstimate out;
  if (words.empty() || model.infer_sweeps() == 0) {
    out.theta = xi;
    for (double& v : out.theta) v /= xi_sum;
    out.prior_fallback = true;
    return out;
  }

  std::string bytes;
  for (TokenId w : words) put_u32(bytes, w);
  std::mt19937_64 rng(fnv1a64(bytes, model.seed() ^ 0x9e3779b97f4a7c15ULL));
  std::uniform_int_distribution<size_t> init(0, K - 1);
  std::vector<size_t> z(words.size());
  Vector n_k(K, 0.0);
  for (size_t i = 0; i < words.size(); ++i) {
    z[i] = init(rng);
    n_k[z[i]] += 1.0;
  }
  const Matrix& phi = model.phi();
  const size_t sweeps = model.infer_sweeps();
  const size_t burn = sweeps / 2;
  const double denom = static_cast<double>(words.size()) + xi_sum;
  Vector cumulative(K);
  out.theta.assign(K, 0.0);
  for (size_t s = 0; s < sweeps; ++s) {
    for (size_t i = 0; i < words.size(); ++i) {
      n_k[z[i]] -= 1.0;
      double acc = 0.0;
      for (size_t j = 0; j < K; ++j) {
        acc += (n_k[j] + xi[j]) * phi(j, words[i]);
        cumulative[j] = acc;
      }
      z[i] = draw(rng, cumulative);
      n_k[z[i]] += 1.0;
    }
    if (s >= burn) {
      for (size_t j = 0; j < K; ++j) out.theta[j] += (n_k[j] + xi[j]) / denom;
    }
  }
  const double total = std::accumulate(out.theta.begin(), out.theta.end(), 0.0);
  for (double& v : out.theta) v /= total;
  return out;
}

std::vector<Vector> infer_thetas(const TopicModel& model, const std::vector<BagOfWords>& docs) {
  std::vector<Vector> out(docs.size());
  parallel_for(docs.size(), [&](size_t i) { out[i] = infer_theta(model, docs[i]).theta; });
  return out;
}

std::string_view to_string(Similarity s) {
  return s == Similarity::kCosine ? "cosine" : "neg-js";
}

Similarity parse_similarity(std::string_view name) {
  if (name == "cosine") return Similarity::kCosine;
  if (name == "neg-js") return Similarity::kNegJensenShannon;
  throw UsageError("unknown similarity '" + std::string(name) + "' (cosine, neg-js)");
}

double topic_similarity(const Vector& a, const Vector& b, Similarity metric) {
  if (a.size() != b.size() || a.empty()) throw DataError("topic vectors differ in length");
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw DataError("zero topic vector");
  if (metric == Similarity::kCosine) return dot(a, b) / (na * nb);
  double js = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double m = 0.5 * (a[i] + b[i]);
    if (a[i] > 0.0) js += 0.5 * a[i] * std::log(a[i] / m);
    if (b[i] > 0.0) js += 0.5 * b[i] * std::log(b[i] / m);
  }
  return -js;
}

std::vector<RerankEntry> rerank_scores(const std::vector<double>& similarities,
                                       const std::vector<double>& likelihoods, double lambda) {
  if (similarities.empty()) throw DataError("empty candidate list");
  if (similarities.size() != likelihoods.size()) {
    throw ShapeError("one likelihood per candidate expected");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("lambda must lie in [0, 1]");
  const double n = static_cast<double>(likelihoods.size());
  const double mean = std::accumulate(likelihoods.begin(), likelihoods.end(), 0.0) / n;
  double var = 0.0;
  for (double l : likelihoods) var += (l - mean) * (l - mean);
  const double sd = std::sqrt(var / n);
  std::vector<RerankEntry> out(likelihoods.size());
  for (size_t m = 0; m < out.size(); ++m) {
    out[m].original = m;
    out[m].similarity = similarities[m];
    out[m].z_likelihood = sd > 0.0 ? (likelihoods[m] - mean) / sd : 0.0;
    out[m].combined = lambda * out[m].similarity + (1.0 - lambda) * out[m].z_likelihood;
  }
  std::stable_sort(out.begin(), out.end(), [](const RerankEntry& a, const RerankEntry& b) {
    return a.combined > b.combined;
  });
  return out;
}

std::vector<RerankEntry> rerank(const TopicModel& model, const BagOfWords& history,
                                const std::vector<BagOfWords>& candidates,
                                const std::vector<double>& likelihoods,
                                const RerankConfig& config) {
  if (candidates.empty()) throw DataError("empty candidate list");
  const Vector h = infer_theta(model, history).theta;
  std::vector<double> sims;
  for (const auto& c : candidates) {
    sims.push_back(topic_similarity(h, infer_theta(model, lda_document(c)).theta,
                                    config.similarity));
  }
  return rerank_scores(sims, likelihoods, config.lambda);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 20; ++i) out.push_back(i / 20.0);
  return out;
}

namespace {

std::vector<std::vector<double>> item_similarities(const TopicModel& model,
                                                   const std::vector<RerankItem>& items,
                                                   Similarity similarity) {
  std::vector<std::vector<double>> out(items.size());
  parallel_for(items.size(), [&](size_t i) {
    const RerankItem& item = items[i];
    if (item.candidates.empty()) throw DataError("empty candidate list");
    const Vector h = infer_theta(model, item.history).theta;
    for (const auto& c : item.candidates) {
      out[i].push_back(
          topic_similarity(h, infer_theta(model, lda_document(c)).theta, similarity));
    }
  });
  return out;
}

double objective_of(const std::vector<std::vector<double>>& sims,
                    const std::vector<RerankItem>& items, double lambda,
                    TuneObjective objective) {
  std::vector<std::vector<TokenId>> hyps, refs;
  size_t hits = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    const size_t top = rerank_scores(sims[i], items[i].likelihoods, lambda).front().original;
    hyps.push_back(items[i].candidates[top]);
    refs.push_back(items[i].reference);
    if (items[i].candidates[top] == items[i].reference) ++hits;
  }
  if (objective == TuneObjective::kBleu) return corpus_bleu(hyps, refs);
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

}  // namespace

double rerank_objective(const TopicModel& model, const std::vector<RerankItem>& items,
                        double lambda, Similarity similarity, TuneObjective objective) {
  if (items.empty()) throw DataError("empty tuning set");
  return objective_of(item_similarities(model, items, similarity), items, lambda, objective);
}

TuneResult tune_rerank(const std::vector<TopicModel>& models, const std::vector<double>& lambdas,
                       const std::vector<RerankItem>& items, Similarity similarity,
                       TuneObjective objective) {
  if (models.empty() || lambdas.empty()) throw UsageError("empty tuning grid");
  if (items.empty()) throw DataError("empty tuning set");
  std::vector<size_t> order(models.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return models[a].topics() < models[b].topics();
  });
  std::vector<double> sorted_lambdas = lambdas;
  std::sort(sorted_lambdas.begin(), sorted_lambdas.end());

  TuneResult result;
  bool have = false;
  for (size_t m : order) {
    const auto sims = item_similarities(models[m], items, similarity);
    for (double lambda : sorted_lambdas) {
      const double value = objective_of(sims, items, lambda, objective);
      result.table.push_back({models[m].topics(), lambda, value});
      // Strict improvement keeps the earliest (smallest K, then lambda).
      if (!have || value > result.objective) {
        result.topics = models[m].topics();
        result.lambda = lambda;
        result.objective = value;
        have = true;
      }
    }
  }
  return result;
}

std::string format_tune_table(const TuneResult& result) {
  std::string out;
  char buf[96];
  for (const TuneRow& r : result.table) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.2f\t%.17g\n", r.topics, r.lambda, r.objective);
    out += buf;
  }
  return out;
}

namespace {
constexpr std::string_view kMagic = "ARNNLDA1";
constexpr uint32_t kVersion = 1;
}  // namespace

std::string serialize_topic_model(const TopicModel& model) {
  std::string out(kMagic);
  put_u32(out, kVersion);
  put_u64(out, model.topics());
  put_u64(out, model.vocab());
  put_f64(out, model.eta());
  for (double x : model.xi()) put_f64(out, x);
  put_u64(out, model.seed());
  put_u64(out, model.sweeps());
  put_u64(out, model.infer_sweeps());
  put_u64(out, model.vocab_hash());
  for (double v : model.phi().data()) put_f64(out, v);
  return out;
}

TopicModel parse_topic_model(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw DataError("not a topic model file");
  if (r.u32() != kVersion) throw DataError("unsupported topic model version");
  const uint64_t K = r.u64();
  const uint64_t V = r.u64();
  if (K == 0 || V == 0 || K * V > bytes.size()) throw DataError("corrupt topic model header");
  const double eta = r.f64();
  Vector xi(K);
  for (double& x : xi) x = r.f64();
  const uint64_t seed = r.u64();
  const uint64_t sweeps = r.u64();
  const uint64_t infer_sweeps = r.u64();
  const uint64_t hash = r.u64();
  Matrix phi(K, V);
  for (double& v : phi.data()) v = r.f64();
  if (!r.done()) throw DataError("trailing bytes in topic model file");
  for (size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (double v : phi.row(k)) s += v;
    if (std::abs(s - 1.0) > 1e-9) throw DataError("topic row does not sum to 1");
  }
  TopicModel m(std::move(phi), eta, std::move(xi), seed, sweeps, infer_sweeps);
  m.set_vocab_hash(hash);
  return m;
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_topic_model(model));
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  return parse_topic_model(read_file(path));
}

std::string top_words(const TopicModel& model, const Vocabulary& vocab, size_t n) {
  std::string out;
  const Matrix& phi = model.phi();
  for (size_t k = 0; k < model.topics(); ++k) {
    std::vector<size_t> ids(model.vocab());
    std::iota(ids.begin(), ids.end(), size_t{0});
    const size_t m = std::min(n, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(m), ids.end(),
                      [&](size_t a, size_t b) {
                        return phi(k, a) != phi(k, b) ? phi(k, a) > phi(k, b) : a < b;
                      });
    out += "topic " + std::to_string(k) + ":";
    for (size_t i = 0; i < m; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", phi(k, ids[i]));
      out += " " + vocab.token(static_cast<TokenId>(ids[i])) + "(" + buf + ")";
    }
    out += '\n';
  }
  return out;
}

}  // namespace arnn
