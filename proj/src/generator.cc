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

#include "arnn/generator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "arnn/parallel.h"
#include "json.hpp"

namespace arnn {

namespace {

struct Hypothesis {
  Decoder decoder;
  std::vector<TokenId> tokens;
  double ll = 0.0;
  std::vector<Vector> rows;
};

struct Expansion {
  size_t parent;
  TokenId token;
  double ll;
};

double normalized(double ll, size_t len, double alpha) {
  return ll / std::pow(static_cast<double>(len), alpha);
}

std::vector<TokenId> decoding_context(const Dialogue& history) {
  if (history.utterances.empty()) throw DataError("cannot decode from an empty history");
  return response_prefix(history);
}

}  // namespace

std::vector<Candidate> generate(const Model& model, const Dialogue& history,
                                const GenerateConfig& config, const Vector& theta) {
  if (config.beam_width == 0) throw UsageError("beam width must be at least 1");
  if (config.max_len == 0) throw UsageError("max_len must be at least 1");
  if (config.n_best == 0 || config.n_best > config.beam_width) {
    throw UsageError("n_best must lie in [1, beam_width]");
  }
  const std::vector<TokenId> context = decoding_context(history);
  const size_t V = model.dims().vocab;
  std::vector<bool> allowed(V, true);
  for (TokenId t : config.banned) {
    if (t < V) allowed[t] = false;
  }

  std::vector<Hypothesis> live;
  live.push_back({Decoder(model, context, theta), {}, 0.0, {}});
  std::vector<Candidate> finished;

  for (size_t step = 0; step < config.max_len && !live.empty(); ++step) {
    std::vector<Expansion> pool;
    pool.reserve(live.size() * V);
    for (size_t h = 0; h < live.size(); ++h) {
      const Vector& p = live[h].decoder.distribution();
      for (TokenId v = 0; v < V; ++v) {
        if (allowed[v]) pool.push_back({h, v, live[h].ll + std::log(p[v])});
      }
    }
    const size_t keep = std::min(config.beam_width, pool.size());
    // Pool order (parent, token) is the tie-break.
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                      [](const Expansion& a, const Expansion& b) {
                        if (a.ll != b.ll) return a.ll > b.ll;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    pool.resize(keep);

    std::vector<Hypothesis> next;
    for (const Expansion& e : pool) {
      const Hypothesis& parent = live[e.parent];
      std::vector<TokenId> tokens = parent.tokens;
      tokens.push_back(e.token);
      std::vector<Vector> rows;
      if (config.record_attention) {
        rows = parent.rows;
        rows.push_back(live[e.parent].decoder.attention());
      }
      const bool done = e.token == kEndOfUtterance;
      if (done || step + 1 == config.max_len) {
        Candidate c;
        c.tokens = std::move(tokens);
        c.log_likelihood = e.ll;
        c.score = normalized(e.ll, c.tokens.size(), config.length_alpha);
        c.complete = done;
        if (config.record_attention) {
          c.trace.columns = context;
          if (!is_seq2seq(model.kind())) {
            c.trace.columns.insert(c.trace.columns.end(), c.tokens.begin(), c.tokens.end() - 1);
          }
          c.trace.generated = c.tokens;
          c.trace.rows = std::move(rows);
        }
        finished.push_back(std::move(c));
        continue;
      }
      Hypothesis child{parent.decoder, std::move(tokens), e.ll, std::move(rows)};
      child.decoder.advance(e.token);
      next.push_back(std::move(child));
    }
    live = std::move(next);
  }

  std::stable_sort(finished.begin(), finished.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (finished.size() > config.n_best) finished.resize(config.n_best);
  return finished;
}

std::vector<std::vector<Candidate>> generate_all(const Model& model,
                                                 const std::vector<Dialogue>& histories,
                                                 const GenerateConfig& config,
                                                 const std::vector<Vector>& thetas) {
  if (!thetas.empty() && thetas.size() != histories.size()) {
    throw ShapeError("one topic vector per history expected");
  }
  std::vector<std::vector<Candidate>> out(histories.size());
  parallel_for(histories.size(), [&](size_t i) {
    out[i] = generate(model, histories[i], config, thetas.empty() ? Vector{} : thetas[i]);
  });
  return out;
}

AttentionTrace trace_attention(const Model& model, const Dialogue& history,
                               const std::vector<TokenId>& continuation, const Vector& theta) {
  if (!has_attention(model.kind())) {
    throw UsageError("model '" + std::string(to_string(model.kind())) + "' has no attention");
  }
  if (continuation.empty()) throw DataError("empty continuation");
  AttentionTrace trace;
  trace.columns = decoding_context(history);
  Decoder dec(model, trace.columns, theta);
  for (TokenId t : continuation) {
    trace.rows.push_back(dec.attention());
    dec.advance(t);
  }
  if (!is_seq2seq(model.kind())) {
    trace.columns.insert(trace.columns.end(), continuation.begin(), continuation.end() - 1);
  }
  trace.generated = continuation;
  return trace;
}

double continuation_log_likelihood(const Model& model, const Dialogue& history,
                                   const std::vector<TokenId>& continuation, const Vector& theta) {
  const Example ex = make_continuation_example(model.kind(), history, continuation, theta);
  const TokenScores s = score_example(model, ex);
  double ll = 0.0;
  for (size_t t = ex.last_begin; t < ex.last_end; ++t) ll += s.log_probs[t];
  return ll;
}

std::string format_candidates(const Vocabulary& vocab, size_t history_index,
                              const std::vector<Candidate>& candidates) {
  std::string out;
  char buf[96];
  for (size_t r = 0; r < candidates.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%.17g\t%.17g\t", history_index, r + 1,
                  candidates[r].score, candidates[r].log_likelihood);
    out += buf;
    out += detokenize(vocab, candidates[r].tokens);
    out += '\n';
  }
  return out;
}

std::vector<CandidateRecord> parse_candidates(const Vocabulary& vocab, std::string_view text) {
  std::vector<CandidateRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        throw DataError("candidate line " + std::to_string(line_no) + ": expected 5 fields");
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    CandidateRecord rec;
    try {
      rec.history = std::stoul(fields[0]);
      rec.rank = std::stoul(fields[1]);
      rec.score = std::stod(fields[2]);
      rec.log_likelihood = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw DataError("candidate line " + std::to_string(line_no) + ": malformed number");
    }
    std::istringstream words(line.substr(start));
    std::string w;
    while (words >> w) rec.tokens.push_back(vocab.id(w));
    out.push_back(std::move(rec));
  }
  return out;
}

std::string trace_to_json(const Vocabulary& vocab, const AttentionTrace& trace) {
  nlohmann::ordered_json j;
  auto labels = [&](const std::vector<TokenId>& ids) {
    std::vector<std::string> out;
    for (TokenId t : ids) out.emplace_back(vocab.token(t));
    return out;
  };
  j["columns"] = labels(trace.columns);
  j["generated"] = labels(trace.generated);
  j["rows"] = trace.rows;
  return j.dump(1) + "\n";
}

}  // namespace arnn
