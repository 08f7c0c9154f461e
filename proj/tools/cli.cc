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

#include "cli.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "arnn/corpus.h"
#include "arnn/error.h"
#include "arnn/generator.h"
#include "arnn/io.h"
#include "arnn/metrics.h"
#include "arnn/model.h"
#include "arnn/synthetic.h"
#include "arnn/topics.h"
#include "arnn/trainer.h"
#include "json.hpp"

namespace arnn::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Filled by a subcommand while it runs; written after its artifacts.
struct Manifest {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  uint64_t seed = 0;
  fs::path path;
};

// Resolved value of every option: given on the command line or in the config
// file, otherwise the default. Options without a value are left out.
Json resolved_options(const CLI::App& sub, std::vector<std::string>& argv) {
  Json config = Json::object();
  argv = {"arnn", sub.get_name()};
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) values.push_back(r);
    } else {
      const std::string d = opt->get_default_str();
      if (d.empty() || d == "[]") continue;
      values.push_back(d);
    }
    argv.push_back("--" + name);
    for (const auto& v : values) argv.push_back(v);
    if (opt->get_expected_max() > 1) {
      config[name] = values;
    } else {
      config[name] = values.front();
    }
  }
  return config;
}

void write_manifest(const CLI::App& sub, const Manifest& m, const std::string& started) {
  std::vector<std::string> argv;
  Json j;
  j["subcommand"] = sub.get_name();
  j["config"] = resolved_options(sub, argv);
  j["argv"] = argv;
  std::vector<std::string> inputs;
  for (const auto& i : m.inputs) {
    if (std::find(inputs.begin(), inputs.end(), i) == inputs.end()) inputs.push_back(i);
  }
  j["inputs"] = inputs;
  j["outputs"] = m.outputs;
  j["seed"] = m.seed;
  j["version"] = std::string(kVersion);
  j["started"] = started;
  j["finished"] = utc_now();
  write_file_atomic(m.path, j.dump(2) + "\n");
}

fs::path with_suffix(const fs::path& p, std::string_view suffix) {
  return fs::path(p.string() + std::string(suffix));
}

// ---------------------------------------------------------------------------
// Loading with hash checks.

Model load_model(const fs::path& path, const Vocabulary& vocab) {
  Model m = load_checkpoint(path);
  if (m.vocab_hash() != vocab.hash() || m.dims().vocab != vocab.size()) {
    throw DataError("checkpoint " + path.string() + " was built for vocabulary hash " +
                    hex64(m.vocab_hash()) + " (V=" + std::to_string(m.dims().vocab) +
                    "), but the vocabulary has hash " + hex64(vocab.hash()) +
                    " (V=" + std::to_string(vocab.size()) + "); refusing to run");
  }
  return m;
}

TopicModel load_topics(const fs::path& path, const Vocabulary& vocab) {
  TopicModel t = load_topic_model(path);
  if (t.vocab_hash() != vocab.hash() || t.vocab() != vocab.size()) {
    throw DataError("topic model " + path.string() + " was built for vocabulary hash " +
                    hex64(t.vocab_hash()) + ", but the vocabulary has hash " +
                    hex64(vocab.hash()) + "; refusing to run");
  }
  return t;
}

std::vector<Dialogue> load_dialogues(const fs::path& path, const Vocabulary& vocab) {
  return encode_all(vocab, read_corpus(path));
}

// Topic features for T-A-RNN: theta of each dialogue's history. Empty for
// the other kinds.
std::vector<Vector> history_thetas(ModelKind kind, size_t topics, const std::string& topic_path,
                                   const Vocabulary& vocab, const std::vector<Dialogue>& ds,
                                   Manifest& m) {
  if (!uses_topics(kind)) return {};
  if (topic_path.empty()) throw UsageError("model kind tarnn needs --topic-model");
  const TopicModel tm = load_topics(topic_path, vocab);
  m.inputs.push_back(topic_path);
  if (topics != 0 && tm.topics() != topics) {
    throw DataError("topic model has K=" + std::to_string(tm.topics()) +
                    " but the checkpoint expects K=" + std::to_string(topics));
  }
  std::vector<BagOfWords> docs;
  docs.reserve(ds.size());
  for (const auto& d : ds) docs.push_back(lda_document(history_of(d)));
  return infer_thetas(tm, docs);
}

std::vector<Dialogue> histories_of(const std::vector<Dialogue>& ds) {
  std::vector<Dialogue> out;
  out.reserve(ds.size());
  for (const auto& d : ds) out.push_back(history_of(d));
  return out;
}

std::string candidate_line(size_t history, size_t rank, double score, double ll,
                           const std::string& text) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%.17g\t%.17g\t", history, rank, score, ll);
  return buf + text + "\n";
}

// Candidate records grouped by history index, in file order.
std::map<size_t, std::vector<CandidateRecord>> group_candidates(const Vocabulary& vocab,
                                                                const fs::path& path,
                                                                size_t dialogues) {
  std::map<size_t, std::vector<CandidateRecord>> groups;
  for (auto& r : parse_candidates(vocab, read_file(path))) {
    if (r.history >= dialogues) {
      throw DataError(path.string() + ": history index " + std::to_string(r.history) +
                      " is out of range for " + std::to_string(dialogues) + " dialogues");
    }
    groups[r.history].push_back(std::move(r));
  }
  if (groups.empty()) throw DataError(path.string() + ": no candidates");
  return groups;
}

std::vector<TokenId> final_utterance(const Dialogue& d) {
  if (d.utterances.empty()) throw DataError("empty dialogue");
  return d.utterances.back().tokens;
}

// ---------------------------------------------------------------------------
// Subcommands. Each holds its own options, bound to CLI11 in `add_*`.

struct SynthOptions {
  std::string task = "recall";
  size_t dialogues = 1000;
  uint64_t seed = 1;
  std::string out;
};

void run_synth(const SynthOptions& o, Manifest& m, std::ostream& out) {
  std::vector<RawDialogue> raw;
  if (o.task == "recall") {
    RecallTaskConfig c;
    c.dialogues = o.dialogues;
    c.seed = o.seed;
    raw = make_recall_corpus(c).raw;
  } else if (o.task == "grammar") {
    GrammarTaskConfig c;
    c.dialogues = o.dialogues;
    c.seed = o.seed;
    raw = make_grammar_corpus(c).raw;
  } else if (o.task == "topic") {
    TopicTaskConfig c;
    c.dialogues = o.dialogues;
    c.seed = o.seed;
    raw = make_topic_corpus(c).raw;
  } else if (o.task == "zipf") {
    raw = make_zipf_corpus(o.dialogues, 500, 1.1, 8, o.seed);
  } else {
    throw UsageError("unknown task: " + o.task + " (expected recall, grammar, topic or zipf)");
  }
  write_corpus(o.out, raw);
  m.seed = o.seed;
  m.outputs = {o.out};
  m.path = with_suffix(o.out, ".manifest.json");
  out << "wrote " << raw.size() << " dialogues to " << o.out << "\n";
}

struct PrepareOptions {
  std::string corpus;
  size_t vocab_size = 10000;
  double train_ratio = 0.8;
  double dev_ratio = 0.1;
  double test_ratio = 0.1;
  uint64_t seed = 1;
  std::string out_dir;
};

void run_prepare(const PrepareOptions& o, Manifest& m, std::ostream& out) {
  const std::vector<RawDialogue> corpus = read_corpus(o.corpus);
  const SplitIndices split =
      split_indices(corpus.size(), o.train_ratio, o.dev_ratio, o.test_ratio, o.seed);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  auto pick = [&](const std::vector<size_t>& idx) {
    std::vector<RawDialogue> part;
    part.reserve(idx.size());
    for (size_t i : idx) part.push_back(corpus[i]);
    return part;
  };
  const auto train_part = pick(split.train);
  // Built on the training split only.
  const Vocabulary vocab = Vocabulary::build(token_streams(train_part), o.vocab_size);
  write_corpus(dir / "train.txt", train_part);
  write_corpus(dir / "dev.txt", pick(split.dev));
  write_corpus(dir / "test.txt", pick(split.test));
  vocab.save(dir / "vocab.txt");

  m.seed = o.seed;
  m.inputs = {o.corpus};
  for (const char* f : {"train.txt", "dev.txt", "test.txt", "vocab.txt"}) {
    m.outputs.push_back((dir / f).string());
  }
  m.path = dir / "manifest.json";
  out << "train " << split.train.size() << " dev " << split.dev.size() << " test "
      << split.test.size() << " vocab " << vocab.size() << " hash " << hex64(vocab.hash())
      << "\n";
}

struct TrainOptions {
  std::string model = "arnn";
  std::string train;
  std::string dev;
  std::string vocab;
  std::string topic_model;
  std::string pretrain;
  std::string pretrain_dev;
  size_t pretrain_epochs = 10;
  size_t d = 300;
  size_t d_e = 300;
  double lr = 1e-3;
  size_t max_epochs = 50;
  size_t patience = 5;
  double clip = 5.0;
  uint64_t seed = 1;
  size_t eval_interval = 0;
  double init_scale = 0.08;
  std::string out;
};

void run_train(const TrainOptions& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const ModelKind kind = parse_model_kind(o.model);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const auto train_d = load_dialogues(o.train, vocab);
  const auto dev_d = load_dialogues(o.dev, vocab);
  m.inputs = {o.train, o.dev, o.vocab};

  size_t topics = 0;
  if (uses_topics(kind)) {
    if (o.topic_model.empty()) throw UsageError("model kind tarnn needs --topic-model");
    topics = load_topics(o.topic_model, vocab).topics();
  }
  const auto train_x = make_examples(kind, train_d,
                                     history_thetas(kind, topics, o.topic_model, vocab, train_d, m));
  const auto dev_x =
      make_examples(kind, dev_d, history_thetas(kind, topics, o.topic_model, vocab, dev_d, m));

  TrainConfig c;
  c.hidden = o.d;
  c.embed = o.d_e;
  c.adam.learning_rate = o.lr;
  c.max_epochs = o.max_epochs;
  c.patience = o.patience;
  c.clip = o.clip;
  c.seed = o.seed;
  c.eval_interval = o.eval_interval;
  c.init_scale = o.init_scale;
  const ModelDims dims{o.d, o.d_e, vocab.size(), topics};

  // The log is echoed live and saved once training ends.
  std::ostringstream log;
  struct Tee : std::streambuf {
    std::streambuf* a;
    std::streambuf* b;
    int overflow(int ch) override {
      if (ch == EOF) return 0;
      a->sputc(static_cast<char>(ch));
      b->sputc(static_cast<char>(ch));
      return ch;
    }
  } tee;
  tee.a = log.rdbuf();
  tee.b = err.rdbuf();
  std::ostream log_stream(&tee);

  TrainResult r = [&] {
    if (o.pretrain.empty()) return train(kind, dims, train_x, dev_x, c, &log_stream);
    PretrainData pre;
    const auto pt = load_dialogues(o.pretrain, vocab);
    pre.train = make_examples(kind, pt, history_thetas(kind, topics, o.topic_model, vocab, pt, m));
    m.inputs.push_back(o.pretrain);
    if (!o.pretrain_dev.empty()) {
      const auto pd = load_dialogues(o.pretrain_dev, vocab);
      pre.dev = make_examples(kind, pd, history_thetas(kind, topics, o.topic_model, vocab, pd, m));
      m.inputs.push_back(o.pretrain_dev);
    }
    TrainConfig pc = c;
    pc.max_epochs = o.pretrain_epochs;
    return pretrain_finetune(kind, dims, pre, train_x, dev_x, pc, c, &log_stream);
  }();

  r.model.set_vocab_hash(vocab.hash());
  save_checkpoint(r.model, o.out);
  const fs::path log_path = with_suffix(o.out, ".log");
  write_file_atomic(log_path, log.str());
  m.seed = o.seed;
  m.outputs = {o.out, log_path.string()};
  m.path = with_suffix(o.out, ".manifest.json");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", r.best_dev_ppl);
  out << "best dev ppl " << buf << " after " << r.epochs_run << " epochs"
      << (r.early_stopped ? " (early stop)" : "") << "\n";
}

struct EvalOptions {
  std::string checkpoint;
  std::string vocab;
  std::string data;
  std::string topic_model;
  size_t recall_sets = 0;
  double length_alpha = 1.0;
  uint64_t seed = 1;
  std::string out;
};

void run_eval(const EvalOptions& o, Manifest& m, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const Model model = load_model(o.checkpoint, vocab);
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.checkpoint, o.vocab, o.data};
  const auto thetas =
      history_thetas(model.kind(), model.dims().topics, o.topic_model, vocab, ds, m);
  EvalReport report = evaluate(ModelScorer(model), make_examples(model.kind(), ds, thetas));

  if (o.recall_sets > 0) {
    const size_t n = std::min(o.recall_sets, ds.size());
    std::vector<CandidateSet> sets;
    std::vector<Vector> set_thetas;
    for (size_t i = 0; i < n; ++i) {
      sets.push_back(sample_candidates(ds, i, o.seed));
      if (!thetas.empty()) set_thetas.push_back(thetas[i]);
    }
    for (size_t k : {1, 2, 5}) {
      report.values["recall@" + std::to_string(k)] =
          recall_at_n(model, sets, k, set_thetas, o.length_alpha);
    }
    report.counts["recall_sets"] = n;
  }
  write_file_atomic(o.out, report.to_json());
  m.seed = o.seed;
  m.outputs = {o.out};
  m.path = with_suffix(o.out, ".manifest.json");
  out << report.to_tsv();
}

struct GenerateOptions {
  std::string checkpoint;
  std::string vocab;
  std::string data;
  std::string topic_model;
  size_t beam_width = 10;
  size_t max_len = 30;
  size_t n_best = 10;
  double length_alpha = 1.0;
  std::string out;
};

GenerateConfig generate_config(size_t beam, size_t max_len, size_t n_best, double alpha) {
  GenerateConfig g;
  g.beam_width = beam;
  g.max_len = max_len;
  g.n_best = n_best;
  g.length_alpha = alpha;
  return g;
}

void run_generate(const GenerateOptions& o, Manifest& m, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const Model model = load_model(o.checkpoint, vocab);
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.checkpoint, o.vocab, o.data};
  const auto thetas =
      history_thetas(model.kind(), model.dims().topics, o.topic_model, vocab, ds, m);
  const auto all = generate_all(model, histories_of(ds),
                                generate_config(o.beam_width, o.max_len, o.n_best, o.length_alpha),
                                thetas);
  std::string text;
  for (size_t i = 0; i < all.size(); ++i) text += format_candidates(vocab, i, all[i]);
  write_file_atomic(o.out, text);
  m.outputs = {o.out};
  m.path = with_suffix(o.out, ".manifest.json");
  out << "generated candidates for " << all.size() << " histories\n";
}

struct LdaOptions {
  std::string vocab;
  std::string data;
  size_t topics_k = 10;
  double eta = 0.01;
  double xi = 0.0;
  size_t sweeps = 200;
  size_t infer_sweeps = 50;
  uint64_t seed = 1;
  std::string out;
};

void run_lda(const LdaOptions& o, Manifest& m, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.vocab, o.data};
  std::vector<BagOfWords> docs;
  docs.reserve(ds.size());
  for (const auto& d : ds) docs.push_back(lda_document(d));
  LdaConfig c;
  c.topics = o.topics_k;
  c.eta = o.eta;
  c.xi = o.xi;
  c.sweeps = o.sweeps;
  c.infer_sweeps = o.infer_sweeps;
  c.seed = o.seed;
  LdaResult r = lda_train(docs, vocab.size(), c);
  r.model.set_vocab_hash(vocab.hash());
  save_topic_model(r.model, o.out);
  const fs::path top = with_suffix(o.out, ".top.txt");
  write_file_atomic(top, top_words(r.model, vocab, 10));
  std::string trace;
  char buf[48];
  for (size_t i = 0; i < r.log_likelihood.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.17g\n", i, r.log_likelihood[i]);
    trace += buf;
  }
  const fs::path ll = with_suffix(o.out, ".ll.tsv");
  write_file_atomic(ll, trace);
  m.seed = o.seed;
  m.outputs = {o.out, top.string(), ll.string()};
  m.path = with_suffix(o.out, ".manifest.json");
  out << "K=" << o.topics_k << " documents " << docs.size() - r.skipped_documents
      << " skipped " << r.skipped_documents << "\n";
}

struct RerankOptions {
  std::string candidates;
  std::string data;
  std::string vocab;
  std::string topic_model;
  double lambda = 0.45;
  std::string similarity = "cosine";
  std::string out;
};

// Histories as documents, candidates as documents, and likelihoods (the
// normalized generation score) for one history's candidate group.
RerankItem rerank_item(const Dialogue& d, const std::vector<CandidateRecord>& group) {
  RerankItem item;
  item.history = lda_document(history_of(d));
  for (const auto& r : group) {
    item.candidates.push_back(r.tokens);
    item.likelihoods.push_back(r.score);
  }
  item.reference = final_utterance(d);
  return item;
}

void run_rerank(const RerankOptions& o, Manifest& m, std::ostream& out) {
  const Similarity sim = parse_similarity(o.similarity);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const TopicModel tm = load_topics(o.topic_model, vocab);
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.candidates, o.data, o.vocab, o.topic_model};
  std::string text;
  for (const auto& [h, group] : group_candidates(vocab, o.candidates, ds.size())) {
    const RerankItem item = rerank_item(ds[h], group);
    std::vector<BagOfWords> docs;
    for (const auto& c : item.candidates) docs.push_back(lda_document(c));
    const auto order =
        rerank(tm, item.history, docs, item.likelihoods, {o.lambda, sim, tm.topics()});
    for (size_t r = 0; r < order.size(); ++r) {
      const CandidateRecord& c = group[order[r].original];
      text += candidate_line(h, r + 1, order[r].combined, c.log_likelihood,
                             detokenize(vocab, c.tokens));
    }
  }
  write_file_atomic(o.out, text);
  m.outputs = {o.out};
  m.path = with_suffix(o.out, ".manifest.json");
  out << "reranked with lambda " << o.lambda << " (" << o.similarity << ")\n";
}

struct TuneOptions {
  std::string candidates;
  std::string data;
  std::string vocab;
  std::vector<std::string> topic_models;
  std::vector<double> lambdas;
  std::string similarity = "cosine";
  std::string objective = "bleu";
  std::string out;
};

void run_tune(const TuneOptions& o, Manifest& m, std::ostream& out) {
  const Similarity sim = parse_similarity(o.similarity);
  TuneObjective objective;
  if (o.objective == "bleu") {
    objective = TuneObjective::kBleu;
  } else if (o.objective == "recall1") {
    objective = TuneObjective::kRecallAt1;
  } else {
    throw UsageError("unknown objective: " + o.objective + " (expected bleu or recall1)");
  }
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.candidates, o.data, o.vocab};
  std::vector<TopicModel> models;
  for (const auto& p : o.topic_models) {
    models.push_back(load_topics(p, vocab));
    m.inputs.push_back(p);
  }
  std::vector<RerankItem> items;
  for (const auto& [h, group] : group_candidates(vocab, o.candidates, ds.size())) {
    items.push_back(rerank_item(ds[h], group));
  }
  const TuneResult r = tune_rerank(models, o.lambdas.empty() ? default_lambda_grid() : o.lambdas,
                                   items, sim, objective);
  write_file_atomic(o.out, format_tune_table(r));
  m.outputs = {o.out};
  m.path = with_suffix(o.out, ".manifest.json");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "best K=%zu lambda=%.2f %s=%.6g\n", r.topics, r.lambda,
                o.objective.c_str(), r.objective);
  out << buf;
}

struct AttvizOptions {
  std::string checkpoint;
  std::string vocab;
  std::string data;
  std::string topic_model;
  size_t index = 0;
  std::string response;
  size_t beam_width = 10;
  size_t max_len = 30;
  size_t cell = 8;
  std::string out;
};

// Grayscale heatmap, one cell per weight, darker = larger. Each row is
// scaled by its maximum. The exact weights are kept in "# alpha" comments.
std::string render_pgm(const Vocabulary& vocab, const AttentionTrace& t, size_t cell) {
  const size_t cols = t.columns.size();
  const size_t rows = t.rows.size();
  std::ostringstream s;
  s << "P2\n# arnn attention heatmap: rows = generated tokens, columns = history tokens\n";
  s << "# columns";
  for (TokenId c : t.columns) s << ' ' << vocab.token(c);
  s << "\n";
  char buf[32];
  for (size_t r = 0; r < rows; ++r) {
    s << "# alpha " << r << ' ' << vocab.token(t.generated[r]);
    for (double a : t.rows[r]) {
      std::snprintf(buf, sizeof(buf), " %.17g", a);
      s << buf;
    }
    s << "\n";
  }
  s << cols * cell << ' ' << rows * cell << "\n255\n";
  for (size_t r = 0; r < rows; ++r) {
    const Vector& row = t.rows[r];
    const double peak = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    std::vector<int> px(cols, 255);
    for (size_t c = 0; c < row.size() && c < cols; ++c) {
      if (peak > 0.0) px[c] = static_cast<int>(std::lround(255.0 * (1.0 - row[c] / peak)));
    }
    std::string line;
    for (size_t c = 0; c < cols; ++c) {
      for (size_t k = 0; k < cell; ++k) {
        if (!line.empty()) line += ' ';
        line += std::to_string(px[c]);
      }
    }
    for (size_t k = 0; k < cell; ++k) s << line << "\n";
  }
  return s.str();
}

void run_attviz(const AttvizOptions& o, Manifest& m, std::ostream& out) {
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const Model model = load_model(o.checkpoint, vocab);
  if (!has_attention(model.kind())) {
    throw DataError("checkpoint " + o.checkpoint + " is a " +
                    std::string(to_string(model.kind())) +
                    " model without attention; use arnn, tarnn or attn-seq2seq");
  }
  if (o.cell == 0) throw UsageError("--cell must be at least 1");
  const auto ds = load_dialogues(o.data, vocab);
  m.inputs = {o.checkpoint, o.vocab, o.data};
  if (o.index >= ds.size()) {
    throw DataError("--index " + std::to_string(o.index) + " is past the " +
                    std::to_string(ds.size()) + " dialogues in " + o.data);
  }
  const std::vector<Dialogue> one = {ds[o.index]};
  const auto thetas =
      history_thetas(model.kind(), model.dims().topics, o.topic_model, vocab, one, m);
  const Vector theta = thetas.empty() ? Vector{} : thetas.front();

  // Everything before the final utterance is the history; the traced
  // response is given or generated.
  const Dialogue history = history_of(ds[o.index]);
  std::vector<TokenId> response;
  if (!o.response.empty()) {
    std::istringstream words(o.response);
    std::vector<std::string> toks;
    for (std::string w; words >> w;) toks.push_back(w);
    response = vocab.encode(toks);
    response.push_back(kEndOfUtterance);
  } else {
    response = generate(model, history, generate_config(o.beam_width, o.max_len, 1, 1.0),
                        theta)
                   .front()
                   .tokens;
  }
  const AttentionTrace trace = trace_attention(model, history, response, theta);
  const fs::path json = with_suffix(o.out, ".json");
  const fs::path pgm = with_suffix(o.out, ".pgm");
  write_file_atomic(json, trace_to_json(vocab, trace));
  write_file_atomic(pgm, render_pgm(vocab, trace, o.cell));
  m.outputs = {json.string(), pgm.string()};
  m.path = with_suffix(o.out, ".manifest.json");
  out << "response: " << detokenize(vocab, response) << "\n";
}

// ---------------------------------------------------------------------------

int report(std::ostream& err, int code, const std::string& what) {
  err << "arnn: error: " << what << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Attention RNN dialogue modelling toolkit", "arnn");
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "key=value file with one [subcommand] section per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic dialogue corpus");
  s->add_option("--task", synth.task, "recall, grammar, topic or zipf");
  s->add_option("--dialogues", synth.dialogues);
  s->add_option("--seed", synth.seed);
  s->add_option("--out", synth.out, "corpus file")->required();

  PrepareOptions prep;
  auto* p = app.add_subcommand("prepare", "Split a corpus and build the vocabulary");
  p->add_option("--corpus", prep.corpus)->required();
  p->add_option("--vocab-size", prep.vocab_size, "maximum size, reserved tokens included");
  p->add_option("--train-ratio", prep.train_ratio);
  p->add_option("--dev-ratio", prep.dev_ratio);
  p->add_option("--test-ratio", prep.test_ratio);
  p->add_option("--seed", prep.seed);
  p->add_option("--out-dir", prep.out_dir)->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model with early stopping on dev perplexity");
  t->add_option("--model", tr.model, "rnn, arnn, tarnn, seq2seq or attn-seq2seq");
  t->add_option("--train", tr.train)->required();
  t->add_option("--dev", tr.dev)->required();
  t->add_option("--vocab", tr.vocab)->required();
  t->add_option("--topic-model", tr.topic_model, "LDA model; tarnn only");
  t->add_option("--pretrain", tr.pretrain, "corpus trained on first, then fine-tuned away from");
  t->add_option("--pretrain-dev", tr.pretrain_dev);
  t->add_option("--pretrain-epochs", tr.pretrain_epochs);
  t->add_option("--d", tr.d, "hidden size");
  t->add_option("--d-e", tr.d_e, "embedding size");
  t->add_option("--lr", tr.lr);
  t->add_option("--max-epochs", tr.max_epochs);
  t->add_option("--patience", tr.patience);
  t->add_option("--clip", tr.clip, "global gradient norm; 0 disables");
  t->add_option("--seed", tr.seed);
  t->add_option("--eval-interval", tr.eval_interval, "sequences between dev evaluations; 0 = per epoch");
  t->add_option("--init-scale", tr.init_scale);
  t->add_option("--out", tr.out, "checkpoint file")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Perplexity, word error rate and recall@N");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--vocab", ev.vocab)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--topic-model", ev.topic_model);
  e->add_option("--recall-sets", ev.recall_sets, "candidate sets for recall@N; 0 skips");
  e->add_option("--length-alpha", ev.length_alpha);
  e->add_option("--seed", ev.seed, "negative sampling seed");
  e->add_option("--out", ev.out, "JSON report")->required();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Beam-search responses to each dialogue's history");
  g->add_option("--checkpoint", gen.checkpoint)->required();
  g->add_option("--vocab", gen.vocab)->required();
  g->add_option("--data", gen.data)->required();
  g->add_option("--topic-model", gen.topic_model);
  g->add_option("--beam-width", gen.beam_width);
  g->add_option("--max-len", gen.max_len);
  g->add_option("--n-best", gen.n_best);
  g->add_option("--length-alpha", gen.length_alpha);
  g->add_option("--out", gen.out, "candidate dump")->required();

  LdaOptions lda;
  auto* l = app.add_subcommand("lda", "Train an LDA topic model on whole dialogues");
  l->add_option("--vocab", lda.vocab)->required();
  l->add_option("--data", lda.data)->required();
  l->add_option("--topics-k", lda.topics_k);
  l->add_option("--eta", lda.eta);
  l->add_option("--xi", lda.xi, "document-topic prior; 0 means 50/K");
  l->add_option("--sweeps", lda.sweeps);
  l->add_option("--infer-sweeps", lda.infer_sweeps);
  l->add_option("--seed", lda.seed);
  l->add_option("--out", lda.out, "topic model file")->required();

  RerankOptions rr;
  auto* r = app.add_subcommand("rerank", "Reorder generated candidates by topic similarity");
  r->add_option("--candidates", rr.candidates)->required();
  r->add_option("--data", rr.data, "corpus the candidates were generated from")->required();
  r->add_option("--vocab", rr.vocab)->required();
  r->add_option("--topic-model", rr.topic_model)->required();
  r->add_option("--lambda", rr.lambda);
  r->add_option("--similarity", rr.similarity, "cosine or neg-js");
  r->add_option("--out", rr.out, "reranked candidate dump")->required();

  TuneOptions tu;
  auto* u = app.add_subcommand("tune", "Grid-search K and lambda for reranking");
  u->add_option("--candidates", tu.candidates)->required();
  u->add_option("--data", tu.data)->required();
  u->add_option("--vocab", tu.vocab)->required();
  u->add_option("--topic-model", tu.topic_models, "one file per K")->required();
  u->add_option("--lambdas", tu.lambdas, "default 0, 0.05, ..., 1");
  u->add_option("--similarity", tu.similarity);
  u->add_option("--objective", tu.objective, "bleu or recall1");
  u->add_option("--out", tu.out, "grid table")->required();

  AttvizOptions av;
  auto* a = app.add_subcommand("attviz", "Export attention weights and a heatmap");
  a->add_option("--checkpoint", av.checkpoint)->required();
  a->add_option("--vocab", av.vocab)->required();
  a->add_option("--data", av.data, "corpus holding the history")->required();
  a->add_option("--topic-model", av.topic_model);
  a->add_option("--index", av.index, "dialogue whose history is traced");
  a->add_option("--response", av.response, "response to trace; generated when empty");
  a->add_option("--beam-width", av.beam_width);
  a->add_option("--max-len", av.max_len);
  a->add_option("--cell", av.cell, "pixels per weight");
  a->add_option("--out", av.out, "output prefix for .json and .pgm")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::string started = utc_now();
  Manifest m;
  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == s) run_synth(synth, m, out);
    if (sub == p) run_prepare(prep, m, out);
    if (sub == t) run_train(tr, m, out, err);
    if (sub == e) run_eval(ev, m, out);
    if (sub == g) run_generate(gen, m, out);
    if (sub == l) run_lda(lda, m, out);
    if (sub == r) run_rerank(rr, m, out);
    if (sub == u) run_tune(tu, m, out);
    if (sub == a) run_attviz(av, m, out);
    write_manifest(*sub, m, started);
  } catch (const UsageError& ex) {
    return report(err, kUsage, ex.what());
  } catch (const NumericalError& ex) {
    return report(err, kNumerical, ex.what());
  } catch (const Error& ex) {
    return report(err, kData, ex.what());
  } catch (const std::exception& ex) {
    // I/O failures and the like.
    return report(err, kData, ex.what());
  }
  return kOk;
}

}  // namespace arnn::cli
