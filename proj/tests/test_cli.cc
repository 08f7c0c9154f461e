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

#include <chrono>
#include <filesystem>
#include <random>
#include <sstream>

#include "arnn/corpus.h"
#include "arnn/generator.h"
#include "arnn/io.h"
#include "arnn/model.h"
#include "cli.h"
#include "doctest.h"
#include "json.hpp"

using namespace arnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run arnn_cmd(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Fresh scratch directory per test case, removed on exit.
struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("arnn_cli_" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

// n dialogues "d<i>a x | d<i>b y", so each dialogue is identifiable.
void write_numbered_corpus(const std::string& path, size_t n) {
  std::vector<RawDialogue> c;
  for (size_t i = 0; i < n; ++i) {
    const std::string tag = "d" + std::to_string(i);
    c.push_back({{tag + "a", "x"}, {tag + "b", "y"}});
  }
  write_corpus(path, c);
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(read_file(path)); }

// Synthetic recall corpus, split and a small trained A-RNN checkpoint.
struct Pipeline {
  Scratch s;
  Pipeline(const std::string& model = "arnn") {
    REQUIRE(arnn_cmd({"synth", "--task", "recall", "--dialogues", "200", "--out", s("c.txt")}).code == 0);
    REQUIRE(arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("p")}).code == 0);
    const Run r = arnn_cmd({"train", "--model", model, "--train", s("p/train.txt"), "--dev",
                            s("p/dev.txt"), "--vocab", s("p/vocab.txt"), "--d", "12", "--d-e",
                            "6", "--lr", "0.005", "--max-epochs", "2", "--out", s("m.ckpt")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

}  // namespace

TEST_CASE("prepare splits by ratio and seed") {
  Scratch s;
  write_numbered_corpus(s("c.txt"), 101);
  Run r = arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("a"), "--seed", "3"});
  REQUIRE(r.code == 0);
  const SplitIndices expect = split_indices(101, 0.8, 0.1, 0.1, 3);
  CHECK(read_corpus(s("a/train.txt")).size() == expect.train.size());
  CHECK(read_corpus(s("a/dev.txt")).size() == expect.dev.size());
  CHECK(read_corpus(s("a/test.txt")).size() == expect.test.size());
  CHECK(expect.train.size() == 81);
  CHECK(expect.dev.size() == 10);
  // The first train dialogue is corpus dialogue expect.train[0].
  CHECK(read_corpus(s("a/train.txt"))[0][0][0] == "d" + std::to_string(expect.train[0]) + "a");

  // Vocabulary from the training split only.
  const Vocabulary v = Vocabulary::load(s("a/vocab.txt"));
  const auto dev = read_corpus(s("a/dev.txt"));
  CHECK(!v.contains(dev[0][0][0]));
  CHECK(v.contains("x"));

  REQUIRE(arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("b"), "--seed", "3"}).code == 0);
  for (const char* f : {"train.txt", "dev.txt", "test.txt", "vocab.txt"}) {
    CHECK(read_file(s(std::string("a/") + f)) == read_file(s(std::string("b/") + f)));
  }
  REQUIRE(arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("c"), "--train-ratio",
                    "1", "--dev-ratio", "0", "--test-ratio", "0"})
              .code == 0);
  CHECK(read_corpus(s("c/train.txt")).size() == 101);
  CHECK(read_file(s("c/dev.txt")).empty());

  const auto manifest = read_json(s("a/manifest.json"));
  CHECK(manifest["subcommand"] == "prepare");
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["outputs"].size() == 4);
}

TEST_CASE("malformed corpus reports the line number and exit code 2") {
  Scratch s;
  write_file_atomic(s("bad.txt"), "a b | c\nd | | e\n");
  const Run r = arnn_cmd({"prepare", "--corpus", s("bad.txt"), "--out-dir", s("p")});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(arnn_cmd({}).code == cli::kUsage);
  CHECK(arnn_cmd({"train", "--bogus", "1"}).code == cli::kUsage);
  CHECK(arnn_cmd({"--help"}).code == cli::kOk);
  Scratch s;
  write_numbered_corpus(s("c.txt"), 20);
  REQUIRE(arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("p")}).code == 0);
  CHECK(arnn_cmd({"train", "--model", "lstm", "--train", s("p/train.txt"), "--dev",
                  s("p/dev.txt"), "--vocab", s("p/vocab.txt"), "--out", s("m")})
            .code == cli::kUsage);
  // A config key that no option matches.
  write_file_atomic(s("x.cfg"), "[synth]\nwidth=3\n");
  CHECK(arnn_cmd({"--config", s("x.cfg"), "synth", "--out", s("o.txt")}).code == cli::kUsage);
  CHECK(arnn_cmd({"eval", "--checkpoint", s("none"), "--vocab", s("p/vocab.txt"), "--data",
                  s("p/dev.txt"), "--out", s("r.json")})
            .code == cli::kData);
}

TEST_CASE("config file values apply unless overridden on the command line") {
  Scratch s;
  write_file_atomic(s("run.cfg"), "[synth]\ntask = grammar\ndialogues = 7\n");
  REQUIRE(arnn_cmd({"--config", s("run.cfg"), "synth", "--out", s("a.txt")}).code == 0);
  CHECK(read_corpus(s("a.txt")).size() == 7);
  REQUIRE(arnn_cmd({"--config", s("run.cfg"), "synth", "--dialogues", "3", "--out", s("b.txt")})
              .code == 0);
  CHECK(read_corpus(s("b.txt")).size() == 3);
  const auto m = read_json(s("b.txt.manifest.json"));
  CHECK(m["config"]["task"] == "grammar");
  CHECK(m["config"]["dialogues"] == "3");
}

TEST_CASE("eval on a zero-weight checkpoint gives PPL = V") {
  Scratch s;
  write_numbered_corpus(s("c.txt"), 30);
  REQUIRE(arnn_cmd({"prepare", "--corpus", s("c.txt"), "--out-dir", s("p")}).code == 0);
  const Vocabulary v = Vocabulary::load(s("p/vocab.txt"));
  for (ModelKind kind : {ModelKind::kRnnLm, ModelKind::kAttnRnnLm, ModelKind::kAttnSeq2Seq}) {
    Model m(kind, {4, 3, v.size(), 0});
    m.set_vocab_hash(v.hash());
    save_checkpoint(m, s("u.ckpt"));
    const Run r = arnn_cmd({"eval", "--checkpoint", s("u.ckpt"), "--vocab", s("p/vocab.txt"),
                            "--data", s("p/dev.txt"), "--out", s("r.json")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = read_json(s("r.json"));
    CHECK(j["metrics"]["ppl"].get<double>() ==
          doctest::Approx(static_cast<double>(v.size())).epsilon(1e-9));
    CHECK(j["metrics"]["ppl@L"].get<double>() ==
          doctest::Approx(static_cast<double>(v.size())).epsilon(1e-9));
  }
}

TEST_CASE("vocabulary hash mismatch refuses to run") {
  Pipeline p;
  write_numbered_corpus(p.s("other.txt"), 30);
  REQUIRE(arnn_cmd({"prepare", "--corpus", p.s("other.txt"), "--out-dir", p.s("q")}).code == 0);
  const Run r = arnn_cmd({"eval", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("q/vocab.txt"),
                          "--data", p.s("q/dev.txt"), "--out", p.s("r.json")});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("refusing") != std::string::npos);
  CHECK(!fs::exists(p.s("r.json")));

  REQUIRE(arnn_cmd({"lda", "--vocab", p.s("q/vocab.txt"), "--data", p.s("q/train.txt"),
                    "--topics-k", "2", "--sweeps", "5", "--out", p.s("q.lda")})
              .code == 0);
  REQUIRE(arnn_cmd({"generate", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                    "--data", p.s("p/dev.txt"), "--beam-width", "2", "--n-best", "2",
                    "--max-len", "5", "--out", p.s("g.tsv")})
              .code == 0);
  CHECK(arnn_cmd({"rerank", "--candidates", p.s("g.tsv"), "--data", p.s("p/dev.txt"), "--vocab",
                  p.s("p/vocab.txt"), "--topic-model", p.s("q.lda"), "--out", p.s("rr.tsv")})
            .code == cli::kData);
}

TEST_CASE("generate then rerank with lambda 0 keeps the generation order") {
  Pipeline p;
  REQUIRE(arnn_cmd({"generate", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                    "--data", p.s("p/dev.txt"), "--beam-width", "5", "--n-best", "5",
                    "--max-len", "8", "--out", p.s("g.tsv")})
              .code == 0);
  REQUIRE(arnn_cmd({"lda", "--vocab", p.s("p/vocab.txt"), "--data", p.s("p/train.txt"),
                    "--topics-k", "3", "--sweeps", "10", "--out", p.s("k3.lda")})
              .code == 0);
  const Vocabulary v = Vocabulary::load(p.s("p/vocab.txt"));
  auto top1 = [&](const std::string& path) {
    std::map<size_t, std::vector<TokenId>> best;
    for (const auto& r : parse_candidates(v, read_file(path))) {
      if (r.rank == 1) best[r.history] = r.tokens;
    }
    return best;
  };
  for (const char* lambda : {"0", "1"}) {
    const Run r = arnn_cmd({"rerank", "--candidates", p.s("g.tsv"), "--data", p.s("p/dev.txt"),
                            "--vocab", p.s("p/vocab.txt"), "--topic-model", p.s("k3.lda"),
                            "--lambda", lambda, "--out", p.s("rr.tsv")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    if (std::string(lambda) == "0") {
      CHECK(top1(p.s("rr.tsv")) == top1(p.s("g.tsv")));
      CHECK(parse_candidates(v, read_file(p.s("rr.tsv"))).size() ==
            parse_candidates(v, read_file(p.s("g.tsv"))).size());
    }
  }
  const Run t = arnn_cmd({"tune", "--candidates", p.s("g.tsv"), "--data", p.s("p/dev.txt"),
                          "--vocab", p.s("p/vocab.txt"), "--topic-model", p.s("k3.lda"),
                          "--lambdas", "0", "0.5", "1", "--out", p.s("tune.tsv")});
  REQUIRE_MESSAGE(t.code == 0, t.err);
  CHECK(read_file(p.s("tune.tsv")).substr(0, 7) == "3\t0.00\t");
  const auto m = read_json(p.s("tune.tsv.manifest.json"));
  CHECK(m["config"]["lambdas"].size() == 3);
}

TEST_CASE("attviz exports matching trace and heatmap") {
  Pipeline p;
  const Run r = arnn_cmd({"attviz", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                          "--data", p.s("p/dev.txt"), "--response", "", "--max-len", "1",
                          "--cell", "2", "--out", p.s("viz")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = read_json(p.s("viz.json"));
  // max_len 1 yields exactly one generated token.
  REQUIRE(j["rows"].size() == 1);
  double sum = 0.0;
  for (double a : j["rows"][0]) sum += a;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  const std::string pgm = read_file(p.s("viz.pgm"));
  CHECK(pgm.substr(0, 3) == "P2\n");
  std::istringstream in(pgm);
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.rfind("# alpha ", 0) != 0) continue;
    std::istringstream f(line.substr(8));
    size_t row;
    std::string label;
    f >> row >> label;
    std::vector<double> vals;
    for (double x; f >> x;) vals.push_back(x);
    CHECK(vals == j["rows"][row].get<std::vector<double>>());
    ++rows;
  }
  CHECK(rows == 1);

  // Width: columns x cell; height: rows x cell; darkest pixel is 0.
  const size_t cols = j["columns"].size();
  CHECK(pgm.find("\n" + std::to_string(cols * 2) + " 2\n255\n") != std::string::npos);
  CHECK((pgm.find(" 0 ") != std::string::npos || pgm.find("\n0 ") != std::string::npos ||
         pgm.find(" 0\n") != std::string::npos));

  // A given response is traced as is.
  REQUIRE(arnn_cmd({"attviz", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                    "--data", p.s("p/dev.txt"), "--response", "recall key1", "--out",
                    p.s("viz2")})
              .code == 0);
  const auto j2 = read_json(p.s("viz2.json"));
  CHECK(j2["generated"] == nlohmann::json({"recall", "key1", "</u>"}));
}

TEST_CASE("attviz rejects a model without attention") {
  Pipeline p("rnn");
  const Run r = arnn_cmd({"attviz", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                          "--data", p.s("p/dev.txt"), "--out", p.s("viz")});
  CHECK(r.code == cli::kData);
  CHECK(!fs::exists(p.s("viz.pgm")));
}

TEST_CASE("end-to-end run replays from its manifest") {
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p;
  const Run e = arnn_cmd({"eval", "--checkpoint", p.s("m.ckpt"), "--vocab", p.s("p/vocab.txt"),
                          "--data", p.s("p/test.txt"), "--recall-sets", "20", "--out",
                          p.s("r.json")});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto report = read_json(p.s("r.json"));
  CHECK(report["metrics"].contains("recall@1"));
  CHECK(report["counts"]["recall_sets"] == 20);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::minutes(5));

  const auto m = read_json(p.s("m.ckpt.manifest.json"));
  CHECK(m["outputs"][1] == p.s("m.ckpt.log"));
  CHECK(!read_file(p.s("m.ckpt.log")).empty());
  std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
  argv.erase(argv.begin());
  for (size_t i = 0; i + 1 < argv.size(); ++i) {
    if (argv[i] == "--out") argv[i + 1] = p.s("replay.ckpt");
  }
  REQUIRE(arnn_cmd(argv).code == 0);
  CHECK(read_file(p.s("replay.ckpt")) == read_file(p.s("m.ckpt")));
}
