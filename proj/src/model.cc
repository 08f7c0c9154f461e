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

#include "arnn/model.h"

#include <cmath>
#include <random>

#include "arnn/io.h"
#include "model_internal.h"

namespace arnn {

namespace {

constexpr std::string_view kCheckpointMagic = "ARNNCKPT";
constexpr uint32_t kCheckpointVersion = 1;

constexpr std::array<std::string_view, static_cast<size_t>(Slot::kCount)> kSlotNames = {
    "H", "P", "E", "O", "W", "U", "b", "O_h", "O_z", "O_theta", "enc.H", "enc.P", "enc.E"};

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kRnnLm: return "rnn";
    case ModelKind::kAttnRnnLm: return "arnn";
    case ModelKind::kTopicAttnRnnLm: return "tarnn";
    case ModelKind::kSeq2Seq: return "seq2seq";
    case ModelKind::kAttnSeq2Seq: return "attn-seq2seq";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (uint32_t k = 0; k <= static_cast<uint32_t>(ModelKind::kAttnSeq2Seq); ++k) {
    if (to_string(static_cast<ModelKind>(k)) == name) return static_cast<ModelKind>(k);
  }
  throw UsageError("unknown model kind: " + std::string(name) +
                   " (expected rnn, arnn, tarnn, seq2seq or attn-seq2seq)");
}

bool has_attention(ModelKind kind) {
  return kind == ModelKind::kAttnRnnLm || kind == ModelKind::kTopicAttnRnnLm ||
         kind == ModelKind::kAttnSeq2Seq;
}

bool is_seq2seq(ModelKind kind) {
  return kind == ModelKind::kSeq2Seq || kind == ModelKind::kAttnSeq2Seq;
}

bool uses_topics(ModelKind kind) { return kind == ModelKind::kTopicAttnRnnLm; }

std::string_view slot_name(Slot slot) { return kSlotNames[static_cast<size_t>(slot)]; }

Model::Model(ModelKind kind, ModelDims dims) : kind_(kind), dims_(dims) {
  if (dims.hidden == 0 || dims.embed == 0 || dims.vocab == 0) {
    throw ShapeError("model dimensions must be positive");
  }
  if (uses_topics(kind) && dims.topics == 0) {
    throw ShapeError("topic-feature model needs a positive topic count");
  }
  if (!uses_topics(kind)) dims_.topics = 0;
  index_.fill(-1);
  const size_t d = dims.hidden, de = dims.embed, v = dims.vocab;
  auto add = [&](Slot s, size_t rows, size_t cols) {
    index_[static_cast<size_t>(s)] =
        static_cast<int>(params_.add(std::string(slot_name(s)), rows, cols));
  };
  if (is_seq2seq(kind)) {
    add(Slot::kEncH, d, d);
    add(Slot::kEncP, d, de);
    add(Slot::kEncE, de, v);
  }
  add(Slot::kH, d, d);
  add(Slot::kP, d, de);
  add(Slot::kE, de, v);
  add(Slot::kO, d, v);
  if (has_attention(kind)) {
    const size_t dr = rep_size();
    add(Slot::kW, d, d);
    add(Slot::kU, d, dr);
    add(Slot::kB, d, 1);
    add(Slot::kOh, d, d);
    add(Slot::kOz, d, dr);
  }
  if (uses_topics(kind)) add(Slot::kOtheta, d, dims.topics);
}

Model Model::random(ModelKind kind, ModelDims dims, uint64_t seed, double scale) {
  Model m(kind, dims);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& e : m.params_.entries()) {
    for (double& v : e.value.data()) v = u(rng);
  }
  return m;
}

size_t Model::rep_size() const {
  return is_seq2seq(kind_) ? dims_.hidden : dims_.embed + dims_.hidden;
}

size_t Model::index(Slot slot) const {
  const int i = index_[static_cast<size_t>(slot)];
  if (i < 0) {
    throw ShapeError("model kind " + std::string(to_string(kind_)) + " has no parameter " +
                     std::string(slot_name(slot)));
  }
  return static_cast<size_t>(i);
}

Matrix& Model::param(Slot slot) { return params_[index(slot)]; }
const Matrix& Model::param(Slot slot) const { return params_[index(slot)]; }

std::string serialize_checkpoint(const Model& model) {
  std::string out(kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(model.kind()));
  put_u64(out, model.dims().hidden);
  put_u64(out, model.dims().embed);
  put_u64(out, model.dims().vocab);
  put_u64(out, model.dims().topics);
  put_u64(out, model.vocab_hash());
  const ParamSet& ps = model.params();
  put_u32(out, static_cast<uint32_t>(ps.count()));
  for (const auto& e : ps.entries()) {
    put_u32(out, static_cast<uint32_t>(e.name.size()));
    out += e.name;
    put_u64(out, e.value.rows());
    put_u64(out, e.value.cols());
    for (double v : e.value.data()) put_f64(out, v);
  }
  return out;
}

Model parse_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.take(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t kind = in.u32();
  if (kind > static_cast<uint32_t>(ModelKind::kAttnSeq2Seq)) {
    throw DataError("unknown model kind in checkpoint");
  }
  ModelDims dims;
  dims.hidden = in.u64();
  dims.embed = in.u64();
  dims.vocab = in.u64();
  dims.topics = in.u64();
  const uint64_t vocab_hash = in.u64();
  Model model(static_cast<ModelKind>(kind), dims);
  model.set_vocab_hash(vocab_hash);
  ParamSet& ps = model.params();
  const uint32_t count = in.u32();
  if (count != ps.count()) throw DataError("checkpoint array count does not match model kind");
  for (auto& e : ps.entries()) {
    const uint32_t name_len = in.u32();
    const std::string_view name = in.take(name_len);
    const uint64_t rows = in.u64();
    const uint64_t cols = in.u64();
    if (name != e.name || rows != e.value.rows() || cols != e.value.cols()) {
      throw DataError("checkpoint array '" + std::string(name) + "' does not match layout");
    }
    for (double& v : e.value.data()) v = in.f64();
  }
  if (!in.done()) throw DataError("trailing bytes in checkpoint");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Example make_example(ModelKind kind, const Dialogue& d, Vector theta) {
  if (d.utterances.empty()) throw DataError("empty dialogue");
  Example ex;
  ex.theta = std::move(theta);
  const auto& last = d.utterances.back().tokens;
  if (is_seq2seq(kind)) {
    if (d.utterances.size() < 2) {
      throw DataError("seq2seq examples need at least two utterances");
    }
    ex.source = response_prefix(history_of(d));
    ex.target = last;
    ex.target.push_back(kEndOfUtterance);
    ex.last_begin = 0;
    ex.last_end = ex.target.size();
  } else {
    ex.target = flatten(d);
    // ... <spk> last... </u> </d>
    ex.last_end = ex.target.size() - 1;
    ex.last_begin = ex.last_end - last.size() - 1;
  }
  return ex;
}

Example make_continuation_example(ModelKind kind, const Dialogue& history,
                                  const std::vector<TokenId>& continuation, Vector theta) {
  if (continuation.empty()) throw DataError("empty continuation");
  Example ex;
  ex.theta = std::move(theta);
  if (is_seq2seq(kind)) {
    ex.source = response_prefix(history);
    ex.target = continuation;
    ex.last_begin = 0;
  } else {
    ex.target = response_prefix(history);
    ex.last_begin = ex.target.size();
    ex.target.insert(ex.target.end(), continuation.begin(), continuation.end());
  }
  ex.last_end = ex.target.size();
  return ex;
}

Vector rnn_step(const Model& model, std::span<const double> h_prev, TokenId w_prev) {
  if (w_prev >= model.dims().vocab) {
    throw DataError("token id " + std::to_string(w_prev) + " out of range");
  }
  const Vector e = model.param(Slot::kE).column(w_prev);
  return affine_tanh(model.param(Slot::kH), h_prev, model.param(Slot::kP), e);
}

Vector lm_next_dist(const Model& model, std::span<const double> h) {
  const Matrix& o = model.param(Slot::kO);
  if (h.size() != o.rows()) throw ShapeError("lm_next_dist: state size mismatch");
  Vector logits(o.cols(), 0.0);
  matvec_transpose_add(o, h, logits);
  return softmax(logits);
}

AttentionResult attend(const Model& model, std::span<const double> h_prev,
                       const std::vector<Vector>& reps) {
  if (reps.empty()) throw DataError("attend: empty history");
  const size_t d = model.dims().hidden, dr = model.rep_size();
  if (h_prev.size() != d) throw ShapeError("attend: state size mismatch");
  const Matrix& w = model.param(Slot::kW);
  const Matrix& u = model.param(Slot::kU);
  const Matrix& b = model.param(Slot::kB);
  Vector q(d);
  matvec(w, h_prev, q);
  Vector beta(reps.size());
  Vector pre(d);
  for (size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].size() != dr) throw ShapeError("attend: representation size mismatch");
    pre = q;
    matvec_add(u, reps[i], pre);
    double s = 0.0;
    for (size_t k = 0; k < d; ++k) s += b(k, 0) * std::tanh(pre[k]);
    beta[i] = s;
  }
  AttentionResult out;
  out.alpha = softmax(beta);
  out.z.assign(dr, 0.0);
  for (size_t i = 0; i < reps.size(); ++i) axpy(out.alpha[i], reps[i], out.z);
  return out;
}

Vector arnn_next_dist(const Model& model, std::span<const double> h,
                      std::span<const double> z) {
  const size_t d = model.dims().hidden;
  if (h.size() != d || z.size() != model.rep_size()) {
    throw ShapeError("arnn_next_dist: shape mismatch");
  }
  Vector x(d);
  matvec(model.param(Slot::kOh), h, x);
  matvec_add(model.param(Slot::kOz), z, x);
  return lm_next_dist(model, x);
}

void check_theta(const Model& model, std::span<const double> theta) {
  if (theta.size() != model.dims().topics) {
    throw ShapeError("topic proportions have length " + std::to_string(theta.size()) +
                     ", model expects " + std::to_string(model.dims().topics));
  }
  double sum = 0.0;
  for (double v : theta) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DataError("topic proportions must be non-negative and finite");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DataError("topic proportions do not sum to 1");
}

Vector tarnn_next_dist(const Model& model, std::span<const double> h,
                       std::span<const double> z, std::span<const double> theta) {
  check_theta(model, theta);
  const size_t d = model.dims().hidden;
  if (h.size() != d || z.size() != model.rep_size()) {
    throw ShapeError("tarnn_next_dist: shape mismatch");
  }
  Vector x(d);
  matvec(model.param(Slot::kOh), h, x);
  matvec_add(model.param(Slot::kOz), z, x);
  matvec_add(model.param(Slot::kOtheta), theta, x);
  return lm_next_dist(model, x);
}

TokenScores score_example(const Model& model, const Example& example,
                          const ScoreOptions& options) {
  if (is_seq2seq(model.kind())) {
    return internal::Seq2SeqForward(model, example.source, example.target).scores(options);
  }
  return internal::LmForward(model, example.target, example.theta).scores(options);
}

SequenceLikelihood sequence_log_likelihood(const Model& model, const Example& example) {
  SequenceLikelihood out;
  out.per_token = score_example(model, example).log_probs;
  for (double v : out.per_token) out.total += v;
  return out;
}

std::vector<double> seq2seq_forward(const Model& model, const std::vector<TokenId>& source,
                                    const std::vector<TokenId>& target) {
  if (!is_seq2seq(model.kind())) throw UsageError("seq2seq_forward needs a seq2seq model");
  return internal::Seq2SeqForward(model, source, target).scores({}).log_probs;
}

double loss_and_gradient(const Model& model, const Example& example, ParamSet& grads) {
  if (!grads.same_shape(model.params())) {
    throw ShapeError("gradient buffers do not match the model layout");
  }
  if (is_seq2seq(model.kind())) {
    internal::Seq2SeqForward fwd(model, example.source, example.target);
    fwd.backward(grads);
    return fwd.loss();
  }
  internal::LmForward fwd(model, example.target, example.theta);
  fwd.backward(grads);
  return fwd.loss();
}

}  // namespace arnn
