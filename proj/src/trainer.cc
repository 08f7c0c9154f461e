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

#include "arnn/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "arnn/metrics.h"

namespace arnn {

AdamState::AdamState(const ParamSet& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

void AdamState::update(ParamSet& params, const ParamSet& grads) {
  if (!params.same_shape(m_) || !grads.same_shape(m_)) {
    throw ShapeError("adam: parameter/gradient shapes do not match the optimizer state");
  }
  for (const auto& e : grads.entries()) {
    if (!all_finite(e.value.data())) {
      throw NumericalError("adam: non-finite gradient in " + e.name);
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t a = 0; a < params.count(); ++a) {
    auto p = params[a].data();
    auto g = grads[a].data();
    auto m = m_[a].data();
    auto v = v_[a].data();
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= config_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

std::string format_log_line(const TrainLogEntry& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f,%d", e.epoch, e.seen, e.train_loss,
                e.dev_ppl, e.best ? 1 : 0);
  return buf;
}

namespace {

void validate_config(const TrainConfig& c) {
  if (c.hidden == 0 || c.embed == 0) throw UsageError("d and d_e must be positive");
  if (c.adam.learning_rate < 0.0) throw UsageError("learning rate must be non-negative");
  if (c.max_epochs == 0) throw UsageError("max epochs must be positive");
  if (c.patience == 0) throw UsageError("patience must be positive");
}

}  // namespace

TrainResult continue_training(Model model, const std::vector<Example>& train_set,
                              const std::vector<Example>& dev_set, const TrainConfig& config,
                              std::ostream* log) {
  validate_config(config);
  if (train_set.empty()) throw DataError("empty training set");
  if (dev_set.empty()) throw DataError("empty development set");

  AdamState adam(model.params(), config.adam);
  GradientTape tape(model.params());
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainResult result{model, {}, std::numeric_limits<double>::infinity(), 0, false};
  size_t seen = 0, since_best = 0, window_count = 0;
  double window_loss = 0.0;

  // Returns true when training should stop.
  auto evaluate_dev = [&](size_t epoch) {
    const double ppl = perplexity_of(accumulate(ModelScorer(model), dev_set).all);
    if (!std::isfinite(ppl)) throw NumericalError("non-finite development perplexity");
    TrainLogEntry entry{epoch, seen, window_count ? window_loss / window_count : 0.0, ppl,
                        ppl < result.best_dev_ppl};
    window_loss = 0.0;
    window_count = 0;
    if (entry.best) {
      result.best_dev_ppl = ppl;
      result.model = model;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.log.push_back(entry);
    if (log) *log << format_log_line(entry) << '\n' << std::flush;
    return since_best >= config.patience;
  };

  for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    result.epochs_run = epoch;
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i : order) {
      tape.zero();
      double loss;
      try {
        loss = loss_and_gradient(model, train_set[i], tape.grads());
        if (!tape.finite()) throw NumericalError("non-finite gradient");
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (training sequence " + std::to_string(i) +
                             ", epoch " + std::to_string(epoch) + ")");
      }
      tape.clip_global_norm(config.clip);
      adam.update(model.params(), tape.grads());
      ++seen;
      window_loss += loss;
      ++window_count;
      if (config.eval_interval > 0 && seen % config.eval_interval == 0 && evaluate_dev(epoch)) {
        result.early_stopped = true;
        return result;
      }
    }
    if (config.eval_interval == 0 && evaluate_dev(epoch)) {
      result.early_stopped = true;
      return result;
    }
  }
  return result;
}

TrainResult train(ModelKind kind, const ModelDims& dims, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const TrainConfig& config,
                  std::ostream* log) {
  validate_config(config);
  ModelDims d = dims;
  d.hidden = config.hidden;
  d.embed = config.embed;
  return continue_training(Model::random(kind, d, config.seed, config.init_scale), train_set,
                           dev_set, config, log);
}

TrainResult pretrain_finetune(ModelKind kind, const ModelDims& dims, const PretrainData& pretrain,
                              const std::vector<Example>& train_set,
                              const std::vector<Example>& dev_set,
                              const TrainConfig& pretrain_config,
                              const TrainConfig& finetune_config, std::ostream* log,
                              Model* pretrained) {
  if (pretrain_config.hidden != finetune_config.hidden ||
      pretrain_config.embed != finetune_config.embed) {
    throw ShapeError("pretraining and fine-tuning disagree on model dimensions");
  }
  if (pretrain.train.empty()) {
    return train(kind, dims, train_set, dev_set, finetune_config, log);
  }
  TrainResult phase1 = train(kind, dims, pretrain.train,
                             pretrain.dev.empty() ? dev_set : pretrain.dev, pretrain_config, log);
  if (pretrained) *pretrained = phase1.model;
  return continue_training(std::move(phase1.model), train_set, dev_set, finetune_config, log);
}

}  // namespace arnn
