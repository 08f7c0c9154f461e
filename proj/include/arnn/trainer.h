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
#include <iosfwd>
#include <string>
#include <vector>

#include "arnn/model.h"

namespace arnn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moments with bias correction.
class AdamState {
 public:
  AdamState(const ParamSet& params, AdamConfig config);

  // p -= lr * m_hat / (sqrt(v_hat) + eps). Throws NumericalError on a
  // non-finite gradient (parameters are left untouched).
  void update(ParamSet& params, const ParamSet& grads);

  size_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const ParamSet& first_moment() const { return m_; }
  const ParamSet& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  ParamSet m_;
  ParamSet v_;
  size_t step_ = 0;
};

inline void adam_update(AdamState& state, ParamSet& params, const ParamSet& grads) {
  state.update(params, grads);
}

struct TrainConfig {
  size_t hidden = 300;  // d, tuned over {200, 300, 400, 500}
  size_t embed = 300;   // d_e
  AdamConfig adam;
  size_t max_epochs = 50;
  size_t patience = 5;      // dev evaluations without improvement before stopping
  double clip = 5.0;        // global gradient norm; <= 0 disables clipping
  uint64_t seed = 1;
  size_t eval_interval = 0;  // sequences between dev evaluations; 0 = every epoch
  double init_scale = 0.08;
};

struct TrainLogEntry {
  size_t epoch = 0;
  size_t seen = 0;
  double train_loss = 0.0;  // mean per-sequence summed negative log-likelihood
  double dev_ppl = 0.0;
  bool best = false;
};

// "epoch,seen,train_loss,dev_ppl,best"
std::string format_log_line(const TrainLogEntry& entry);

struct TrainResult {
  Model model;  // parameters at the best dev evaluation
  std::vector<TrainLogEntry> log;
  double best_dev_ppl = 0.0;
  size_t epochs_run = 0;
  bool early_stopped = false;
};

// Maximum-likelihood training with per-sequence Adam updates, sequences
// shuffled every epoch under the seed. Stops after `patience` dev
// evaluations without improvement and returns the best-dev parameters.
// When `log` is set, one line per dev evaluation is appended to it.
TrainResult train(ModelKind kind, const ModelDims& dims, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const TrainConfig& config,
                  std::ostream* log = nullptr);

// Same loop starting from existing parameters with a fresh optimizer state.
TrainResult continue_training(Model model, const std::vector<Example>& train_set,
                              const std::vector<Example>& dev_set, const TrainConfig& config,
                              std::ostream* log = nullptr);

struct PretrainData {
  std::vector<Example> train;
  std::vector<Example> dev;
};

// Trains on the pretraining corpus, then continues on the target corpus with
// a fresh Adam state. An empty pretraining corpus reduces to plain `train`.
// Both configs must agree on the model dimensions.
TrainResult pretrain_finetune(ModelKind kind, const ModelDims& dims, const PretrainData& pretrain,
                              const std::vector<Example>& train_set,
                              const std::vector<Example>& dev_set,
                              const TrainConfig& pretrain_config,
                              const TrainConfig& finetune_config, std::ostream* log = nullptr,
                              Model* pretrained = nullptr);

}  // namespace arnn
