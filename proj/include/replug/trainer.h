// Copyright 2026 The RePlug Engine Authors.
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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "replug/corpus.h"
#include "replug/encoder.h"
#include "replug/ensemble.h"
#include "replug/json_io.h"
#include "replug/lm.h"
#include "replug/lsr.h"
#include "replug/task_pool.h"
#include "replug/vector_index.h"

namespace replug {

struct TrainingConfig {
  double gamma = 0.1;
  double beta = 0.1;
  std::size_t k_train = 20;
  double learning_rate = 2e-5;
  std::size_t batch_size = 64;
  double warmup_ratio = 0.1;
  std::size_t refresh_interval = 3000;
  std::size_t total_steps = 25000;
  std::uint64_t seed = 0;

  // Throws kConfiguration on out-of-range fields.
  void validate() const;

  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainingConfig from_json(const Json& j);
  Json to_json() const;
};

std::size_t warmup_steps(const TrainingConfig& config);
// Rate for the update with 0-based index `step`: linear warmup, then constant.
double learning_rate_at(const TrainingConfig& config, std::size_t step);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// An example with its candidate documents and the LM target Q, which stays
// constant while the encoder changes.
struct PreparedExample {
  TokenSeq query;
  std::vector<const DocumentChunk*> docs;
  std::vector<double> lm_probs;
};

// Retrieves k_train candidates from `snapshot` with the current encoder and
// scores the continuation under each of them.
std::vector<PreparedExample> prepare_targets(const EncoderParams& params,
                                             std::span<const TrainingExample> batch,
                                             const IndexSnapshot& snapshot,
                                             const CorpusStore& corpus, const LanguageModel& lm,
                                             const TrainingConfig& config,
                                             TaskPool* pool = nullptr);

struct BatchGradient {
  double loss = 0.0;  // mean KL over the batch
  std::vector<double> grad;  // same layout as EncoderParams::table()
  std::vector<LikelihoodPair> pairs;
};

BatchGradient batch_loss_and_gradient(const EncoderParams& params,
                                      std::span<const PreparedExample> batch, double gamma);
double batch_loss(const EncoderParams& params, std::span<const PreparedExample> batch,
                  double gamma);

// One Adam update on `params`; returns the batch loss before the update.
// `step` is the 0-based update index used for the warmup schedule.
double train_step(EncoderParams& params, AdamState& adam,
                  std::span<const TrainingExample> batch, const IndexSnapshot& snapshot,
                  const CorpusStore& corpus, const LanguageModel& lm,
                  const TrainingConfig& config, std::size_t step, TaskPool* pool = nullptr);

struct TrainingLoopOptions {
  IndexMode index_mode = IndexMode::kExact;
  ApproximateOptions approximate;
  // Directory for per-refresh and final checkpoints; empty disables them.
  std::string checkpoint_dir;
  // Receives every metrics record in step order.
  std::function<void(const Json&)> metrics_sink;
  // Retrieval quality for refresh records.
  std::function<Json(const EncoderParams&, const IndexSnapshot&)> probe;
  TaskPool* pool = nullptr;
};

struct TrainingResult {
  EncoderParams params;
  std::vector<Json> metrics;
  std::vector<std::size_t> refresh_steps;
  std::uint64_t final_generation = 0;
  std::string last_checkpoint;
};

// Trains for config.total_steps steps. A refresh launched after step s is
// adopted before step s + 2; training in between uses the older snapshot.
TrainingResult training_loop(const TrainingConfig& config, const CorpusStore& corpus,
                             std::span<const TrainingExample> examples, const LanguageModel& lm,
                             EncoderParams initial, const TrainingLoopOptions& options = {});

}  // namespace replug
