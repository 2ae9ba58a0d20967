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

#include <memory>
#include <vector>

#include "replug/ensemble.h"
#include "replug/synthetic.h"
#include "replug/trainer.h"

namespace replug::testing {

// The synthetic topic task wired up the way `make-harness` configures it.
struct HarnessWorld {
  explicit HarnessWorld(std::uint64_t seed, HarnessOptions base = {})
      : harness([&] {
          base.seed = seed;
          return make_harness(base);
        }()),
        training(make_training_examples(harness.train_docs, harness.tokenizer,
                                        harness.example_options())),
        corpus(chunk_corpus(harness.corpus_docs, harness.tokenizer, harness.chunk_options(),
                            training.source_ids)
                   .chunks),
        lm(harness.make_lm()),
        initial(EncoderParams::random(harness.tokenizer.vocab_size(), 32, seed)),
        probes(harness.probe_set()) {
    config.gamma = 0.1;
    config.beta = 0.1;
    config.k_train = 20;
    config.learning_rate = 0.01;
    config.batch_size = 16;
    config.warmup_ratio = 0.1;
    config.refresh_interval = 100;
    config.total_steps = 600;
    config.seed = seed;
  }

  std::shared_ptr<const IndexSnapshot> index(const EncoderParams& params) const {
    return build_index(embed_corpus(params, corpus), IndexMode::kExact);
  }

  double mrr(const EncoderParams& params) const {
    return topic_mrr(params, *index(params), probes, harness.source_topic);
  }

  Harness harness;
  TrainingSet training;
  CorpusStore corpus;
  MockLm lm;
  EncoderParams initial;
  std::vector<TopicQuery> probes;
  TrainingConfig config;
};

}  // namespace replug::testing
