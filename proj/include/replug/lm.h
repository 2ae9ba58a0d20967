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
#include <span>
#include <string>
#include <vector>

#include "replug/tokenizer.h"

namespace replug {

// Token sequence handed to the LM: a retrieved document followed by the
// input context (d ∘ x), or the bare context.
struct Prompt {
  TokenSeq tokens;

  // Concatenates `document` and `context`, dropping tokens from the left edge
  // of the document until the prompt plus `reserve` further tokens fits in
  // `window`. The context is never truncated; throws kWindow when
  // |context| + reserve > window.
  static Prompt with_document(std::span<const TokenId> document,
                              std::span<const TokenId> context, std::size_t reserve,
                              std::size_t window);
  static Prompt bare(std::span<const TokenId> context) {
    return Prompt{{context.begin(), context.end()}};
  }
};

// Entries are >= 0 and sum to 1 within 1e-6.
struct NextTokenDistribution {
  std::vector<double> probs;
};

// Teacher-forced log-probability of a continuation, natural log.
struct ContinuationScore {
  double total_logprob = 0.0;
  std::size_t token_count = 0;
  std::vector<double> per_token_logprobs;
};

// The black-box boundary. Implementations are stateless from the caller's
// point of view and safe to call concurrently.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context_window() const = 0;

  virtual ContinuationScore score_continuation(const Prompt& prompt,
                                               std::span<const TokenId> continuation) const = 0;
  virtual NextTokenDistribution next_token_distribution(const Prompt& prompt) const = 0;
};

// Throws kWindow if `used` tokens do not fit.
void check_window(std::size_t used, std::size_t window);

ContinuationScore make_score(std::vector<double> per_token_logprobs);

}  // namespace replug
