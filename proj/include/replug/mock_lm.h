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
#include <vector>

#include "replug/json_io.h"
#include "replug/lm.h"

namespace replug {

// While `marker` appears anywhere in the conditioning context, every token in
// `boosted` has its conditional probability multiplied by the boost factor
// before renormalization.
struct TopicRule {
  TokenId marker = 0;
  std::vector<TokenId> boosted;
};

struct MockLmConfig {
  std::size_t vocab_size = 0;
  // Training text for the bigram table.
  std::vector<TokenSeq> corpus;
  std::vector<TopicRule> rules;
  double boost = 4.0;
  std::size_t context_window = 4096;
};

// Deterministic test LM: an add-one-smoothed bigram model plus topic-key
// rules. With no previous token (empty context) the base distribution is
// uniform. The conditional at every position depends only on the tokens
// before it, so teacher-forced scores are additive across splits.
class MockLm final : public LanguageModel {
 public:
  explicit MockLm(MockLmConfig config);

  // {"boost", "context_window", "corpus": [text], "rules": [{"marker", "boosted": [word]}]}
  static MockLm from_json(const Json& spec, const Tokenizer& tokenizer);
  static Json to_json(const MockLmConfig& config, const Tokenizer& tokenizer);

  std::size_t vocab_size() const override { return config_.vocab_size; }
  std::size_t context_window() const override { return config_.context_window; }

  ContinuationScore score_continuation(const Prompt& prompt,
                                       std::span<const TokenId> continuation) const override;
  NextTokenDistribution next_token_distribution(const Prompt& prompt) const override;

  // Smoothed bigram probability P(next | prev), before topic boosts.
  double bigram(TokenId prev, TokenId next) const;
  const MockLmConfig& config() const { return config_; }

 private:
  class State;

  void check_tokens(std::span<const TokenId> tokens) const;

  MockLmConfig config_;
  std::vector<double> bigram_;  // vocab x vocab, row = previous token
  // marker token -> indices into config_.rules
  std::vector<std::vector<std::size_t>> rules_by_marker_;
};

}  // namespace replug
