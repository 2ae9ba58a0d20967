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

#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "replug/encoder.h"
#include "replug/http.h"
#include "replug/json_io.h"
#include "replug/lm.h"

namespace replug {

struct HttpLmOptions {
  Endpoint endpoint;
  std::string auth_token;
  RetryPolicy retry;
  double requests_per_second = 0.0;
  std::size_t context_window = 4096;

  // Reads REPLUG_LM_ENDPOINT (required) and REPLUG_LM_TOKEN (optional).
  static HttpLmOptions from_env();
};

// LM served over HTTP. Wire format:
//   request  {"prompt": str, "continuation": str|null, "want": "score"|"dist"}
//   response {"logprobs": [num]} or {"probs": [num]}
// Prompts travel as text; the service must share the tokenizer's vocabulary
// for "dist" responses.
class HttpLm final : public LanguageModel {
 public:
  HttpLm(HttpLmOptions options, const Tokenizer& tokenizer);

  std::size_t vocab_size() const override { return tokenizer_.vocab_size(); }
  std::size_t context_window() const override { return options_.context_window; }

  ContinuationScore score_continuation(const Prompt& prompt,
                                       std::span<const TokenId> continuation) const override;
  NextTokenDistribution next_token_distribution(const Prompt& prompt) const override;

  // Retries spent across all calls so far.
  int total_retries() const { return retries_.load(); }

 private:
  Json call(const Json& request) const;

  HttpLmOptions options_;
  const Tokenizer& tokenizer_;
  mutable RateLimiter limiter_;
  mutable std::atomic<int> retries_{0};
};

struct RemoteEmbeddings {
  std::vector<Embedding> embeddings;
  int retry_count = 0;
};

// Embedding service client. Wire format:
//   request {"texts": [str]}  response {"dim": int, "embeddings": [[num]]}
// Throws kContract when the response dimension disagrees with `expected_dim`
// (if given) or with its own declared "dim", or the batch size differs.
RemoteEmbeddings embed_remote(const Endpoint& endpoint, std::span<const std::string> texts,
                              const RetryPolicy& policy,
                              std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace replug
