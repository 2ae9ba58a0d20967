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
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "replug/lm.h"
#include "replug/tokenizer.h"

namespace replug {

// The first `count` requests are answered with `status` and an error body.
struct FailureInjection {
  int count = 0;
  int status = 503;
};

// Loopback HTTP server running on a background thread. Binds 127.0.0.1 on
// an ephemeral port unless one is given.
class StubServer {
 public:
  virtual ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const { return port_; }
  std::string url(const std::string& path) const;
  int requests() const { return requests_.load(); }
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

 protected:
  StubServer();
  void start(int port);
  // Returns true if this request was consumed by failure injection.
  bool inject_failure(void* response);

  struct Impl;
  std::unique_ptr<Impl> impl_;
  FailureInjection failures_;
  std::atomic<int> requests_{0};
  int port_ = 0;
};

// POST /embed. Each text maps to a fixed vector derived from its hash.
class EmbedStub final : public StubServer {
 public:
  explicit EmbedStub(std::size_t dim, FailureInjection failures = {}, int port = 0,
                     std::optional<std::size_t> declared_dim = std::nullopt);
  ~EmbedStub() override { stop(); }

  static std::vector<double> fixed_vector(const std::string& text, std::size_t dim);

 private:
  std::size_t dim_;
  std::size_t declared_dim_;
};

struct LmStubOptions {
  FailureInjection failures;
  // Reply without "logprobs"/"probs" to exercise capability errors.
  bool omit_results = false;
  // Echo these logprobs for every score request instead of consulting the LM.
  std::optional<std::vector<double>> fixed_logprobs;
  // When non-empty, require "Authorization: Bearer <token>".
  std::string required_token;
  int port = 0;
};

// POST /v1/lm. Serves any LanguageModel over the HTTP LM wire format.
class LmStub final : public StubServer {
 public:
  LmStub(const LanguageModel& lm, const Tokenizer& tokenizer, LmStubOptions options = {});
  ~LmStub() override { stop(); }

 private:
  const LanguageModel& lm_;
  const Tokenizer& tokenizer_;
  LmStubOptions options_;
};

}  // namespace replug
