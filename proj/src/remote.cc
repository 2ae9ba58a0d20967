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

#include "replug/remote.h"

#include <cmath>
#include <cstdlib>

#include "replug/error.h"
#include "replug/hash.h"
#include "replug/log.h"

namespace replug {

HttpLmOptions HttpLmOptions::from_env() {
  HttpLmOptions o;
  const char* endpoint = std::getenv("REPLUG_LM_ENDPOINT");
  if (!endpoint || !*endpoint) {
    throw Error(ErrorKind::kConfiguration, "REPLUG_LM_ENDPOINT is not set");
  }
  o.endpoint = Endpoint::parse(endpoint);
  if (const char* token = std::getenv("REPLUG_LM_TOKEN")) o.auth_token = token;
  return o;
}

HttpLm::HttpLm(HttpLmOptions options, const Tokenizer& tokenizer)
    : options_(std::move(options)),
      tokenizer_(tokenizer),
      limiter_(options_.requests_per_second) {}

Json HttpLm::call(const Json& request) const {
  Headers headers;
  if (!options_.auth_token.empty()) {
    headers.emplace_back("Authorization", "Bearer " + options_.auth_token);
  }
  const std::string prompt = request["prompt"].get<std::string>();
  log().info("lm request want={} prompt_hash={}", request["want"].get<std::string>(),
             hex64(fnv1a64(prompt)));
  const HttpResult res =
      post_json(options_.endpoint, request.dump(), options_.retry, headers, &limiter_);
  retries_ += res.retries;
  try {
    Json body = Json::parse(res.body);
    log().info("lm response status={} prompt_hash={} retries={}", res.status,
               hex64(fnv1a64(prompt)), res.retries);
    return body;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kContract, std::string("LM response is not JSON: ") + e.what());
  }
}

ContinuationScore HttpLm::score_continuation(const Prompt& prompt,
                                             std::span<const TokenId> continuation) const {
  check_window(prompt.tokens.size() + continuation.size(), options_.context_window);
  if (continuation.empty()) return make_score({});
  Json req;
  req["prompt"] = tokenizer_.detokenize(prompt.tokens);
  req["continuation"] = tokenizer_.detokenize(continuation);
  req["want"] = "score";
  const Json body = call(req);
  if (!body.contains("logprobs") || !body["logprobs"].is_array()) {
    throw Error(ErrorKind::kCapability, "LM response lacks per-token 'logprobs'");
  }
  std::vector<double> lp;
  for (const auto& v : body["logprobs"]) {
    if (!v.is_number()) throw Error(ErrorKind::kContract, "non-numeric entry in 'logprobs'");
    lp.push_back(v.get<double>());
  }
  if (lp.size() != continuation.size()) {
    throw Error(ErrorKind::kContract, "LM returned " + std::to_string(lp.size()) +
                                          " logprobs for " + std::to_string(continuation.size()) +
                                          " continuation tokens");
  }
  return make_score(std::move(lp));
}

NextTokenDistribution HttpLm::next_token_distribution(const Prompt& prompt) const {
  check_window(prompt.tokens.size(), options_.context_window);
  Json req;
  req["prompt"] = tokenizer_.detokenize(prompt.tokens);
  req["continuation"] = nullptr;
  req["want"] = "dist";
  const Json body = call(req);
  if (!body.contains("probs") || !body["probs"].is_array()) {
    throw Error(ErrorKind::kCapability, "LM response lacks 'probs'");
  }
  NextTokenDistribution d;
  for (const auto& v : body["probs"]) {
    if (!v.is_number()) throw Error(ErrorKind::kContract, "non-numeric entry in 'probs'");
    d.probs.push_back(v.get<double>());
  }
  if (d.probs.size() != vocab_size()) {
    throw Error(ErrorKind::kContract, "LM returned " + std::to_string(d.probs.size()) +
                                          " probabilities for a vocabulary of " +
                                          std::to_string(vocab_size()));
  }
  return d;
}

RemoteEmbeddings embed_remote(const Endpoint& endpoint, std::span<const std::string> texts,
                              const RetryPolicy& policy, std::optional<std::size_t> expected_dim) {
  if (texts.empty()) throw Error(ErrorKind::kArgument, "embedding batch is empty");
  Json req;
  req["texts"] = Json::array();
  for (const auto& t : texts) req["texts"].push_back(t);
  const HttpResult res = post_json(endpoint, req.dump(), policy);

  RemoteEmbeddings out;
  out.retry_count = res.retries;
  Json body;
  try {
    body = Json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kContract, std::string("embedding response is not JSON: ") + e.what());
  }
  if (!body.contains("dim") || !body.contains("embeddings")) {
    throw Error(ErrorKind::kContract, "embedding response needs 'dim' and 'embeddings'");
  }
  const auto dim = body["dim"].get<std::size_t>();
  if (expected_dim && dim != *expected_dim) {
    throw Error(ErrorKind::kContract, "service dim " + std::to_string(dim) + ", expected " +
                                          std::to_string(*expected_dim));
  }
  const auto& rows = body["embeddings"];
  if (!rows.is_array() || rows.size() != texts.size()) {
    throw Error(ErrorKind::kContract, "embedding count does not match the batch");
  }
  for (const auto& row : rows) {
    Embedding e;
    for (const auto& v : row) e.values.push_back(v.get<double>());
    if (e.dim() != dim) {
      throw Error(ErrorKind::kContract, "embedding of dim " + std::to_string(e.dim()) +
                                            " under declared dim " + std::to_string(dim));
    }
    for (double v : e.values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kContract, "non-finite embedding entry");
    }
    out.embeddings.push_back(std::move(e));
  }
  return out;
}

}  // namespace replug
