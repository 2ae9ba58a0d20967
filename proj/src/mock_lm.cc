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

#include "replug/mock_lm.h"

#include <cmath>

#include "replug/error.h"

namespace replug {

// Incremental conditioning state: last token plus the union of tokens boosted
// by markers seen so far.
class MockLm::State {
 public:
  explicit State(const MockLm& lm)
      : lm_(lm), fired_(lm.config_.rules.size(), 0), boosted_mask_(lm.vocab_size(), 0) {}

  void push(TokenId t) {
    prev_ = t;
    has_prev_ = true;
    for (std::size_t r : lm_.rules_by_marker_[t]) {
      if (fired_[r]) continue;
      fired_[r] = 1;
      for (TokenId b : lm_.config_.rules[r].boosted) {
        if (!boosted_mask_[b]) {
          boosted_mask_[b] = 1;
          boosted_.push_back(b);
        }
      }
    }
  }

  double base(TokenId next) const {
    return has_prev_ ? lm_.bigram(prev_, next) : 1.0 / static_cast<double>(lm_.vocab_size());
  }

  double normalizer() const {
    double boosted_mass = 0.0;
    for (TokenId b : boosted_) boosted_mass += base(b);
    return 1.0 + (lm_.config_.boost - 1.0) * boosted_mass;
  }

  double prob(TokenId next) const {
    const double f = boosted_mask_[next] ? lm_.config_.boost : 1.0;
    return base(next) * f / normalizer();
  }

  std::vector<double> distribution() const {
    const double z = normalizer();
    std::vector<double> probs(lm_.vocab_size());
    for (std::size_t w = 0; w < probs.size(); ++w) {
      const auto t = static_cast<TokenId>(w);
      probs[w] = base(t) * (boosted_mask_[w] ? lm_.config_.boost : 1.0) / z;
    }
    return probs;
  }

 private:
  const MockLm& lm_;
  TokenId prev_ = 0;
  bool has_prev_ = false;
  std::vector<char> fired_;
  std::vector<char> boosted_mask_;
  std::vector<TokenId> boosted_;
};

MockLm::MockLm(MockLmConfig config) : config_(std::move(config)) {
  const std::size_t v = config_.vocab_size;
  if (v == 0) throw Error(ErrorKind::kConfiguration, "mock LM needs a non-empty vocabulary");
  if (!(config_.boost > 0.0) || !std::isfinite(config_.boost)) {
    throw Error(ErrorKind::kConfiguration, "mock LM boost must be positive and finite");
  }
  auto in_vocab = [v](TokenId t) { return t >= 0 && static_cast<std::size_t>(t) < v; };

  std::vector<double> counts(v * v, 0.0);
  std::vector<double> totals(v, 0.0);
  for (const auto& seq : config_.corpus) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (!in_vocab(seq[i]) || !in_vocab(seq[i + 1])) {
        throw Error(ErrorKind::kVocabulary, "mock LM corpus token outside vocabulary");
      }
      counts[seq[i] * v + seq[i + 1]] += 1.0;
      totals[seq[i]] += 1.0;
    }
  }
  bigram_.resize(v * v);
  for (std::size_t a = 0; a < v; ++a) {
    const double denom = totals[a] + static_cast<double>(v);
    for (std::size_t b = 0; b < v; ++b) bigram_[a * v + b] = (counts[a * v + b] + 1.0) / denom;
  }

  rules_by_marker_.assign(v, {});
  for (std::size_t r = 0; r < config_.rules.size(); ++r) {
    const auto& rule = config_.rules[r];
    if (!in_vocab(rule.marker)) {
      throw Error(ErrorKind::kVocabulary, "topic rule marker outside vocabulary");
    }
    for (TokenId b : rule.boosted) {
      if (!in_vocab(b)) throw Error(ErrorKind::kVocabulary, "boosted token outside vocabulary");
    }
    rules_by_marker_[rule.marker].push_back(r);
  }
}

double MockLm::bigram(TokenId prev, TokenId next) const {
  return bigram_[static_cast<std::size_t>(prev) * config_.vocab_size + next];
}

void MockLm::check_tokens(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size) {
      throw Error(ErrorKind::kVocabulary, "token id " + std::to_string(t) + " outside LM vocabulary");
    }
  }
}

ContinuationScore MockLm::score_continuation(const Prompt& prompt,
                                             std::span<const TokenId> continuation) const {
  check_window(prompt.tokens.size() + continuation.size(), config_.context_window);
  check_tokens(prompt.tokens);
  check_tokens(continuation);
  State state(*this);
  for (TokenId t : prompt.tokens) state.push(t);
  std::vector<double> logprobs;
  logprobs.reserve(continuation.size());
  for (TokenId t : continuation) {
    logprobs.push_back(std::log(state.prob(t)));
    state.push(t);
  }
  return make_score(std::move(logprobs));
}

NextTokenDistribution MockLm::next_token_distribution(const Prompt& prompt) const {
  check_window(prompt.tokens.size(), config_.context_window);
  check_tokens(prompt.tokens);
  State state(*this);
  for (TokenId t : prompt.tokens) state.push(t);
  return {state.distribution()};
}

MockLm MockLm::from_json(const Json& spec, const Tokenizer& tokenizer) {
  MockLmConfig config;
  config.vocab_size = tokenizer.vocab_size();
  try {
    config.boost = spec.value("boost", 4.0);
    config.context_window = spec.value("context_window", std::size_t{4096});
    for (const auto& line : spec.value("corpus", Json::array())) {
      config.corpus.push_back(tokenizer.tokenize(line.get<std::string>()));
    }
    for (const auto& r : spec.value("rules", Json::array())) {
      TopicRule rule;
      rule.marker = tokenizer.require(r.at("marker").get<std::string>());
      for (const auto& w : r.at("boosted")) rule.boosted.push_back(tokenizer.require(w.get<std::string>()));
      config.rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfiguration, std::string("mock LM spec: ") + e.what());
  }
  return MockLm(std::move(config));
}

Json MockLm::to_json(const MockLmConfig& config, const Tokenizer& tokenizer) {
  Json j;
  j["boost"] = config.boost;
  j["context_window"] = config.context_window;
  j["corpus"] = Json::array();
  for (const auto& seq : config.corpus) j["corpus"].push_back(tokenizer.detokenize(seq));
  j["rules"] = Json::array();
  for (const auto& rule : config.rules) {
    Json r;
    r["marker"] = tokenizer.token_text(rule.marker);
    r["boosted"] = Json::array();
    for (TokenId b : rule.boosted) r["boosted"].push_back(tokenizer.token_text(b));
    j["rules"].push_back(std::move(r));
  }
  return j;
}

}  // namespace replug
