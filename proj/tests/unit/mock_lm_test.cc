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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "replug/error.h"
#include "replug/mock_lm.h"
#include "replug/tokenizer.h"

namespace replug {
namespace {

// vocab {0,1,2,3}; bigram counts from 0: 0->1 twice, 0->2 once.
MockLmConfig small_config(double boost = 4.0) {
  MockLmConfig c;
  c.vocab_size = 4;
  c.corpus = {{0, 1}, {0, 1}, {0, 2}};
  c.rules = {{3, {0}}};
  c.boost = boost;
  c.context_window = 16;
  return c;
}

TEST(MockLm, ClosedFormBigram) {
  MockLm lm(small_config());
  EXPECT_NEAR(lm.bigram(0, 1), 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(lm.bigram(0, 2), 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(lm.bigram(0, 3), 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(lm.bigram(1, 2), 0.25, 1e-15);
}

TEST(MockLm, QuarterProbability) {
  MockLm lm(small_config());
  const TokenSeq y{2};
  const auto s = lm.score_continuation(Prompt{{1}}, y);
  EXPECT_EQ(s.token_count, 1u);
  EXPECT_NEAR(s.total_logprob, std::log(0.25), 1e-12);
  EXPECT_NEAR(s.total_logprob, -1.38629, 1e-5);
}

TEST(MockLm, EmptyContinuation) {
  MockLm lm(small_config());
  const auto s = lm.score_continuation(Prompt{{0, 1}}, {});
  EXPECT_EQ(s.total_logprob, 0.0);
  EXPECT_EQ(s.token_count, 0u);
}

TEST(MockLm, UniformWithoutContext) {
  MockLmConfig c;
  c.vocab_size = 5;
  MockLm lm(c);
  for (double p : lm.next_token_distribution(Prompt{}).probs) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(MockLm, BoostAfterMarker) {
  MockLm lm(small_config(4.0));
  // Row 3 is uniform; token 0 is boosted x4: 1 / (1 + 3 * 1/4).
  const auto d = lm.next_token_distribution(Prompt{{3}}).probs;
  EXPECT_NEAR(d[0], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(d[1], 1.0 / 7.0, 1e-15);
  EXPECT_NEAR(d[0] / d[1], 4.0, 1e-12);
  // Marker earlier in the prompt still counts.
  const auto e = lm.next_token_distribution(Prompt{{3, 1}}).probs;
  EXPECT_NEAR(e[0] / e[1], 4.0, 1e-12);
  // Without the marker nothing is boosted.
  const auto f = lm.next_token_distribution(Prompt{{2, 1}}).probs;
  EXPECT_NEAR(f[0], 0.25, 1e-15);
}

TEST(MockLm, MarkerInsideContinuation) {
  MockLm lm(small_config(4.0));
  const TokenSeq y{3, 0};
  const auto s = lm.score_continuation(Prompt{{1}}, y);
  EXPECT_NEAR(s.per_token_logprobs[0], std::log(0.25), 1e-12);
  EXPECT_NEAR(s.per_token_logprobs[1], std::log(4.0 / 7.0), 1e-12);
}

TEST(MockLm, NormalizedOnRandomPrompts) {
  MockLmConfig c;
  c.vocab_size = 30;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<TokenId> tok(0, 29);
  for (int i = 0; i < 20; ++i) {
    TokenSeq s(10);
    for (auto& t : s) t = tok(rng);
    c.corpus.push_back(s);
  }
  for (TokenId m = 0; m < 5; ++m) c.rules.push_back({m, {static_cast<TokenId>(10 + m), 20}});
  c.boost = 6.0;
  MockLm lm(c);
  for (int i = 0; i < 100; ++i) {
    Prompt p;
    p.tokens.resize(1 + i % 12);
    for (auto& t : p.tokens) t = tok(rng);
    const auto d = lm.next_token_distribution(p).probs;
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-6);
    for (double v : d) EXPECT_GE(v, 0.0);
  }
}

TEST(MockLm, TeacherForcingAdditivity) {
  MockLmConfig c;
  c.vocab_size = 12;
  c.corpus = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, {3, 3, 5, 1}};
  c.rules = {{4, {7, 8}}, {9, {1}}};
  c.boost = 3.0;
  MockLm lm(c);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<TokenId> tok(0, 11);
  for (int i = 0; i < 100; ++i) {
    Prompt p;
    p.tokens.resize(i % 4);
    for (auto& t : p.tokens) t = tok(rng);
    TokenSeq y1(1 + i % 3), y2(1 + i % 5);
    for (auto& t : y1) t = tok(rng);
    for (auto& t : y2) t = tok(rng);
    TokenSeq y = y1;
    y.insert(y.end(), y2.begin(), y2.end());
    Prompt p1 = p;
    p1.tokens.insert(p1.tokens.end(), y1.begin(), y1.end());
    const auto whole = lm.score_continuation(p, y);
    const double parts =
        lm.score_continuation(p, y1).total_logprob + lm.score_continuation(p1, y2).total_logprob;
    EXPECT_NEAR(whole.total_logprob, parts, 1e-9);
    EXPECT_NEAR(whole.total_logprob,
                std::accumulate(whole.per_token_logprobs.begin(),
                                whole.per_token_logprobs.end(), 0.0),
                1e-9);
    for (double v : whole.per_token_logprobs) EXPECT_LE(v, 0.0);
    // Each token's logprob equals the next-token distribution entry.
    Prompt q = p;
    for (std::size_t t = 0; t < y.size(); ++t) {
      const auto d = lm.next_token_distribution(q).probs;
      EXPECT_NEAR(whole.per_token_logprobs[t], std::log(d[y[t]]), 1e-12);
      q.tokens.push_back(y[t]);
    }
  }
}

TEST(MockLm, WindowAndVocabularyErrors) {
  MockLm lm(small_config());
  const TokenSeq y(10, 1);
  try {
    lm.score_continuation(Prompt{TokenSeq(7, 0)}, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kWindow);
  }
  try {
    lm.next_token_distribution(Prompt{{4}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVocabulary);
  }
  MockLmConfig bad = small_config();
  bad.boost = 0.0;
  EXPECT_THROW(MockLm{bad}, Error);
}

TEST(Prompt, DocumentTruncatedFromLeft) {
  const TokenSeq doc{1, 2, 3, 4, 5}, x{8, 9};
  EXPECT_EQ(Prompt::with_document(doc, x, 1, 100).tokens,
            (TokenSeq{1, 2, 3, 4, 5, 8, 9}));
  EXPECT_EQ(Prompt::with_document(doc, x, 1, 6).tokens, (TokenSeq{3, 4, 5, 8, 9}));
  EXPECT_EQ(Prompt::with_document(doc, x, 4, 6).tokens, (TokenSeq{8, 9}));
  try {
    Prompt::with_document(doc, x, 5, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kWindow);
  }
}

TEST(MockLm, JsonRoundTrip) {
  const std::vector<std::string> texts = {"alpha beta gamma", "key0 beta delta"};
  const auto tok = WhitespaceTokenizer::fit(texts);
  MockLmConfig c;
  c.vocab_size = tok.vocab_size();
  for (const auto& t : texts) c.corpus.push_back(tok.tokenize(t));
  c.rules = {{tok.require("key0"), {tok.require("gamma")}}};
  c.boost = 5.0;
  c.context_window = 99;
  const Json j = MockLm::to_json(c, tok);
  const auto lm = MockLm::from_json(j, tok);
  EXPECT_EQ(lm.config().boost, 5.0);
  EXPECT_EQ(lm.context_window(), 99u);
  EXPECT_EQ(lm.config().corpus, c.corpus);
  ASSERT_EQ(lm.config().rules.size(), 1u);
  EXPECT_EQ(lm.config().rules[0].boosted, c.rules[0].boosted);
  MockLm direct(c);
  const TokenSeq y = tok.tokenize("gamma beta");
  const Prompt p{tok.tokenize("key0 alpha")};
  EXPECT_EQ(lm.score_continuation(p, y).total_logprob, direct.score_continuation(p, y).total_logprob);
  Json broken = j;
  broken["rules"][0]["marker"] = "nonexistent";
  EXPECT_THROW(MockLm::from_json(broken, tok), Error);
}

}  // namespace
}  // namespace replug
