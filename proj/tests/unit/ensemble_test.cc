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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "replug/ensemble.h"
#include "replug/error.h"
#include "replug/mock_lm.h"
#include "test_util.h"

namespace replug {
namespace {

using testing::TableLm;
using testing::make_chunk;

EnsembleWeights weights_of(std::vector<double> w) {
  EnsembleWeights out;
  for (std::size_t i = 0; i < w.size(); ++i) out.doc_ids.push_back("d" + std::to_string(i));
  out.weights = std::move(w);
  return out;
}

std::vector<ScoredDocument> scored(std::vector<double> s) {
  std::vector<ScoredDocument> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({"d" + std::to_string(i), s[i], 1});
  return out;
}

std::vector<const DocumentChunk*> ptrs(const std::vector<DocumentChunk>& docs) {
  std::vector<const DocumentChunk*> out;
  for (const auto& d : docs) out.push_back(&d);
  return out;
}

// Throws on prompts whose first token is `bad`.
class FailingLm final : public LanguageModel {
 public:
  FailingLm(const LanguageModel& inner, TokenId bad) : inner_(inner), bad_(bad) {}
  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  std::size_t context_window() const override { return inner_.context_window(); }
  ContinuationScore score_continuation(const Prompt& p,
                                       std::span<const TokenId> y) const override {
    check(p);
    return inner_.score_continuation(p, y);
  }
  NextTokenDistribution next_token_distribution(const Prompt& p) const override {
    check(p);
    return inner_.next_token_distribution(p);
  }

 private:
  void check(const Prompt& p) const {
    if (!p.tokens.empty() && p.tokens.front() == bad_) {
      throw Error(ErrorKind::kTransport, "injected failure");
    }
  }
  const LanguageModel& inner_;
  TokenId bad_;
};

MockLm random_mock(std::mt19937_64& rng, std::size_t vocab) {
  MockLmConfig c;
  c.vocab_size = vocab;
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab - 1));
  for (int i = 0; i < 30; ++i) {
    TokenSeq s(8);
    for (auto& t : s) t = tok(rng);
    c.corpus.push_back(s);
  }
  c.rules = {{0, {1, 2}}, {3, {4}}};
  c.boost = 5.0;
  return MockLm(c);
}

TEST(Weights, Examples) {
  const auto eq = compute_weights(scored({0.5, 0.5, 0.5}));
  for (double w : eq.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(compute_weights(scored({0.3})).weights, std::vector<double>{1.0});
  const auto two = compute_weights(scored({0.9, 0.7}));
  EXPECT_NEAR(two.weights[0], 1.0 / (1.0 + std::exp(-0.2)), 1e-12);
  EXPECT_NEAR(two.weights[0], 0.5498, 1e-4);
  EXPECT_NEAR(two.weights[1], 0.4502, 1e-4);
  EXPECT_EQ(two.doc_ids, (std::vector<std::string>{"d0", "d1"}));
}

TEST(Weights, Errors) {
  EXPECT_THROW(compute_weights({}), Error);
  EXPECT_THROW(compute_weights(scored({0.1, std::nan("")})), Error);
}

TEST(Weights, ShiftInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0), c(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(1 + i % 12);
    for (auto& v : s) v = u(rng);
    auto t = s;
    const double shift = c(rng);
    for (auto& v : t) v += shift;
    const auto a = compute_weights(scored(s)).weights;
    const auto b = compute_weights(scored(t)).weights;
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-9);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(NextToken, HandMixtures) {
  TableLm lm(2, {{10, {0.8, 0.2}}, {11, {0.2, 0.8}}, {12, {1.0, 0.0}}, {13, {0.0, 1.0}}},
             {0.5, 0.5});
  const std::vector<DocumentChunk> sym = {make_chunk("a", {10}), make_chunk("b", {11})};
  const TokenSeq x{0};
  const auto d = ensemble_next_token(lm, x, ptrs(sym), weights_of({0.5, 0.5})).probs;
  EXPECT_NEAR(d[0], 0.5, 1e-15);
  EXPECT_NEAR(d[1], 0.5, 1e-15);
  const std::vector<DocumentChunk> hard = {make_chunk("a", {12}), make_chunk("b", {13})};
  const auto e = ensemble_next_token(lm, x, ptrs(hard), weights_of({0.75, 0.25})).probs;
  EXPECT_NEAR(e[0], 0.75, 1e-15);
  EXPECT_NEAR(e[1], 0.25, 1e-15);
}

TEST(NextToken, SingletonEqualsPlainPass) {
  std::mt19937_64 rng(2);
  const auto lm = random_mock(rng, 20);
  const std::vector<DocumentChunk> docs = {make_chunk("a", {0, 5, 6, 7})};
  const TokenSeq x{8, 9, 1};
  const auto d = ensemble_next_token(lm, x, ptrs(docs), weights_of({1.0})).probs;
  const auto ref = lm.next_token_distribution(Prompt{{0, 5, 6, 7, 8, 9, 1}}).probs;
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], ref[i], 1e-15);
}

TEST(NextToken, ValidityAndBounds) {
  std::mt19937_64 rng(3);
  TaskPool pool(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<TokenId, std::vector<double>> table;
    std::vector<DocumentChunk> docs;
    const int k = 1 + trial % 6;
    for (int j = 0; j < k; ++j) {
      table[100 + j] = testing::random_distribution(rng, 7);
      docs.push_back(make_chunk("d" + std::to_string(j), {100 + j}));
    }
    TableLm lm(7, table, std::vector<double>(7, 1.0 / 7));
    std::vector<double> s(k);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : s) v = u(rng);
    const auto w = compute_weights(scored(s));
    const TokenSeq x{1, 2};
    const auto d = ensemble_next_token(lm, x, ptrs(docs), w, &pool).probs;
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-6);
    for (std::size_t t = 0; t < 7; ++t) {
      double lo = 1.0, hi = 0.0;
      for (int j = 0; j < k; ++j) {
        lo = std::min(lo, table[100 + j][t]);
        hi = std::max(hi, table[100 + j][t]);
      }
      EXPECT_GE(d[t], lo - 1e-12);
      EXPECT_LE(d[t], hi + 1e-12);
    }
  }
}

TEST(NextToken, ArgmaxDominance) {
  const double eps = 0.01;
  std::vector<double> strong(5, eps / 4);
  strong[3] = 1 - eps;
  TableLm lm(5, {{10, strong}, {11, {0.0, 1.0, 0.0, 0.0, 0.0}}}, std::vector<double>(5, 0.2));
  const std::vector<DocumentChunk> docs = {make_chunk("a", {10}), make_chunk("b", {11})};
  const TokenSeq x{0};
  const auto d = ensemble_next_token(lm, x, ptrs(docs), weights_of({1 - eps, eps})).probs;
  EXPECT_EQ(std::max_element(d.begin(), d.end()) - d.begin(), 3);
}

TEST(NextToken, MismatchedWeights) {
  TableLm lm(2, {}, {0.5, 0.5});
  const std::vector<DocumentChunk> docs = {make_chunk("a", {1})};
  const TokenSeq x{0};
  EXPECT_THROW(ensemble_next_token(lm, x, ptrs(docs), weights_of({0.5, 0.5})), Error);
}

TEST(NextToken, AnyFailedPassFailsTheCall) {
  TableLm inner(3, {}, {0.2, 0.3, 0.5});
  FailingLm lm(inner, 7);
  const std::vector<DocumentChunk> docs = {make_chunk("a", {1}), make_chunk("b", {7})};
  const TokenSeq x{0};
  TaskPool pool(2);
  EXPECT_THROW(ensemble_next_token(lm, x, ptrs(docs), weights_of({0.5, 0.5}), &pool), Error);
  EXPECT_THROW(ensemble_sequence_logprob(lm, x, x, ptrs(docs), weights_of({0.5, 0.5})), Error);
}

// Mixture at each position from explicit next-token distributions.
double per_position_oracle(const LanguageModel& lm, const TokenSeq& x, const TokenSeq& y,
                           const std::vector<DocumentChunk>& docs, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    double mix = 0.0;
    for (std::size_t j = 0; j < docs.size(); ++j) {
      Prompt p{docs[j].tokens};
      p.tokens.insert(p.tokens.end(), x.begin(), x.end());
      p.tokens.insert(p.tokens.end(), y.begin(), y.begin() + static_cast<std::ptrdiff_t>(t));
      mix += w[j] * lm.next_token_distribution(p).probs[y[t]];
    }
    total += std::log(mix);
  }
  return total;
}

TEST(SequenceLogprob, MatchesPerPositionOracle) {
  std::mt19937_64 rng(4);
  const auto lm = random_mock(rng, 15);
  std::uniform_int_distribution<TokenId> tok(0, 14);
  TaskPool pool(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + trial % 4;
    std::vector<DocumentChunk> docs;
    for (int j = 0; j < k; ++j) {
      TokenSeq d(3 + j);
      for (auto& t : d) t = tok(rng);
      docs.push_back(make_chunk("d" + std::to_string(j), d));
    }
    TokenSeq x(4), y(1 + trial % 5);
    for (auto& t : x) t = tok(rng);
    for (auto& t : y) t = tok(rng);
    std::vector<double> s(k);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : s) v = u(rng);
    const auto w = compute_weights(scored(s));
    const double got = ensemble_sequence_logprob(lm, x, y, ptrs(docs), w, &pool);
    EXPECT_NEAR(got, per_position_oracle(lm, x, y, docs, w.weights), 1e-9);
  }
}

TEST(SequenceLogprob, SingletonAndSingleStep) {
  std::mt19937_64 rng(5);
  const auto lm = random_mock(rng, 12);
  const std::vector<DocumentChunk> one = {make_chunk("a", {0, 4, 4})};
  const TokenSeq x{5, 6}, y{1, 2, 3};
  Prompt p{{0, 4, 4, 5, 6}};
  EXPECT_NEAR(ensemble_sequence_logprob(lm, x, y, ptrs(one), weights_of({1.0})),
              lm.score_continuation(p, y).total_logprob, 1e-12);
  const std::vector<DocumentChunk> two = {make_chunk("a", {0, 4}), make_chunk("b", {3, 9})};
  const auto w = weights_of({0.3, 0.7});
  const TokenSeq y1{2};
  EXPECT_NEAR(ensemble_sequence_logprob(lm, x, y1, ptrs(two), w),
              std::log(ensemble_next_token(lm, x, ptrs(two), w).probs[2]), 1e-12);
}

TEST(SequenceLogprob, CostContract) {
  TableLm lm(6, {}, std::vector<double>(6, 1.0 / 6));
  std::vector<DocumentChunk> docs;
  for (int j = 0; j < 5; ++j) docs.push_back(make_chunk("d" + std::to_string(j), TokenSeq(3 + j, 1)));
  const TokenSeq x{2, 3, 4}, y{5, 5, 5, 5};
  std::vector<double> w(5, 0.2);
  ensemble_sequence_logprob(lm, x, y, ptrs(docs), weights_of(w));
  EXPECT_EQ(lm.calls(), 5);
  const auto lens = lm.lengths();
  for (std::size_t len : lens) EXPECT_LE(len, 7 + x.size() + y.size());
}

MockLm chain_lm() {
  // a=0 -> b=1 -> c=2 -> d=3 -> a
  MockLmConfig c;
  c.vocab_size = 4;
  for (int i = 0; i < 10; ++i) c.corpus.push_back({0, 1, 2, 3, 0});
  return MockLm(c);
}

TEST(Greedy, ChainAndStops) {
  const auto lm = chain_lm();
  const std::vector<DocumentChunk> docs = {make_chunk("a", {3})};
  const auto w = weights_of({1.0});
  const TokenSeq x{0};
  EXPECT_EQ(ensemble_greedy_decode(lm, x, ptrs(docs), w, 2, {}), (TokenSeq{1, 2}));
  const TokenSeq stop_b{1};
  EXPECT_TRUE(ensemble_greedy_decode(lm, x, ptrs(docs), w, 5, stop_b).empty());
  const TokenSeq stop_d{3};
  EXPECT_EQ(ensemble_greedy_decode(lm, x, ptrs(docs), w, 5, stop_d), (TokenSeq{1, 2}));
  EXPECT_THROW(ensemble_greedy_decode(lm, x, ptrs(docs), w, 0, {}), Error);
}

TEST(Greedy, TiesGoToLowestId) {
  TableLm lm(4, {}, {0.1, 0.4, 0.1, 0.4});
  const std::vector<DocumentChunk> docs = {make_chunk("a", {0})};
  const TokenSeq x{0};
  EXPECT_EQ(ensemble_greedy_decode(lm, x, ptrs(docs), weights_of({1.0}), 3, {}),
            (TokenSeq{1, 1, 1}));
}

TEST(Greedy, SingletonEqualsPlainGreedy) {
  std::mt19937_64 rng(6);
  const auto lm = random_mock(rng, 10);
  const std::vector<DocumentChunk> docs = {make_chunk("a", {3, 7})};
  const TokenSeq x{5, 0};
  const auto got = ensemble_greedy_decode(lm, x, ptrs(docs), weights_of({1.0}), 6, {});
  Prompt p{{3, 7, 5, 0}};
  TokenSeq want;
  for (int i = 0; i < 6; ++i) {
    const auto d = lm.next_token_distribution(p).probs;
    const auto t = static_cast<TokenId>(std::max_element(d.begin(), d.end()) - d.begin());
    want.push_back(t);
    p.tokens.push_back(t);
  }
  EXPECT_EQ(got, want);
}

struct SmallWorld {
  SmallWorld()
      : corpus([] {
          std::vector<DocumentChunk> c;
          for (int i = 0; i < 6; ++i) c.push_back(make_chunk("c" + std::to_string(i), {i, i + 6}));
          return c;
        }()),
        params(std::make_shared<EncoderParams>(EncoderParams::random(12, 8, 3))),
        registry(build_index(embed_corpus(*params, corpus), IndexMode::kExact)),
        retriever(params, registry),
        lm(12, {}, std::vector<double>(12, 1.0 / 12)) {}

  CorpusStore corpus;
  std::shared_ptr<EncoderParams> params;
  SnapshotRegistry registry;
  DenseRetriever retriever;
  TableLm lm;
};

TEST(Engine, DenseRetrievalMatchesIndex) {
  SmallWorld w;
  Engine engine(w.corpus, w.retriever, w.lm, {3, 2, false});
  const TokenSeq x{9, 9, 0, 6};
  const auto r = engine.retrieve(x, 3);
  ASSERT_EQ(r.docs.size(), 3u);
  // Only the last two tokens form the query.
  const TokenSeq q{0, 6};
  const auto hits = w.registry.pin()->search_top_k(embed(*w.params, q), 3);
  EXPECT_EQ(r.docs[0]->doc_id, "c0");
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.docs[i]->doc_id, hits[i].doc_id);
  EXPECT_NEAR(std::accumulate(r.weights.weights.begin(), r.weights.weights.end(), 0.0), 1.0,
              1e-12);
}

TEST(Engine, ClampAndSingleDoc) {
  SmallWorld w;
  Engine engine(w.corpus, w.retriever, w.lm);
  const TokenSeq x{1, 7};
  const auto r = engine.retrieve(x, 50);
  EXPECT_EQ(r.docs.size(), 6u);
  EXPECT_NEAR(std::accumulate(r.weights.weights.begin(), r.weights.weights.end(), 0.0), 1.0,
              1e-12);

  const CorpusStore one({make_chunk("only", {4, 5})});
  SnapshotRegistry reg(build_index(embed_corpus(*w.params, one), IndexMode::kExact));
  DenseRetriever dense(w.params, reg);
  Engine single(one, dense, w.lm);
  const auto res = retrieve_and_ensemble(single, x, 10);
  ASSERT_EQ(res.retrieval.docs.size(), 1u);
  EXPECT_EQ(res.retrieval.docs[0]->doc_id, "only");
  EXPECT_EQ(res.retrieval.weights.weights, std::vector<double>{1.0});
  EXPECT_TRUE(res.used_retrieval);
}

TEST(Engine, EmptyCorpus) {
  const CorpusStore empty;
  RandomRetriever random(empty, 1);
  TableLm lm(3, {}, {0.2, 0.3, 0.5});
  const TokenSeq x{1};
  Engine strict(empty, random, lm);
  try {
    retrieve_and_ensemble(strict, x, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRetrievalUnavailable);
  }
  Engine lenient(empty, random, lm, {3, 128, true});
  const auto r = retrieve_and_ensemble(lenient, x, 3);
  EXPECT_FALSE(r.used_retrieval);
  EXPECT_EQ(r.distribution.probs, (std::vector<double>{0.2, 0.3, 0.5}));
}

TEST(Engine, RandomRetrieverIsDeterministicAndDistinct) {
  SmallWorld w;
  RandomRetriever a(w.corpus, 9), b(w.corpus, 9);
  const TokenSeq q{1, 2, 3};
  const auto ra = a.retrieve(q, 4);
  EXPECT_EQ(ra.size(), 4u);
  std::set<std::string> seen;
  for (const auto& h : ra) seen.insert(h.doc_id);
  EXPECT_EQ(seen.size(), 4u);
  const auto rb = b.retrieve(q, 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(ra[i].doc_id, rb[i].doc_id);
  bool differs = false;
  for (int s = 0; s < 5 && !differs; ++s) {
    RandomRetriever other(w.corpus, 100 + s);
    const auto ro = other.retrieve(q, 4);
    for (int i = 0; i < 4; ++i) differs = differs || ro[i].doc_id != ra[i].doc_id;
  }
  EXPECT_TRUE(differs);
}

TEST(CorpusStore, Lookup) {
  const CorpusStore s({make_chunk("x#0", {1}), make_chunk("y#0", {2})});
  EXPECT_EQ(s.at("y#0").tokens, (TokenSeq{2}));
  EXPECT_EQ(s.find("z#0"), nullptr);
  EXPECT_THROW(s.at("z#0"), Error);
  EXPECT_THROW(CorpusStore({make_chunk("x#0", {1}), make_chunk("x#0", {2})}), Error);
}

}  // namespace
}  // namespace replug
