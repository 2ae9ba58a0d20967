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

#include "replug/ensemble.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "replug/error.h"
#include "replug/hash.h"
#include "replug/softmax.h"

namespace replug {

EnsembleWeights compute_weights(std::span<const ScoredDocument> scored) {
  if (scored.empty()) throw Error(ErrorKind::kArgument, "compute_weights: no documents");
  EnsembleWeights out;
  std::vector<double> scores;
  scores.reserve(scored.size());
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) {
      throw Error(ErrorKind::kArgument, "compute_weights: non-finite score for " + s.doc_id);
    }
    out.doc_ids.push_back(s.doc_id);
    scores.push_back(s.score);
  }
  out.weights = softmax(scores);
  return out;
}

namespace {

void check_alignment(std::size_t n_prompts, std::size_t n_weights) {
  if (n_prompts == 0) throw Error(ErrorKind::kArgument, "ensemble over zero documents");
  if (n_prompts != n_weights) {
    throw Error(ErrorKind::kArgument, "ensemble: " + std::to_string(n_prompts) +
                                          " documents but " + std::to_string(n_weights) +
                                          " weights");
  }
}

std::vector<Prompt> document_prompts(const LanguageModel& lm, std::span<const TokenId> x,
                                     DocList docs, std::size_t reserve) {
  std::vector<Prompt> prompts;
  prompts.reserve(docs.size());
  for (const DocumentChunk* d : docs) {
    prompts.push_back(Prompt::with_document(d->tokens, x, reserve, lm.context_window()));
  }
  return prompts;
}

TokenId argmax_lowest(const std::vector<double>& probs) {
  TokenId best = 0;
  for (std::size_t t = 1; t < probs.size(); ++t) {
    if (probs[t] > probs[best]) best = static_cast<TokenId>(t);
  }
  return best;
}

}  // namespace

NextTokenDistribution mix_next_token(const LanguageModel& lm, std::span<const Prompt> prompts,
                                     std::span<const double> weights, TaskPool* pool) {
  check_alignment(prompts.size(), weights.size());
  std::vector<NextTokenDistribution> passes(prompts.size());
  run_indexed(pool, prompts.size(),
              [&](std::size_t i) { passes[i] = lm.next_token_distribution(prompts[i]); });
  NextTokenDistribution out;
  out.probs.assign(lm.vocab_size(), 0.0);
  for (std::size_t i = 0; i < passes.size(); ++i) {
    const auto& p = passes[i].probs;
    if (p.size() != out.probs.size()) {
      throw Error(ErrorKind::kContract, "LM returned a distribution of the wrong size");
    }
    for (std::size_t t = 0; t < p.size(); ++t) out.probs[t] += weights[i] * p[t];
  }
  return out;
}

TokenSeq greedy_decode_prompts(const LanguageModel& lm, std::span<const Prompt> prompts,
                               std::span<const double> weights, std::size_t max_len,
                               std::span<const TokenId> stop_tokens, TaskPool* pool) {
  if (max_len < 1) throw Error(ErrorKind::kArgument, "max_len must be >= 1");
  std::vector<Prompt> current(prompts.begin(), prompts.end());
  TokenSeq out;
  while (out.size() < max_len) {
    for (auto& p : current) check_window(p.tokens.size() + 1, lm.context_window());
    const auto dist = mix_next_token(lm, current, weights, pool);
    const TokenId next = argmax_lowest(dist.probs);
    if (std::find(stop_tokens.begin(), stop_tokens.end(), next) != stop_tokens.end()) break;
    out.push_back(next);
    for (auto& p : current) p.tokens.push_back(next);
  }
  return out;
}

NextTokenDistribution ensemble_next_token(const LanguageModel& lm, std::span<const TokenId> x,
                                          DocList docs, const EnsembleWeights& weights,
                                          TaskPool* pool) {
  check_alignment(docs.size(), weights.weights.size());
  const auto prompts = document_prompts(lm, x, docs, 1);
  return mix_next_token(lm, prompts, weights.weights, pool);
}

double ensemble_sequence_logprob(const LanguageModel& lm, std::span<const TokenId> x,
                                 std::span<const TokenId> y, DocList docs,
                                 const EnsembleWeights& weights, TaskPool* pool) {
  check_alignment(docs.size(), weights.weights.size());
  if (y.empty()) return 0.0;
  const auto prompts = document_prompts(lm, x, docs, y.size());
  std::vector<ContinuationScore> scores(docs.size());
  run_indexed(pool, docs.size(),
              [&](std::size_t i) { scores[i] = lm.score_continuation(prompts[i], y); });
  for (const auto& s : scores) {
    if (s.per_token_logprobs.size() != y.size()) {
      throw Error(ErrorKind::kContract, "LM returned the wrong number of logprobs");
    }
  }
  double total = 0.0;
  std::vector<double> terms(docs.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      terms[i] = std::log(weights.weights[i]) + scores[i].per_token_logprobs[t];
    }
    total += log_sum_exp(terms);
  }
  return total;
}

TokenSeq ensemble_greedy_decode(const LanguageModel& lm, std::span<const TokenId> x,
                                DocList docs, const EnsembleWeights& weights,
                                std::size_t max_len, std::span<const TokenId> stop_tokens,
                                TaskPool* pool) {
  check_alignment(docs.size(), weights.weights.size());
  const auto prompts = document_prompts(lm, x, docs, 1);
  return greedy_decode_prompts(lm, prompts, weights.weights, max_len, stop_tokens, pool);
}

CorpusStore::CorpusStore(std::vector<DocumentChunk> chunks) : chunks_(std::move(chunks)) {
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (!by_id_.emplace(chunks_[i].doc_id, i).second) {
      throw Error(ErrorKind::kContract, "duplicate doc_id " + chunks_[i].doc_id);
    }
  }
}

const DocumentChunk* CorpusStore::find(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const DocumentChunk& CorpusStore::at(const std::string& doc_id) const {
  const DocumentChunk* d = find(doc_id);
  if (d == nullptr) throw Error(ErrorKind::kContract, "unknown doc_id " + doc_id);
  return *d;
}

EmbeddingMap embed_corpus(const EncoderParams& params, const CorpusStore& corpus) {
  EmbeddingMap out;
  for (const auto& c : corpus.chunks()) out.emplace(c.doc_id, embed(params, c.tokens));
  return out;
}

DenseRetriever::DenseRetriever(std::shared_ptr<const EncoderParams> params,
                               const SnapshotRegistry& registry)
    : params_(std::move(params)), registry_(registry) {}

std::vector<ScoredDocument> DenseRetriever::retrieve(std::span<const TokenId> query,
                                                     std::size_t k) const {
  auto snapshot = registry_.pin();
  if (!snapshot) throw Error(ErrorKind::kRetrievalUnavailable, "no index published");
  return snapshot->search_top_k(embed(*params_, query), k);
}

RandomRetriever::RandomRetriever(const CorpusStore& corpus, std::uint64_t seed)
    : corpus_(corpus), seed_(seed) {}

std::vector<ScoredDocument> RandomRetriever::retrieve(std::span<const TokenId> query,
                                                      std::size_t k) const {
  if (k < 1) throw Error(ErrorKind::kArgument, "k must be >= 1");
  const std::size_t n = corpus_.size();
  std::string bytes(query.size() * sizeof(TokenId), '\0');
  if (!query.empty()) std::memcpy(bytes.data(), query.data(), bytes.size());
  std::mt19937_64 rng(fnv1a64(bytes, seed_ ^ 0x9e3779b97f4a7c15ULL));
  // Partial Fisher-Yates over indices; raw engine output keeps it portable.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const std::size_t take = std::min(k, n);
  std::vector<ScoredDocument> out;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
    out.push_back({corpus_.chunks()[idx[i]].doc_id, 0.0, 0});
  }
  return out;
}

Engine::Engine(const CorpusStore& corpus, const Retriever& retriever, const LanguageModel& lm,
               EngineOptions options, TaskPool* pool)
    : corpus_(corpus), retriever_(retriever), lm_(lm), options_(options), pool_(pool) {}

Retrieval Engine::retrieve_with_query(std::span<const TokenId> query, std::size_t k) const {
  if (k < 1) throw Error(ErrorKind::kArgument, "k must be >= 1");
  if (corpus_.empty()) throw Error(ErrorKind::kRetrievalUnavailable, "corpus is empty");
  const auto hits = retriever_.retrieve(query, k);
  if (hits.empty()) throw Error(ErrorKind::kRetrievalUnavailable, "retriever returned nothing");
  Retrieval r;
  r.weights = compute_weights(hits);
  for (const auto& h : hits) r.docs.push_back(&corpus_.at(h.doc_id));
  return r;
}

Retrieval Engine::retrieve(std::span<const TokenId> x, std::size_t k) const {
  const std::size_t w = std::min(options_.query_window, x.size());
  return retrieve_with_query(x.subspan(x.size() - w), k);
}

EnsembleResult retrieve_and_ensemble(const Engine& engine, std::span<const TokenId> x,
                                     std::size_t k) {
  EnsembleResult out;
  if (engine.corpus().empty() && engine.options().allow_no_retrieval) {
    out.used_retrieval = false;
    check_window(x.size() + 1, engine.lm().context_window());
    out.distribution = engine.lm().next_token_distribution(Prompt::bare(x));
    return out;
  }
  out.retrieval = engine.retrieve(x, k);
  out.distribution = ensemble_next_token(engine.lm(), x, out.retrieval.docs,
                                         out.retrieval.weights, engine.pool());
  return out;
}

}  // namespace replug
