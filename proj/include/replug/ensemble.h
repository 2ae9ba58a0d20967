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
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "replug/corpus.h"
#include "replug/encoder.h"
#include "replug/lm.h"
#include "replug/task_pool.h"
#include "replug/vector_index.h"

namespace replug {

// λ(d, x): softmax over the raw cosine scores, aligned with doc_ids.
struct EnsembleWeights {
  std::vector<std::string> doc_ids;
  std::vector<double> weights;
};

// No temperature. Throws kArgument on empty input or non-finite scores.
EnsembleWeights compute_weights(std::span<const ScoredDocument> scored);

using DocList = std::span<const DocumentChunk* const>;

// Σ_d λ_d · p(· | d ∘ x), one LM call per document, at most pool->size()
// in flight. Any failed pass fails the whole call.
NextTokenDistribution ensemble_next_token(const LanguageModel& lm, std::span<const TokenId> x,
                                          DocList docs, const EnsembleWeights& weights,
                                          TaskPool* pool = nullptr);

// Σ_t log Σ_d λ_d · p(y_t | d ∘ x ∘ y_<t). Documents and weights stay fixed
// across positions; one score_continuation call per document.
double ensemble_sequence_logprob(const LanguageModel& lm, std::span<const TokenId> x,
                                 std::span<const TokenId> y, DocList docs,
                                 const EnsembleWeights& weights, TaskPool* pool = nullptr);

// Greedy decoding on the ensembled distribution; ties go to the lowest token
// id. Stops before emitting a stop token or after max_len tokens.
TokenSeq ensemble_greedy_decode(const LanguageModel& lm, std::span<const TokenId> x,
                                DocList docs, const EnsembleWeights& weights,
                                std::size_t max_len, std::span<const TokenId> stop_tokens,
                                TaskPool* pool = nullptr);

// Prompt-level variants for callers that lay out their own prompt per
// document (the multiple-choice and QA templates).
NextTokenDistribution mix_next_token(const LanguageModel& lm, std::span<const Prompt> prompts,
                                     std::span<const double> weights, TaskPool* pool = nullptr);
TokenSeq greedy_decode_prompts(const LanguageModel& lm, std::span<const Prompt> prompts,
                               std::span<const double> weights, std::size_t max_len,
                               std::span<const TokenId> stop_tokens, TaskPool* pool = nullptr);

class CorpusStore {
 public:
  CorpusStore() = default;
  explicit CorpusStore(std::vector<DocumentChunk> chunks);

  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  const std::vector<DocumentChunk>& chunks() const { return chunks_; }
  const DocumentChunk& at(const std::string& doc_id) const;
  const DocumentChunk* find(const std::string& doc_id) const;

 private:
  std::vector<DocumentChunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Embeddings of every chunk under `params`.
EmbeddingMap embed_corpus(const EncoderParams& params, const CorpusStore& corpus);

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredDocument> retrieve(std::span<const TokenId> query,
                                               std::size_t k) const = 0;
};

// Dual-encoder retrieval over the registry's currently published snapshot.
class DenseRetriever final : public Retriever {
 public:
  DenseRetriever(std::shared_ptr<const EncoderParams> params, const SnapshotRegistry& registry);
  std::vector<ScoredDocument> retrieve(std::span<const TokenId> query,
                                       std::size_t k) const override;

 private:
  std::shared_ptr<const EncoderParams> params_;
  const SnapshotRegistry& registry_;
};

// k distinct documents drawn uniformly, seeded by (seed, query). All scores
// are 0, so ensemble weights are uniform.
class RandomRetriever final : public Retriever {
 public:
  RandomRetriever(const CorpusStore& corpus, std::uint64_t seed);
  std::vector<ScoredDocument> retrieve(std::span<const TokenId> query,
                                       std::size_t k) const override;

 private:
  const CorpusStore& corpus_;
  std::uint64_t seed_;
};

struct EngineOptions {
  std::size_t k = 10;
  std::size_t query_window = 128;
  // With an empty corpus, fall back to the bare LM instead of failing.
  bool allow_no_retrieval = false;
};

struct Retrieval {
  std::vector<const DocumentChunk*> docs;
  EnsembleWeights weights;
};

class Engine {
 public:
  Engine(const CorpusStore& corpus, const Retriever& retriever, const LanguageModel& lm,
         EngineOptions options = {}, TaskPool* pool = nullptr);

  // Retrieves with the last query_window tokens of x.
  Retrieval retrieve(std::span<const TokenId> x, std::size_t k) const;
  // Retrieves with `query` as given.
  Retrieval retrieve_with_query(std::span<const TokenId> query, std::size_t k) const;

  const CorpusStore& corpus() const { return corpus_; }
  const LanguageModel& lm() const { return lm_; }
  const EngineOptions& options() const { return options_; }
  TaskPool* pool() const { return pool_; }

 private:
  const CorpusStore& corpus_;
  const Retriever& retriever_;
  const LanguageModel& lm_;
  EngineOptions options_;
  TaskPool* pool_;
};

struct EnsembleResult {
  Retrieval retrieval;
  NextTokenDistribution distribution;
  bool used_retrieval = true;
};

// search_top_k -> compute_weights -> ensemble_next_token. Throws
// kRetrievalUnavailable on an empty corpus unless the engine allows the
// no-retrieval fallback.
EnsembleResult retrieve_and_ensemble(const Engine& engine, std::span<const TokenId> x,
                                     std::size_t k);

}  // namespace replug
