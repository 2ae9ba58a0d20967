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
#include <map>
#include <string>
#include <vector>

#include "replug/corpus.h"
#include "replug/encoder.h"
#include "replug/evaluation.h"
#include "replug/mock_lm.h"
#include "replug/tokenizer.h"
#include "replug/vector_index.h"

namespace replug {

// Topic-keyed synthetic task. Every topic t has facet keys k{t}{f}, facet
// words, general words and an answer word a{t}; a document mentioning a key
// makes the mock LM favour that key's facet words, the topic answer and the
// topic letter.
struct HarnessOptions {
  std::size_t topics = 10;
  std::size_t facets = 4;
  std::size_t words_per_facet = 8;
  std::size_t general_words = 8;
  std::size_t filler_words = 60;
  std::size_t corpus_docs = 2000;
  std::size_t train_examples = 500;
  std::size_t eval_docs = 200;
  std::size_t probe_queries = 100;
  std::size_t mc_items = 20;
  std::size_t qa_items = 5;
  std::size_t window = 16;  // context and continuation length
  std::size_t keys_per_doc = 2;
  double boost = 8.0;
  std::uint64_t seed = 1;
};

using TopicMap = std::map<std::string, std::size_t>;

// Topic of a chunk id ("<source>#<index>").
std::size_t chunk_topic(const TopicMap& topics, const std::string& doc_id);

struct TopicQuery {
  TokenSeq tokens;
  std::size_t topic = 0;
};

struct Harness {
  HarnessOptions options;
  WhitespaceTokenizer tokenizer{std::vector<std::string>{}};
  // Texts for the mock LM's bigram table, and its rules as words.
  std::vector<std::string> lm_corpus;
  std::vector<std::pair<std::string, std::vector<std::string>>> lm_rules;

  std::vector<RawDocument> corpus_docs;
  std::vector<RawDocument> train_docs;
  std::vector<EvalDocument> eval_docs;
  std::vector<McItem> mc_items;
  std::vector<QaItem> qa_items;
  // Topic of every corpus source and every probe query.
  TopicMap source_topic;
  std::vector<std::pair<std::string, std::size_t>> probe_queries;

  Json mock_lm_spec() const;
  MockLm make_lm() const;
  ChunkOptions chunk_options() const;
  ExampleOptions example_options() const;
  std::vector<TopicQuery> probe_set() const;
  std::size_t chunk_topic(const std::string& doc_id) const;

  // Writes vocab.txt, mock_lm.json, corpus.jsonl, train.jsonl, eval.jsonl,
  // mc.jsonl, qa.jsonl and probe.jsonl into `dir`.
  void write(const std::string& dir) const;
};

Harness make_harness(const HarnessOptions& options);

// Mean over queries of 1 / rank of the first same-topic chunk in a full
// exact ranking.
double topic_mrr(const EncoderParams& params, const IndexSnapshot& snapshot,
                 std::span<const TopicQuery> queries, const TopicMap& topics);
// Mean fraction of same-topic chunks among the top k.
double topic_precision(const EncoderParams& params, const IndexSnapshot& snapshot,
                       std::span<const TopicQuery> queries, const TopicMap& topics,
                       std::size_t k);

std::vector<TopicQuery> read_probe_queries(const std::string& path, const Tokenizer& tokenizer);
TopicMap read_topic_map(const std::string& path);

}  // namespace replug
