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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "replug/tokenizer.h"

namespace replug {

struct RawDocument {
  std::string source_id;
  std::string text;
};

// The unit of retrieval. `text` is the detokenized form of `tokens`.
struct DocumentChunk {
  std::string doc_id;  // "<source_id>#<index>"
  std::string source_id;
  std::string text;
  TokenSeq tokens;

  std::size_t token_count() const { return tokens.size(); }
};

struct TrainingExample {
  TokenSeq context;
  TokenSeq continuation;
  std::string source_id;
};

struct CorpusManifest {
  std::size_t chunk_length = 128;
  std::size_t min_tail_length = 32;
  std::string tokenizer_id;
  std::size_t chunk_count = 0;
  std::set<std::string> excluded_source_ids;
  std::string chunks_file = "chunks.jsonl";
};

struct ChunkOptions {
  std::size_t chunk_length = 128;
  std::size_t min_tail_length = 32;
  // Drop chunks whose text exactly matches an earlier chunk.
  bool dedup = true;
};

struct ChunkedCorpus {
  CorpusManifest manifest;
  std::vector<DocumentChunk> chunks;
  std::size_t duplicates_dropped = 0;
};

// Splits each raw document into consecutive, non-overlapping windows of
// chunk_length tokens. A final window shorter than min_tail_length is
// dropped. Documents whose source_id is in `excluded` are skipped.
ChunkedCorpus chunk_corpus(std::span<const RawDocument> raw_docs, const Tokenizer& tokenizer,
                           const ChunkOptions& options,
                           const std::set<std::string>& excluded = {});

struct ExampleOptions {
  std::size_t context_length = 128;
  std::size_t continuation_length = 128;
  // When set, sample this many sequences without replacement.
  std::optional<std::size_t> max_examples;
  std::uint64_t seed = 0;
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
  // Feed into chunk_corpus(..., excluded) to keep queries out of the corpus.
  std::set<std::string> source_ids;
  std::size_t skipped_short = 0;
};

// Each raw document contributes its consecutive windows of
// context_length + continuation_length tokens; the first context_length
// tokens are the context and the rest the continuation.
TrainingSet make_training_examples(std::span<const RawDocument> raw_docs,
                                   const Tokenizer& tokenizer, const ExampleOptions& options);

// Newline-delimited JSON: {"source_id": ..., "text": ...}.
std::vector<RawDocument> read_raw_documents(const std::string& path);
void write_raw_documents(const std::string& path, std::span<const RawDocument> docs);

// Newline-delimited JSON: {"doc_id": ..., "source_id": ..., "text": ...}.
void write_chunks(const std::string& path, std::span<const DocumentChunk> chunks);
std::vector<DocumentChunk> read_chunks(const std::string& path, const Tokenizer& tokenizer);

void write_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::string& path);

// Reads the manifest and the chunk file it names (resolved next to it).
ChunkedCorpus load_corpus(const std::string& manifest_path, const Tokenizer& tokenizer);

}  // namespace replug
