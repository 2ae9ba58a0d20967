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

#include "replug/corpus.h"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "replug/error.h"
#include "replug/json_io.h"
#include "replug/log.h"

namespace replug {
namespace {

std::string field(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorKind::kConfiguration, where + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

ChunkedCorpus chunk_corpus(std::span<const RawDocument> raw_docs, const Tokenizer& tokenizer,
                           const ChunkOptions& options, const std::set<std::string>& excluded) {
  if (options.chunk_length < 1) {
    throw Error(ErrorKind::kConfiguration, "chunk_length must be >= 1");
  }
  if (options.min_tail_length < 1 || options.min_tail_length > options.chunk_length) {
    throw Error(ErrorKind::kConfiguration,
                "min_tail_length must be in [1, chunk_length]");
  }

  ChunkedCorpus out;
  out.manifest.chunk_length = options.chunk_length;
  out.manifest.min_tail_length = options.min_tail_length;
  out.manifest.tokenizer_id = tokenizer.id();
  out.manifest.excluded_source_ids = excluded;

  std::unordered_set<std::string> seen_text;
  for (const auto& doc : raw_docs) {
    if (excluded.contains(doc.source_id)) continue;
    const TokenSeq tokens = tokenizer.tokenize(doc.text);
    std::size_t index = 0;
    for (std::size_t start = 0; start < tokens.size(); start += options.chunk_length) {
      const std::size_t len = std::min(options.chunk_length, tokens.size() - start);
      if (len < options.min_tail_length) break;
      DocumentChunk chunk;
      chunk.tokens.assign(tokens.begin() + start, tokens.begin() + start + len);
      chunk.text = tokenizer.detokenize(chunk.tokens);
      if (options.dedup && !seen_text.insert(chunk.text).second) {
        ++out.duplicates_dropped;
        continue;
      }
      chunk.source_id = doc.source_id;
      chunk.doc_id = doc.source_id + "#" + std::to_string(index++);
      out.chunks.push_back(std::move(chunk));
    }
  }
  out.manifest.chunk_count = out.chunks.size();
  return out;
}

TrainingSet make_training_examples(std::span<const RawDocument> raw_docs,
                                   const Tokenizer& tokenizer, const ExampleOptions& options) {
  if (options.context_length < 1 || options.continuation_length < 1) {
    throw Error(ErrorKind::kConfiguration, "context and continuation lengths must be >= 1");
  }
  const std::size_t span_len = options.context_length + options.continuation_length;

  TrainingSet out;
  std::vector<TrainingExample> all;
  for (const auto& doc : raw_docs) {
    const TokenSeq tokens = tokenizer.tokenize(doc.text);
    if (tokens.size() < span_len) {
      ++out.skipped_short;
      continue;
    }
    for (std::size_t start = 0; start + span_len <= tokens.size(); start += span_len) {
      TrainingExample ex;
      auto first = tokens.begin() + start;
      ex.context.assign(first, first + options.context_length);
      ex.continuation.assign(first + options.context_length, first + span_len);
      ex.source_id = doc.source_id;
      all.push_back(std::move(ex));
    }
  }

  if (out.skipped_short > 0) {
    log().warn("{} sequences shorter than {} tokens skipped", out.skipped_short, span_len);
  }

  if (options.max_examples && *options.max_examples < all.size()) {
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(*options.max_examples);
    std::sort(order.begin(), order.end());
    std::vector<TrainingExample> picked;
    picked.reserve(order.size());
    for (std::size_t i : order) picked.push_back(std::move(all[i]));
    all = std::move(picked);
  }

  for (const auto& ex : all) out.source_ids.insert(ex.source_id);
  out.examples = std::move(all);
  return out;
}

std::vector<RawDocument> read_raw_documents(const std::string& path) {
  std::vector<RawDocument> docs;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    const std::string where = path + ":" + std::to_string(line);
    docs.push_back({field(j, "source_id", where), field(j, "text", where)});
  });
  return docs;
}

void write_raw_documents(const std::string& path, std::span<const RawDocument> docs) {
  std::ostringstream out;
  for (const auto& d : docs) {
    Json j;
    j["source_id"] = d.source_id;
    j["text"] = d.text;
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

void write_chunks(const std::string& path, std::span<const DocumentChunk> chunks) {
  std::ostringstream out;
  for (const auto& c : chunks) {
    Json j;
    j["doc_id"] = c.doc_id;
    j["source_id"] = c.source_id;
    j["text"] = c.text;
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<DocumentChunk> read_chunks(const std::string& path, const Tokenizer& tokenizer) {
  std::vector<DocumentChunk> chunks;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    const std::string where = path + ":" + std::to_string(line);
    DocumentChunk c;
    c.doc_id = field(j, "doc_id", where);
    c.source_id = field(j, "source_id", where);
    c.text = field(j, "text", where);
    c.tokens = tokenizer.tokenize(c.text);
    chunks.push_back(std::move(c));
  });
  return chunks;
}

void write_manifest(const std::string& path, const CorpusManifest& m) {
  Json j;
  j["chunk_length"] = m.chunk_length;
  j["min_tail_length"] = m.min_tail_length;
  j["tokenizer_id"] = m.tokenizer_id;
  j["chunk_count"] = m.chunk_count;
  j["excluded_source_ids"] = Json::array();
  for (const auto& s : m.excluded_source_ids) j["excluded_source_ids"].push_back(s);
  j["chunks_file"] = m.chunks_file;
  write_text_file(path, j.dump(2) + "\n");
}

CorpusManifest read_manifest(const std::string& path) {
  const Json j = read_json_file(path);
  CorpusManifest m;
  try {
    m.chunk_length = j.at("chunk_length").get<std::size_t>();
    m.min_tail_length = j.value("min_tail_length", std::size_t{32});
    m.tokenizer_id = j.at("tokenizer_id").get<std::string>();
    m.chunk_count = j.at("chunk_count").get<std::size_t>();
    for (const auto& s : j.value("excluded_source_ids", Json::array())) {
      m.excluded_source_ids.insert(s.get<std::string>());
    }
    m.chunks_file = j.value("chunks_file", std::string("chunks.jsonl"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfiguration, path + ": " + e.what());
  }
  return m;
}

ChunkedCorpus load_corpus(const std::string& manifest_path, const Tokenizer& tokenizer) {
  ChunkedCorpus corpus;
  corpus.manifest = read_manifest(manifest_path);
  if (corpus.manifest.tokenizer_id != tokenizer.id()) {
    throw Error(ErrorKind::kConfiguration,
                "manifest tokenizer '" + corpus.manifest.tokenizer_id +
                    "' does not match configured tokenizer '" + tokenizer.id() + "'");
  }
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  corpus.chunks = read_chunks((dir / corpus.manifest.chunks_file).string(), tokenizer);
  if (corpus.chunks.size() != corpus.manifest.chunk_count) {
    throw Error(ErrorKind::kContract, "chunk file holds " + std::to_string(corpus.chunks.size()) +
                                          " chunks, manifest declares " +
                                          std::to_string(corpus.manifest.chunk_count));
  }
  for (const auto& c : corpus.chunks) {
    if (corpus.manifest.excluded_source_ids.contains(c.source_id)) {
      throw Error(ErrorKind::kContract, "chunk " + c.doc_id + " comes from an excluded source");
    }
  }
  return corpus;
}

}  // namespace replug
