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
#include <span>
#include <string>
#include <vector>

#include "replug/tokenizer.h"

namespace replug {

// A point in the retriever's embedding space. Entries are finite.
struct Embedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// dot / (norm_a * norm_b), clamped to [-1, 1]. Every cosine in the library
// goes through here so index scores and direct comparisons agree bitwise.
double cosine_from_parts(double dot_ab, double norm_a, double norm_b);

// Throws kContract on dimension mismatch and kDegenerateEmbedding if either
// vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(a.view(), b.view());
}

// Accumulates scale * d cos(a, b) / da into grad_a and scale * d cos / db
// into grad_b.
void accumulate_cosine_gradient(std::span<const double> a, std::span<const double> b,
                                double scale, std::span<double> grad_a,
                                std::span<double> grad_b);

// Trainable token-embedding table, vocab_size x dim, row-major. Query and
// document encoders share it.
class EncoderParams {
 public:
  EncoderParams() = default;
  EncoderParams(std::size_t vocab_size, std::size_t dim);

  // Entries i.i.d. uniform in [-1/sqrt(dim), 1/sqrt(dim)].
  static EncoderParams random(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(TokenId t) const;
  std::span<double> row(TokenId t);
  std::span<const double> table() const { return table_; }
  std::span<double> table() { return table_; }

  bool all_finite() const;

 private:
  std::size_t vocab_size_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> table_;
};

// Mean of the token rows. Throws kDegenerateInput for an empty sequence and
// kVocabulary for ids outside the table.
Embedding embed(const EncoderParams& params, std::span<const TokenId> tokens);

// Scatters d loss / d embed(tokens) back onto the table rows.
void accumulate_embed_gradient(std::span<const TokenId> tokens,
                               std::span<const double> grad_embedding,
                               std::span<double> grad_table, std::size_t dim);

struct CheckpointInfo {
  std::size_t step = 0;
  std::uint64_t seed = 0;
};

// Writes `path` (RPIX float-matrix records, one per vocabulary row) and
// `path + ".json"` ({vocab_size, dim, step, seed}).
void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const CheckpointInfo& info);
EncoderParams load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace replug
