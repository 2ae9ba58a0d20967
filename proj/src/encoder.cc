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

#include "replug/encoder.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "replug/error.h"
#include "replug/json_io.h"
#include "replug/rpix_format.h"

namespace replug {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kContract, "cosine of vectors with dims " + std::to_string(a.size()) +
                                          " and " + std::to_string(b.size()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::kDegenerateEmbedding, "cosine similarity of a zero-norm vector");
  }
  return cosine_from_parts(dot(a, b), na, nb);
}

double cosine_from_parts(double dot_ab, double norm_a, double norm_b) {
  return std::clamp(dot_ab / (norm_a * norm_b), -1.0, 1.0);
}

void accumulate_cosine_gradient(std::span<const double> a, std::span<const double> b,
                                double scale, std::span<double> grad_a,
                                std::span<double> grad_b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::kDegenerateEmbedding, "cosine gradient at a zero-norm vector");
  }
  const double s = dot(a, b) / (na * nb);
  const double inv = 1.0 / (na * nb);
  // d cos / da = b / (|a||b|) - cos * a / |a|^2, symmetric in b.
  for (std::size_t i = 0; i < a.size(); ++i) {
    grad_a[i] += scale * (b[i] * inv - s * a[i] / (na * na));
    grad_b[i] += scale * (a[i] * inv - s * b[i] / (nb * nb));
  }
}

EncoderParams::EncoderParams(std::size_t vocab_size, std::size_t dim)
    : vocab_size_(vocab_size), dim_(dim), table_(vocab_size * dim, 0.0) {
  if (vocab_size == 0 || dim == 0) {
    throw Error(ErrorKind::kConfiguration, "encoder needs vocab_size >= 1 and dim >= 1");
  }
}

EncoderParams EncoderParams::random(std::size_t vocab_size, std::size_t dim,
                                    std::uint64_t seed) {
  EncoderParams p(vocab_size, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.table_) v = dist(rng);
  return p;
}

std::span<const double> EncoderParams::row(TokenId t) const {
  return std::span<const double>(table_).subspan(static_cast<std::size_t>(t) * dim_, dim_);
}

std::span<double> EncoderParams::row(TokenId t) {
  return std::span<double>(table_).subspan(static_cast<std::size_t>(t) * dim_, dim_);
}

bool EncoderParams::all_finite() const {
  for (double v : table_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Embedding embed(const EncoderParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) {
    throw Error(ErrorKind::kDegenerateInput, "cannot embed an empty token sequence");
  }
  Embedding e{std::vector<double>(params.dim(), 0.0)};
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.vocab_size()) {
      throw Error(ErrorKind::kVocabulary, "token id " + std::to_string(t) +
                                              " outside encoder vocabulary of " +
                                              std::to_string(params.vocab_size()));
    }
    const auto r = params.row(t);
    for (std::size_t i = 0; i < r.size(); ++i) e.values[i] += r[i];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& v : e.values) v *= inv;
  return e;
}

void accumulate_embed_gradient(std::span<const TokenId> tokens,
                               std::span<const double> grad_embedding,
                               std::span<double> grad_table, std::size_t dim) {
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (TokenId t : tokens) {
    auto row = grad_table.subspan(static_cast<std::size_t>(t) * dim, dim);
    for (std::size_t i = 0; i < dim; ++i) row[i] += grad_embedding[i] * inv;
  }
}

void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const CheckpointInfo& info) {
  RpixFile file;
  file.dim = static_cast<std::uint32_t>(params.dim());
  file.generation = info.step;
  file.records.reserve(params.vocab_size());
  for (std::size_t t = 0; t < params.vocab_size(); ++t) {
    const auto r = params.row(static_cast<TokenId>(t));
    file.records.push_back({std::to_string(t), {r.begin(), r.end()}});
  }
  write_rpix(path, file);

  Json side;
  side["vocab_size"] = params.vocab_size();
  side["dim"] = params.dim();
  side["step"] = info.step;
  side["seed"] = info.seed;
  write_text_file(path + ".json", side.dump(2) + "\n");
}

EncoderParams load_checkpoint(const std::string& path, CheckpointInfo* info) {
  const Json side = read_json_file(path + ".json");
  const RpixFile file = read_rpix(path);
  const auto vocab = side.at("vocab_size").get<std::size_t>();
  const auto dim = side.at("dim").get<std::size_t>();
  if (file.dim != dim || file.records.size() != vocab) {
    throw Error(ErrorKind::kContract, path + ": checkpoint shape disagrees with its sidecar");
  }
  EncoderParams p(vocab, dim);
  for (std::size_t t = 0; t < vocab; ++t) {
    if (file.records[t].id != std::to_string(t)) {
      throw Error(ErrorKind::kContract, path + ": rows out of order");
    }
    auto r = p.row(static_cast<TokenId>(t));
    std::copy(file.records[t].values.begin(), file.records[t].values.end(), r.begin());
  }
  if (info) {
    info->step = side.value("step", std::size_t{0});
    info->seed = side.value("seed", std::uint64_t{0});
  }
  return p;
}

}  // namespace replug
