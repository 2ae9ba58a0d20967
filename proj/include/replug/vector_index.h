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
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "replug/encoder.h"

namespace replug {

enum class IndexMode { kExact, kApproximate };

IndexMode parse_index_mode(const std::string& name);

struct ScoredDocument {
  std::string doc_id;
  double score = 0.0;  // cosine similarity
  // Generation of the snapshot entry that produced this hit.
  std::uint64_t generation = 0;
};

// Ordered by doc_id so builds are deterministic.
using EmbeddingMap = std::map<std::string, Embedding>;

struct ApproximateOptions {
  // Recall@k (vs exact search) the probe count is calibrated to reach.
  double target_recall = 0.97;
  std::size_t calibration_k = 10;
  std::size_t calibration_queries = 64;
  std::size_t lists = 0;  // 0 = round(sqrt(n))
  std::size_t kmeans_iterations = 8;
  std::uint64_t seed = 17;
};

// Immutable once published. Exact mode scans every entry; approximate mode
// adds an inverted-file partition (spherical k-means) and probes the lists
// nearest to the query.
class IndexSnapshot {
 public:
  std::uint64_t generation() const { return generation_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  IndexMode mode() const { return mode_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(std::size_t i) const;
  // Probed lists per query in approximate mode.
  std::size_t probes() const { return probes_; }
  std::size_t lists() const { return centroids_.size(); }

  // Exactly min(k, size()) hits, scores non-increasing, ties by ascending
  // doc_id. Throws kArgument for k < 1 and kContract on dimension mismatch.
  std::vector<ScoredDocument> search_top_k(const Embedding& query, std::size_t k) const;
  // Full scan regardless of mode.
  std::vector<ScoredDocument> search_exact(const Embedding& query, std::size_t k) const;

  void save(const std::string& path) const;
  static std::shared_ptr<const IndexSnapshot> load(const std::string& path, IndexMode mode,
                                                   const ApproximateOptions& options = {});

  friend std::shared_ptr<const IndexSnapshot> build_index(const EmbeddingMap&, IndexMode,
                                                          std::uint64_t,
                                                          const ApproximateOptions&);

 private:
  IndexSnapshot() = default;
  std::vector<ScoredDocument> search_probed(const Embedding& query, std::size_t k,
                                            std::size_t probes) const;
  std::vector<ScoredDocument> select_top_k(std::vector<std::pair<double, std::size_t>>& scored,
                                           std::size_t k) const;
  void build_partition(const ApproximateOptions& options);
  void calibrate(const ApproximateOptions& options);
  void check_query(const Embedding& query, std::size_t k) const;

  std::uint64_t generation_ = 0;
  std::size_t dim_ = 0;
  IndexMode mode_ = IndexMode::kExact;
  std::vector<std::string> ids_;
  std::vector<double> data_;  // size() x dim_
  std::vector<double> norms_;
  std::vector<std::uint64_t> stamps_;
  std::vector<std::vector<double>> centroids_;
  std::vector<std::vector<std::size_t>> postings_;
  std::size_t probes_ = 0;
};

// Throws kArgument for an empty map and kContract on mixed dimensions or
// kDegenerateEmbedding on a zero vector.
std::shared_ptr<const IndexSnapshot> build_index(const EmbeddingMap& embeddings, IndexMode mode,
                                                 std::uint64_t generation = 1,
                                                 const ApproximateOptions& options = {});

// Next generation over `embeddings`; logs when the doc_id set changed.
std::shared_ptr<const IndexSnapshot> rebuild(const IndexSnapshot& current,
                                             const EmbeddingMap& embeddings, IndexMode mode,
                                             const ApproximateOptions& options = {});

// Holds the published snapshot. Readers pin() a snapshot for the duration of
// one logical query; rebuilds run one at a time and publish with a single
// pointer swap.
class SnapshotRegistry {
 public:
  using SnapshotPtr = std::shared_ptr<const IndexSnapshot>;

  SnapshotRegistry() = default;
  explicit SnapshotRegistry(SnapshotPtr initial) : current_(std::move(initial)) {}

  SnapshotPtr pin() const;
  // Throws kContract unless the generation is newer than the current one.
  void publish(SnapshotPtr snapshot);

  // Builds generation current+1 on a background thread and publishes it.
  // Concurrent calls queue behind each other.
  std::shared_future<SnapshotPtr> rebuild_async(EmbeddingMap embeddings, IndexMode mode,
                                                ApproximateOptions options = {});
  // As above, with the embeddings computed on the background thread.
  std::shared_future<SnapshotPtr> rebuild_async(std::function<EmbeddingMap()> producer,
                                                IndexMode mode, ApproximateOptions options = {});

 private:
  mutable std::mutex mutex_;
  SnapshotPtr current_;
  std::mutex rebuild_mutex_;
};

}  // namespace replug
