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

#include "replug/vector_index.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "replug/error.h"
#include "replug/log.h"
#include "replug/rpix_format.h"

namespace replug {

IndexMode parse_index_mode(const std::string& name) {
  if (name == "exact") return IndexMode::kExact;
  if (name == "approximate" || name == "approx") return IndexMode::kApproximate;
  throw Error(ErrorKind::kConfiguration, "unknown index mode '" + name + "'");
}

std::span<const double> IndexSnapshot::vector(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * dim_, dim_);
}

void IndexSnapshot::check_query(const Embedding& query, std::size_t k) const {
  if (k < 1) throw Error(ErrorKind::kArgument, "k must be >= 1");
  if (query.dim() != dim_) {
    throw Error(ErrorKind::kContract, "query dim " + std::to_string(query.dim()) +
                                          " does not match index dim " + std::to_string(dim_));
  }
  if (l2_norm(query.view()) == 0.0) {
    throw Error(ErrorKind::kDegenerateEmbedding, "zero-norm query");
  }
}

std::vector<ScoredDocument> IndexSnapshot::select_top_k(
    std::vector<std::pair<double, std::size_t>>& scored, std::size_t k) const {
  const auto better = [this](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ids_[a.second] < ids_[b.second];
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), better);
  std::vector<ScoredDocument> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const auto idx = scored[i].second;
    out.push_back({ids_[idx], scored[i].first, stamps_[idx]});
  }
  return out;
}

std::vector<ScoredDocument> IndexSnapshot::search_exact(const Embedding& query,
                                                        std::size_t k) const {
  check_query(query, k);
  const double qn = l2_norm(query.view());
  std::vector<std::pair<double, std::size_t>> scored(size());
  for (std::size_t i = 0; i < size(); ++i) {
    scored[i] = {cosine_from_parts(dot(query.view(), vector(i)), qn, norms_[i]), i};
  }
  return select_top_k(scored, k);
}

std::vector<ScoredDocument> IndexSnapshot::search_probed(const Embedding& query, std::size_t k,
                                                         std::size_t probes) const {
  const double qn = l2_norm(query.view());
  std::vector<std::pair<double, std::size_t>> lists(centroids_.size());
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    lists[c] = {dot(query.view(), centroids_[c]), c};
  }
  const std::size_t p = std::min(probes, lists.size());
  std::partial_sort(lists.begin(), lists.begin() + static_cast<std::ptrdiff_t>(p), lists.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i : postings_[lists[j].second]) {
      scored.push_back({cosine_from_parts(dot(query.view(), vector(i)), qn, norms_[i]), i});
    }
  }
  return select_top_k(scored, k);
}

std::vector<ScoredDocument> IndexSnapshot::search_top_k(const Embedding& query,
                                                        std::size_t k) const {
  if (mode_ == IndexMode::kExact) return search_exact(query, k);
  check_query(query, k);
  return search_probed(query, k, probes_);
}

void IndexSnapshot::build_partition(const ApproximateOptions& options) {
  const std::size_t n = size();
  std::size_t lists = options.lists;
  if (lists == 0) lists = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  lists = std::clamp<std::size_t>(lists, 1, n);

  std::vector<double> unit(data_.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim_; ++d) unit[i * dim_ + d] = data_[i * dim_ + d] / norms_[i];
  }
  auto unit_row = [&](std::size_t i) { return std::span<const double>(unit).subspan(i * dim_, dim_); };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  centroids_.assign(lists, std::vector<double>(dim_));
  for (std::size_t c = 0; c < lists; ++c) {
    const auto r = unit_row(order[c]);
    std::copy(r.begin(), r.end(), centroids_[c].begin());
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t iter = 0; iter <= options.kmeans_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -2.0;
      for (std::size_t c = 0; c < lists; ++c) {
        const double s = dot(unit_row(i), centroids_[c]);
        if (s > best) {
          best = s;
          assign[i] = c;
        }
      }
    }
    if (iter == options.kmeans_iterations) break;
    std::vector<std::vector<double>> sums(lists, std::vector<double>(dim_, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = unit_row(i);
      for (std::size_t d = 0; d < dim_; ++d) sums[assign[i]][d] += r[d];
    }
    for (std::size_t c = 0; c < lists; ++c) {
      const double norm = l2_norm(sums[c]);
      if (norm == 0.0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < dim_; ++d) centroids_[c][d] = sums[c][d] / norm;
    }
  }
  postings_.assign(lists, {});
  for (std::size_t i = 0; i < n; ++i) postings_[assign[i]].push_back(i);
}

void IndexSnapshot::calibrate(const ApproximateOptions& options) {
  const std::size_t k = std::min(options.calibration_k, size());
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Embedding> queries(options.calibration_queries);
  std::vector<std::set<std::string>> truth(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    queries[q].values.resize(dim_);
    for (auto& v : queries[q].values) v = gauss(rng);
    for (const auto& hit : search_exact(queries[q], k)) truth[q].insert(hit.doc_id);
  }
  for (probes_ = 1; probes_ < centroids_.size(); ++probes_) {
    double recall = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      std::size_t found = 0;
      for (const auto& hit : search_probed(queries[q], k, probes_)) {
        found += truth[q].count(hit.doc_id);
      }
      recall += static_cast<double>(found) / static_cast<double>(k);
    }
    if (recall / static_cast<double>(queries.size()) >= options.target_recall) return;
  }
}

std::shared_ptr<const IndexSnapshot> build_index(const EmbeddingMap& embeddings, IndexMode mode,
                                                 std::uint64_t generation,
                                                 const ApproximateOptions& options) {
  if (embeddings.empty()) throw Error(ErrorKind::kArgument, "cannot index an empty corpus");
  std::shared_ptr<IndexSnapshot> snap(new IndexSnapshot());
  snap->generation_ = generation;
  snap->mode_ = mode;
  snap->dim_ = embeddings.begin()->second.dim();
  if (snap->dim_ == 0) throw Error(ErrorKind::kContract, "zero-dimensional embeddings");
  snap->ids_.reserve(embeddings.size());
  snap->data_.reserve(embeddings.size() * snap->dim_);
  for (const auto& [id, e] : embeddings) {
    if (e.dim() != snap->dim_) {
      throw Error(ErrorKind::kContract, "embedding for '" + id + "' has dim " +
                                            std::to_string(e.dim()) + ", expected " +
                                            std::to_string(snap->dim_));
    }
    const double norm = l2_norm(e.view());
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw Error(ErrorKind::kDegenerateEmbedding, "embedding for '" + id + "' is degenerate");
    }
    snap->ids_.push_back(id);
    snap->data_.insert(snap->data_.end(), e.values.begin(), e.values.end());
    snap->norms_.push_back(norm);
  }
  snap->stamps_.assign(snap->ids_.size(), generation);
  if (mode == IndexMode::kApproximate) {
    snap->build_partition(options);
    snap->calibrate(options);
  }
  return snap;
}

std::shared_ptr<const IndexSnapshot> rebuild(const IndexSnapshot& current,
                                             const EmbeddingMap& embeddings, IndexMode mode,
                                             const ApproximateOptions& options) {
  std::size_t kept = 0;
  for (const auto& id : current.ids()) kept += embeddings.count(id);
  if (kept != current.size() || embeddings.size() != current.size()) {
    log().warn("index rebuild changes the corpus: {} -> {} documents ({} shared)",
               current.size(), embeddings.size(), kept);
  }
  return build_index(embeddings, mode, current.generation() + 1, options);
}

void IndexSnapshot::save(const std::string& path) const {
  RpixFile file;
  file.dim = static_cast<std::uint32_t>(dim_);
  file.generation = generation_;
  file.records.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto v = vector(i);
    file.records.push_back({ids_[i], {v.begin(), v.end()}});
  }
  write_rpix(path, file);
}

std::shared_ptr<const IndexSnapshot> IndexSnapshot::load(const std::string& path, IndexMode mode,
                                                         const ApproximateOptions& options) {
  RpixFile file = read_rpix(path);
  EmbeddingMap map;
  for (auto& rec : file.records) {
    if (!map.emplace(rec.id, Embedding{std::move(rec.values)}).second) {
      throw Error(ErrorKind::kContract, path + ": duplicate doc_id '" + rec.id + "'");
    }
  }
  return build_index(map, mode, file.generation, options);
}

SnapshotRegistry::SnapshotPtr SnapshotRegistry::pin() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void SnapshotRegistry::publish(SnapshotPtr snapshot) {
  std::lock_guard lock(mutex_);
  if (current_ && snapshot->generation() <= current_->generation()) {
    throw Error(ErrorKind::kContract, "snapshot generation must increase (" +
                                          std::to_string(current_->generation()) + " -> " +
                                          std::to_string(snapshot->generation()) + ")");
  }
  current_ = std::move(snapshot);
}

std::shared_future<SnapshotRegistry::SnapshotPtr> SnapshotRegistry::rebuild_async(
    EmbeddingMap embeddings, IndexMode mode, ApproximateOptions options) {
  return rebuild_async(
      [embeddings = std::move(embeddings)]() mutable { return std::move(embeddings); }, mode,
      options);
}

std::shared_future<SnapshotRegistry::SnapshotPtr> SnapshotRegistry::rebuild_async(
    std::function<EmbeddingMap()> producer, IndexMode mode, ApproximateOptions options) {
  return std::async(std::launch::async,
                    [this, producer = std::move(producer), mode, options]() {
                      std::lock_guard serial(rebuild_mutex_);
                      const EmbeddingMap embeddings = producer();
                      const SnapshotPtr base = pin();
                      SnapshotPtr next = base ? rebuild(*base, embeddings, mode, options)
                                              : build_index(embeddings, mode, 1, options);
                      publish(next);
                      return next;
                    })
      .share();
}

}  // namespace replug
