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
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "replug/error.h"
#include "replug/vector_index.h"
#include "test_util.h"

namespace replug {
namespace {

Embedding gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  Embedding e;
  e.values.resize(dim);
  for (auto& v : e.values) v = g(rng);
  return e;
}

EmbeddingMap random_map(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  EmbeddingMap m;
  for (std::size_t i = 0; i < n; ++i) m["d" + std::to_string(i)] = gaussian(rng, dim);
  return m;
}

// Independent full scan: score everything, sort by (score desc, id asc).
std::vector<std::string> oracle(const EmbeddingMap& m, const Embedding& q, std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  for (const auto& [id, e] : m) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
      d += q.values[i] * e.values[i];
      na += q.values[i] * q.values[i];
      nb += e.values[i] * e.values[i];
    }
    all.emplace_back(d / std::sqrt(na * nb), id);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::string> ids(const std::vector<ScoredDocument>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.doc_id);
  return out;
}

TEST(Build, SmallAndGenerations) {
  EmbeddingMap m{{"a", {{1, 0}}}, {"b", {{0, 1}}}, {"c", {{1, 1}}}};
  auto s = build_index(m, IndexMode::kExact);
  EXPECT_EQ(s->size(), 3u);
  EXPECT_EQ(s->generation(), 1u);
  auto s2 = rebuild(*s, m, IndexMode::kExact);
  EXPECT_EQ(s2->generation(), 2u);
  auto s3 = rebuild(*s2, m, IndexMode::kExact);
  EXPECT_EQ(s3->generation(), 3u);
}

TEST(Build, Errors) {
  EmbeddingMap bad{{"a", {{1, 0}}}, {"b", {{0, 1, 0}}}};
  try {
    build_index(bad, IndexMode::kExact);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
  EXPECT_THROW(build_index({}, IndexMode::kExact), Error);
  EXPECT_THROW(parse_index_mode("fuzzy"), Error);
  EXPECT_EQ(parse_index_mode("approximate"), IndexMode::kApproximate);
}

TEST(Search, TwoVectorExamples) {
  EmbeddingMap m{{"d1", {{1, 0}}}, {"d2", {{0, 1}}}};
  auto s = build_index(m, IndexMode::kExact);
  const Embedding q{{1, 0}};
  auto top = s->search_top_k(q, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].doc_id, "d1");
  EXPECT_DOUBLE_EQ(top[0].score, 1.0);
  EXPECT_EQ(s->search_top_k(q, 5).size(), 2u);
  try {
    s->search_top_k(q, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
  EXPECT_THROW(s->search_top_k(Embedding{{1, 0, 0}}, 1), Error);
}

TEST(Search, TiesByAscendingId) {
  EmbeddingMap m{{"z", {{1, 0}}}, {"b", {{2, 0}}}, {"m", {{0.5, 0}}}, {"a", {{0, 1}}}};
  auto s = build_index(m, IndexMode::kExact);
  EXPECT_EQ(ids(s->search_top_k(Embedding{{1, 0}}, 4)),
            (std::vector<std::string>{"b", "m", "z", "a"}));
}

TEST(Search, ExactEqualsFullScan) {
  std::mt19937_64 rng(21);
  const auto m = random_map(rng, 1000, 16);
  auto s = build_index(m, IndexMode::kExact);
  for (int i = 0; i < 50; ++i) {
    const auto q = gaussian(rng, 16);
    const auto hits = s->search_top_k(q, 10);
    EXPECT_EQ(ids(hits), oracle(m, q, 10));
    for (std::size_t j = 1; j < hits.size(); ++j) EXPECT_GE(hits[j - 1].score, hits[j].score);
    for (const auto& h : hits) {
      EXPECT_LE(std::abs(h.score), 1.0);
    }
  }
}

TEST(Search, PrefixOfFullOrder) {
  std::mt19937_64 rng(4);
  const auto m = random_map(rng, 200, 5);
  auto s = build_index(m, IndexMode::kExact);
  const auto q = gaussian(rng, 5);
  const auto full = ids(s->search_top_k(q, 200));
  for (std::size_t k : {1u, 7u, 50u, 199u}) {
    const auto part = ids(s->search_top_k(q, k));
    EXPECT_TRUE(std::equal(part.begin(), part.end(), full.begin()));
  }
}

TEST(Search, ApproximateRecall) {
  std::mt19937_64 rng(8);
  const auto m = random_map(rng, 1000, 16);
  auto exact = build_index(m, IndexMode::kExact);
  auto approx = build_index(m, IndexMode::kApproximate);
  EXPECT_GT(approx->lists(), 1u);
  double hit = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto q = gaussian(rng, 16);
    const auto want = ids(exact->search_top_k(q, 10));
    const auto got = ids(approx->search_top_k(q, 10));
    ASSERT_EQ(got.size(), 10u);
    for (const auto& id : got) hit += std::count(want.begin(), want.end(), id);
  }
  EXPECT_GE(hit / 1000.0, 0.95);
}

TEST(Search, NegatedStoreFlipsTop1) {
  std::mt19937_64 rng(10);
  const auto m = random_map(rng, 300, 6);
  auto s = build_index(m, IndexMode::kExact);
  EmbeddingMap neg = m;
  for (auto& [id, e] : neg) {
    for (auto& v : e.values) v = -v;
  }
  auto s2 = rebuild(*s, neg, IndexMode::kExact);
  for (int i = 0; i < 20; ++i) {
    const auto q = gaussian(rng, 6);
    const auto before = s->search_top_k(q, 300);
    const auto after = s2->search_top_k(q, 1);
    EXPECT_EQ(after[0].doc_id, before.back().doc_id);
    EXPECT_NEAR(after[0].score, -before.back().score, 1e-12);
  }
}

TEST(Search, IdenticalRebuildKeepsResults) {
  std::mt19937_64 rng(12);
  const auto m = random_map(rng, 100, 4);
  auto s = build_index(m, IndexMode::kExact);
  auto s2 = rebuild(*s, m, IndexMode::kExact);
  const auto q = gaussian(rng, 4);
  EXPECT_EQ(ids(s->search_top_k(q, 10)), ids(s2->search_top_k(q, 10)));
}

TEST(Snapshot, SaveLoadRoundTrip) {
  testing::TempDir dir("snap");
  std::mt19937_64 rng(13);
  const auto m = random_map(rng, 50, 7);
  auto s = rebuild(*build_index(m, IndexMode::kExact), m, IndexMode::kExact);
  s->save(dir.file("s.rpix"));
  auto l = IndexSnapshot::load(dir.file("s.rpix"), IndexMode::kExact);
  EXPECT_EQ(l->generation(), 2u);
  EXPECT_EQ(l->dim(), 7u);
  ASSERT_EQ(l->ids(), s->ids());
  for (std::size_t i = 0; i < s->size(); ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_EQ(l->vector(i)[j], static_cast<double>(static_cast<float>(s->vector(i)[j])));
    }
  }
  l->save(dir.file("t.rpix"));
  auto l2 = IndexSnapshot::load(dir.file("t.rpix"), IndexMode::kExact);
  for (std::size_t i = 0; i < s->size(); ++i) {
    EXPECT_TRUE(std::equal(l->vector(i).begin(), l->vector(i).end(), l2->vector(i).begin()));
  }
}

TEST(Registry, PublishMustIncrease) {
  EmbeddingMap m{{"a", {{1, 0}}}};
  SnapshotRegistry reg(build_index(m, IndexMode::kExact, 3));
  EXPECT_THROW(reg.publish(build_index(m, IndexMode::kExact, 3)), Error);
  reg.publish(build_index(m, IndexMode::kExact, 4));
  EXPECT_EQ(reg.pin()->generation(), 4u);
}

TEST(Registry, QueuedRebuildsAreSerialized) {
  std::mt19937_64 rng(14);
  const auto m = random_map(rng, 100, 4);
  SnapshotRegistry reg(build_index(m, IndexMode::kExact));
  std::vector<std::shared_future<SnapshotRegistry::SnapshotPtr>> futures;
  for (int i = 0; i < 5; ++i) futures.push_back(reg.rebuild_async(m, IndexMode::kExact));
  std::vector<std::uint64_t> gens;
  for (auto& f : futures) gens.push_back(f.get()->generation());
  std::sort(gens.begin(), gens.end());
  EXPECT_EQ(gens, (std::vector<std::uint64_t>{2, 3, 4, 5, 6}));
  EXPECT_EQ(reg.pin()->generation(), 6u);
}

// Every generation g gets its own store; a reader's hits must match the
// full-scan oracle of exactly the generation it pinned.
TEST(Registry, ConcurrentReadersSeeOneGeneration) {
  constexpr int kRebuilds = 10;
  constexpr int kReaders = 100;
  std::mt19937_64 rng(15);
  std::vector<EmbeddingMap> stores;
  for (int g = 0; g <= kRebuilds; ++g) stores.push_back(random_map(rng, 300, 8));
  std::vector<Embedding> queries;
  for (int i = 0; i < 8; ++i) queries.push_back(gaussian(rng, 8));
  std::vector<std::vector<std::vector<std::string>>> expected(stores.size());
  for (std::size_t g = 0; g < stores.size(); ++g) {
    for (const auto& q : queries) expected[g].push_back(oracle(stores[g], q, 10));
  }

  SnapshotRegistry reg(build_index(stores[0], IndexMode::kExact));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0}, reads{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < kReaders; ++r) {
    readers.emplace_back([&, r] {
      std::size_t i = r;
      do {
        const auto snap = reg.pin();
        const std::uint64_t g = snap->generation();
        const auto& q = queries[i++ % queries.size()];
        const auto hits = snap->search_top_k(q, 10);
        bool ok = g >= 1 && g <= stores.size();
        for (const auto& h : hits) ok = ok && h.generation == g;
        ok = ok && ids(hits) == expected[g - 1][(i - 1) % queries.size()];
        if (!ok) ++bad;
        ++reads;
      } while (!done.load());
    });
  }
  std::vector<std::shared_future<SnapshotRegistry::SnapshotPtr>> futures;
  for (int g = 1; g <= kRebuilds; ++g) {
    futures.push_back(reg.rebuild_async(stores[g], IndexMode::kExact));
    futures.back().wait();
  }
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_GE(reads.load(), kReaders);
  EXPECT_EQ(reg.pin()->generation(), static_cast<std::uint64_t>(kRebuilds + 1));
}

}  // namespace
}  // namespace replug
