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
#include <cmath>
#include <numeric>
#include <random>

#include "replug/error.h"
#include "replug/lsr.h"
#include "replug/softmax.h"
#include "test_util.h"

namespace replug {
namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

ContinuationScore per_token(double lp, std::size_t n) {
  return make_score(std::vector<double>(n, lp));
}

TEST(RetrievalLikelihood, Examples) {
  const std::vector<double> eq{0.3, 0.3, 0.3, 0.3};
  for (double g : {0.01, 1.0, 50.0}) {
    for (double p : retrieval_likelihood(eq, g)) EXPECT_NEAR(p, 0.25, 1e-15);
  }
  const std::vector<double> s{1.0, 0.0};
  const auto p = retrieval_likelihood(s, 0.1);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(p[0], 0.9999546, 1e-7);
  EXPECT_NEAR(p[1], 0.0000454, 1e-7);
  const auto hot = retrieval_likelihood(s, 1e6);
  EXPECT_NEAR(hot[0], 0.5, 1e-6);
  EXPECT_EQ(kind_of([&] { retrieval_likelihood(s, 0.0); }), ErrorKind::kConfiguration);
  EXPECT_EQ(kind_of([&] { retrieval_likelihood(s, -1.0); }), ErrorKind::kConfiguration);
}

TEST(RetrievalLikelihood, SharpensAsGammaFalls) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s(2 + i % 8);
    for (auto& v : s) v = u(rng);
    const auto top = std::max_element(s.begin(), s.end()) - s.begin();
    double prev = 0.0;
    for (double g : {10.0, 1.0, 0.5, 0.1, 0.05, 0.01}) {
      const double p = retrieval_likelihood(s, g)[top];
      EXPECT_GE(p, prev - 1e-15);
      prev = p;
    }
    auto t = s;
    for (auto& v : t) v += 3.0;
    const auto a = retrieval_likelihood(s, 0.1);
    const auto b = retrieval_likelihood(t, 0.1);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(LmLikelihood, Examples) {
  const std::vector<ContinuationScore> same{per_token(-1.5, 4), per_token(-1.5, 4),
                                            per_token(-1.5, 4)};
  for (double q : lm_likelihood(same, 0.1)) EXPECT_NEAR(q, 1.0 / 3.0, 1e-15);
  // Length-normalized: -1 and -2 per token regardless of length.
  const std::vector<ContinuationScore> two{per_token(-1.0, 5), per_token(-2.0, 3)};
  const auto q = lm_likelihood(two, 0.1);
  EXPECT_NEAR(q[0], 0.9999546, 1e-7);
  EXPECT_NEAR(q[1], 0.0000454, 1e-7);
  const std::vector<ContinuationScore> swapped{two[1], two[0]};
  const auto r = lm_likelihood(swapped, 0.1);
  EXPECT_DOUBLE_EQ(r[0], q[1]);
  EXPECT_DOUBLE_EQ(r[1], q[0]);
  EXPECT_EQ(kind_of([&] { lm_likelihood(two, 0.0); }), ErrorKind::kConfiguration);
  const std::vector<ContinuationScore> empty{per_token(-1.0, 2), make_score({})};
  EXPECT_EQ(kind_of([&] { lm_likelihood(empty, 0.1); }), ErrorKind::kDegenerateExample);
}

TEST(Kl, HandValues) {
  const std::vector<double> a{0.5, 0.5}, b{0.9, 0.1}, one{1.0, 0.0};
  EXPECT_NEAR(kl_divergence(a, b), 0.5 * std::log(25.0 / 9.0), 1e-12);
  EXPECT_NEAR(kl_divergence(a, b), 0.5108, 1e-4);
  EXPECT_NEAR(kl_divergence(one, a), std::log(2.0), 1e-12);
  EXPECT_EQ(kl_divergence(a, a), 0.0);
}

TEST(Kl, Errors) {
  const std::vector<double> a{0.5, 0.5}, z{1.0, 0.0}, three{0.2, 0.3, 0.5};
  EXPECT_EQ(kind_of([&] { kl_divergence(a, three); }), ErrorKind::kDomain);
  EXPECT_EQ(kind_of([&] { kl_divergence(a, z); }), ErrorKind::kDomain);
  EXPECT_NO_THROW(kl_divergence(z, a));
}

TEST(Kl, NonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 2 + i % 10;
    const auto p = testing::random_distribution(rng, n);
    const auto q = testing::random_distribution(rng, n);
    EXPECT_GE(kl_divergence(p, q), 0.0);
    EXPECT_GT(kl_divergence(p, q), 1e-12);
    EXPECT_LE(kl_divergence(p, p), 1e-12);
  }
}

TEST(Kl, ScoreGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + i % 6;
    const double gamma = (i % 2) ? 0.1 : 0.7;
    std::vector<double> s(n);
    for (auto& v : s) v = u(rng);
    const auto q = testing::random_distribution(rng, n);
    const auto p = retrieval_likelihood(s, gamma);
    const auto g = kl_score_gradient(p, q, gamma);
    for (std::size_t j = 0; j < n; ++j) {
      auto up = s, down = s;
      up[j] += h;
      down[j] -= h;
      const double fd = (kl_divergence(retrieval_likelihood(up, gamma), q) -
                         kl_divergence(retrieval_likelihood(down, gamma), q)) /
                        (2 * h);
      EXPECT_NEAR(g[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(Kl, GradientVanishesAtFixedPoint) {
  const std::vector<double> s{0.2, 0.2, 0.2};
  const auto p = retrieval_likelihood(s, 0.1);
  const auto g = kl_score_gradient(p, p, 0.1);
  for (double v : g) EXPECT_LT(std::abs(v), 1e-12);
}

TEST(Softmax, Basics) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto p = softmax(x);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(p[2] / p[1], std::exp(1.0), 1e-12);
  EXPECT_NEAR(log_sum_exp(x), std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-12);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(softmax(big)[0], 0.5, 1e-15);
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
}

}  // namespace
}  // namespace replug
