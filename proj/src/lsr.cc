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

#include "replug/lsr.h"

#include <cmath>

#include "replug/error.h"
#include "replug/softmax.h"

namespace replug {

std::vector<double> retrieval_likelihood(std::span<const double> scores, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::kConfiguration, "gamma must be > 0");
  if (scores.empty()) throw Error(ErrorKind::kArgument, "retrieval_likelihood: no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorKind::kArgument, "non-finite retrieval score");
  }
  return softmax(scores, gamma);
}

std::vector<double> lm_likelihood(std::span<const ContinuationScore> scores, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::kConfiguration, "beta must be > 0");
  if (scores.empty()) throw Error(ErrorKind::kArgument, "lm_likelihood: no scores");
  std::vector<double> normalized;
  normalized.reserve(scores.size());
  for (const auto& s : scores) {
    if (s.token_count == 0) {
      throw Error(ErrorKind::kDegenerateExample, "continuation has no tokens");
    }
    const double v = s.total_logprob / static_cast<double>(s.token_count);
    if (std::isnan(v)) throw Error(ErrorKind::kArgument, "NaN continuation score");
    normalized.push_back(v);
  }
  return softmax(normalized, beta);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::kDomain, "kl_divergence: length mismatch " +
                                        std::to_string(p.size()) + " vs " +
                                        std::to_string(q.size()));
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw Error(ErrorKind::kDomain, "negative probability");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw Error(ErrorKind::kDomain, "q is 0 where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can push a true zero slightly negative.
  return kl < 0.0 ? 0.0 : kl;
}

std::vector<double> kl_score_gradient(std::span<const double> p, std::span<const double> q,
                                      double gamma) {
  const double kl = kl_divergence(p, q);
  std::vector<double> g(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    g[i] = p[i] * (std::log(p[i] / q[i]) - kl) / gamma;
  }
  return g;
}

}  // namespace replug
