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

#include <span>
#include <string>
#include <vector>

#include "replug/lm.h"

namespace replug {

// P_R(d|x) over the retrieved set: softmax(scores / gamma).
std::vector<double> retrieval_likelihood(std::span<const double> scores, double gamma);

// Q(d|x,y): softmax over (total_logprob / token_count) / beta.
std::vector<double> lm_likelihood(std::span<const ContinuationScore> scores, double beta);

// Σ p_i ln(p_i / q_i), with 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// ∂ KL(P_R ‖ Q) / ∂ s_i where P_R = softmax(s / gamma) and Q is constant:
// (1/gamma) · P_i · (ln(P_i / Q_i) − KL).
std::vector<double> kl_score_gradient(std::span<const double> p, std::span<const double> q,
                                      double gamma);

struct LikelihoodPair {
  std::vector<std::string> doc_ids;
  std::vector<double> retrieval_probs;
  std::vector<double> lm_probs;
};

}  // namespace replug
