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
#include <vector>

namespace replug {

// softmax(logits / temperature), computed after subtracting the max logit.
// Callers validate inputs; temperature must be > 0.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

// log(sum(exp(values))); -inf entries are allowed.
double log_sum_exp(std::span<const double> values);

}  // namespace replug
