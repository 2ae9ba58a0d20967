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

#include "replug/lm.h"

#include <numeric>

#include "replug/error.h"

namespace replug {

Prompt Prompt::with_document(std::span<const TokenId> document,
                             std::span<const TokenId> context, std::size_t reserve,
                             std::size_t window) {
  check_window(context.size() + reserve, window);
  const std::size_t room = window - context.size() - reserve;
  const std::size_t keep = std::min(room, document.size());
  Prompt p;
  p.tokens.reserve(keep + context.size());
  p.tokens.insert(p.tokens.end(), document.end() - static_cast<std::ptrdiff_t>(keep),
                  document.end());
  p.tokens.insert(p.tokens.end(), context.begin(), context.end());
  return p;
}

void check_window(std::size_t used, std::size_t window) {
  if (used > window) {
    throw Error(ErrorKind::kWindow, std::to_string(used) + " tokens exceed the context window of " +
                                        std::to_string(window));
  }
}

ContinuationScore make_score(std::vector<double> per_token_logprobs) {
  ContinuationScore s;
  s.token_count = per_token_logprobs.size();
  s.total_logprob = std::accumulate(per_token_logprobs.begin(), per_token_logprobs.end(), 0.0);
  s.per_token_logprobs = std::move(per_token_logprobs);
  return s;
}

}  // namespace replug
