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

#include "replug/error.h"

#include <cstdio>

#include "replug/hash.h"

namespace replug {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInputEncoding: return "input-encoding error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kDegenerateInput: return "degenerate-input error";
    case ErrorKind::kDegenerateEmbedding: return "degenerate-embedding error";
    case ErrorKind::kDegenerateExample: return "degenerate-example error";
    case ErrorKind::kVocabulary: return "vocabulary error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kTransport: return "transport error";
    case ErrorKind::kService: return "service error";
    case ErrorKind::kCapability: return "capability error";
    case ErrorKind::kWindow: return "window error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kRetrievalUnavailable: return "retrieval-unavailable error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace replug
