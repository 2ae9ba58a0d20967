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

#include <stdexcept>
#include <string>
#include <string_view>

namespace replug {

enum class ErrorKind {
  kInputEncoding,
  kConfiguration,
  kArgument,
  kDegenerateInput,
  kDegenerateEmbedding,
  kDegenerateExample,
  kVocabulary,
  kContract,
  kTransport,
  kService,
  kCapability,
  kWindow,
  kDomain,
  kRetrievalUnavailable,
  kTraining,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported as replug::Error; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// HTTP failures keep the status code so retry policies can inspect it.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& message)
      : Error(ErrorKind::kService, "HTTP " + std::to_string(status) + ": " + message),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace replug
