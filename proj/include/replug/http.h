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

#include <chrono>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace replug {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";

  // Accepts "http://host[:port][/path]".
  static Endpoint parse(std::string_view url);
  std::string url() const;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::milliseconds timeout{30000};
};

// Spaces requests at least 1/rate seconds apart. A rate <= 0 disables it.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second = 0.0);
  void acquire();

 private:
  std::chrono::nanoseconds interval_{0};
  std::chrono::steady_clock::time_point next_{};
  std::mutex mutex_;
};

struct HttpResult {
  int status = 0;
  std::string body;
  int retries = 0;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// POSTs a JSON body, retrying transport failures, 429 and 5xx responses with
// exponential backoff. Other non-2xx statuses fail immediately with
// ServiceError; exhausting retries yields kTransport or ServiceError.
HttpResult post_json(const Endpoint& endpoint, const std::string& body,
                     const RetryPolicy& policy, const Headers& headers = {},
                     RateLimiter* limiter = nullptr);

}  // namespace replug
