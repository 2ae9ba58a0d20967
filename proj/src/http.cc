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

#include "replug/http.h"

#include <algorithm>
#include <thread>

#include "httplib.h"
#include "replug/error.h"
#include "replug/log.h"

namespace replug {

Endpoint Endpoint::parse(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme) {
    throw Error(ErrorKind::kConfiguration, "endpoint must start with http://: " + std::string(url));
  }
  url.remove_prefix(kScheme.size());
  Endpoint e;
  const auto slash = url.find('/');
  std::string_view authority = url.substr(0, slash);
  e.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    try {
      e.port = std::stoi(std::string(authority.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfiguration, "bad port in endpoint " + std::string(url));
    }
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw Error(ErrorKind::kConfiguration, "endpoint has no host");
  e.host = std::string(authority);
  return e;
}

std::string Endpoint::url() const {
  return "http://" + host + ":" + std::to_string(port) + path;
}

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0) {
    interval_ = std::chrono::nanoseconds(static_cast<long long>(1e9 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpResult post_json(const Endpoint& endpoint, const std::string& body,
                     const RetryPolicy& policy, const Headers& headers,
                     RateLimiter* limiter) {
  httplib::Client client(endpoint.host, endpoint.port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto backoff = policy.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    if (limiter) limiter->acquire();
    auto res = client.Post(endpoint.path, hdrs, body, "application/json");
    const bool last = attempt >= policy.max_retries;
    if (!res) {
      const std::string what = httplib::to_string(res.error());
      if (last) {
        throw Error(ErrorKind::kTransport, endpoint.url() + ": " + what + " after " +
                                               std::to_string(attempt) + " retries");
      }
      log().warn("POST {} failed ({}), retry {} in {} ms", endpoint.url(), what, attempt + 1,
                 backoff.count());
    } else if (res->status >= 200 && res->status < 300) {
      return {res->status, res->body, attempt};
    } else if (!retryable_status(res->status) || last) {
      throw ServiceError(res->status, endpoint.url() + ": " + res->body);
    } else {
      log().warn("POST {} returned {}, retry {} in {} ms", endpoint.url(), res->status,
                 attempt + 1, backoff.count());
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(policy.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(
                           static_cast<double>(backoff.count()) * policy.multiplier)));
  }
}

}  // namespace replug
