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

#include "replug/stub_servers.h"

#include <random>
#include <thread>

#include "httplib.h"
#include "replug/error.h"
#include "replug/hash.h"
#include "replug/json_io.h"

namespace replug {

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
};

StubServer::StubServer() : impl_(std::make_unique<Impl>()) {}

StubServer::~StubServer() { stop(); }

std::string StubServer::url(const std::string& path) const {
  return "http://127.0.0.1:" + std::to_string(port_) + path;
}

void StubServer::start(int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else if (impl_->server.bind_to_port("127.0.0.1", port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorKind::kTransport, "stub server failed to bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void StubServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

bool StubServer::inject_failure(void* response) {
  const int n = requests_++;
  if (n >= failures_.count) return false;
  auto& res = *static_cast<httplib::Response*>(response);
  res.status = failures_.status;
  res.set_content(R"({"error":"injected failure"})", "application/json");
  return true;
}

EmbedStub::EmbedStub(std::size_t dim, FailureInjection failures, int port,
                     std::optional<std::size_t> declared_dim)
    : dim_(dim), declared_dim_(declared_dim.value_or(dim)) {
  failures_ = failures;
  impl_->server.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
    if (inject_failure(&res)) return;
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      return;
    }
    if (!body.contains("texts") || !body["texts"].is_array()) {
      res.status = 400;
      return;
    }
    Json out;
    out["dim"] = declared_dim_;
    out["embeddings"] = Json::array();
    for (const auto& t : body["texts"]) {
      out["embeddings"].push_back(fixed_vector(t.get<std::string>(), dim_));
    }
    res.set_content(out.dump(), "application/json");
  });
  start(port);
}

std::vector<double> EmbedStub::fixed_vector(const std::string& text, std::size_t dim) {
  std::mt19937_64 rng(fnv1a64(text));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = dist(rng);
  return v;
}

LmStub::LmStub(const LanguageModel& lm, const Tokenizer& tokenizer, LmStubOptions options)
    : lm_(lm), tokenizer_(tokenizer), options_(std::move(options)) {
  failures_ = options_.failures;
  impl_->server.Post("/v1/lm", [this](const httplib::Request& req, httplib::Response& res) {
    if (!options_.required_token.empty() &&
        req.get_header_value("Authorization") != "Bearer " + options_.required_token) {
      res.status = 401;
      res.set_content(R"({"error":"unauthorized"})", "application/json");
      return;
    }
    if (inject_failure(&res)) return;
    try {
      const Json body = Json::parse(req.body);
      const std::string want = body.at("want").get<std::string>();
      const Prompt prompt{tokenizer_.tokenize(body.at("prompt").get<std::string>())};
      Json out = Json::object();
      if (want == "score") {
        const auto cont = tokenizer_.tokenize(body.at("continuation").get<std::string>());
        std::vector<double> lp = options_.fixed_logprobs
                                     ? *options_.fixed_logprobs
                                     : lm_.score_continuation(prompt, cont).per_token_logprobs;
        if (!options_.omit_results) out["logprobs"] = lp;
      } else if (want == "dist") {
        auto dist = lm_.next_token_distribution(prompt);
        if (!options_.omit_results) out["probs"] = dist.probs;
      } else {
        res.status = 400;
        return;
      }
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      Json err;
      err["error"] = e.what();
      res.set_content(err.dump(), "application/json");
    }
  });
  start(options_.port);
}

}  // namespace replug
