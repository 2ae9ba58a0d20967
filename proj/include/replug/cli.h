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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "replug/json_io.h"
#include "replug/trainer.h"
#include "replug/vector_index.h"

namespace replug {

struct LmSettings {
  std::string kind = "mock";  // mock | http
  std::string mock_spec;
  std::string endpoint;
  std::string token;
  std::size_t max_in_flight = 1;
  std::size_t context_window = 4096;
  double requests_per_second = 0.0;
};

// Everything the subcommands share. Relative paths are resolved against the
// directory of the config file.
struct EngineConfig {
  std::string tokenizer = "whitespace";
  std::string vocab;
  std::string corpus;  // corpus manifest
  std::string train_docs;
  std::string eval_docs;  // default --eval for eval-lm and ablate
  std::string index;
  std::string checkpoint;  // trained encoder
  std::string base_checkpoint;  // untrained encoder; random init when empty
  IndexMode index_mode = IndexMode::kExact;
  LmSettings lm;
  std::size_t encoder_dim = 64;
  TrainingConfig training;
  std::size_t context_length = 128;
  std::size_t continuation_length = 128;
  std::optional<std::size_t> max_examples;
  std::size_t k = 10;
  std::size_t query_window = 128;
  std::uint64_t seed = 0;

  static EngineConfig from_json(const Json& j, const std::string& base_dir);
  static EngineConfig load(const std::string& path);
  Json to_json() const;
};

// Applies REPLUG_LM_ENDPOINT, REPLUG_LM_TOKEN and REPLUG_SEED.
void apply_environment(EngineConfig& config);

// Exit code 0 on success, 1 on domain errors, 2 on configuration or usage
// errors. Primary output goes to `out`, logs to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

}  // namespace replug
