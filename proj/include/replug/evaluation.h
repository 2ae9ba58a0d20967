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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "replug/ensemble.h"
#include "replug/json_io.h"
#include "replug/lm.h"
#include "replug/tokenizer.h"

namespace replug {

struct EvalItem {
  std::string item_id;
  double value = 0.0;
  double weight = 1.0;
};

struct EvalReport {
  std::string task;  // lm-bpb | multiple-choice | open-qa
  double metric_value = 0.0;
  std::string aggregation;  // byte_weighted_mean | mean
  std::vector<EvalItem> per_item;
  std::string config_fingerprint;
  std::size_t skipped = 0;
  std::size_t errors = 0;

  Json to_json() const;
  // Recomputes the aggregation from per_item.
  double aggregate() const;
};

// FNV-1a of the canonical (compact, key-ordered) JSON dump.
std::string config_fingerprint(const Json& config);

struct EvalDocument {
  std::string doc_id;
  std::string text;
};

struct McItem {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::optional<std::string> gold;  // "A".."D"
};

struct QaItem {
  std::string id;
  std::string question;
  std::vector<std::string> golds;
};

std::vector<EvalDocument> read_eval_documents(const std::string& path);
std::vector<McItem> read_mc_items(const std::string& path);
std::vector<QaItem> read_qa_items(const std::string& path);
void write_eval_documents(const std::string& path, std::span<const EvalDocument> docs);
void write_mc_items(const std::string& path, std::span<const McItem> items);
void write_qa_items(const std::string& path, std::span<const QaItem> items);

// Natural-log probability of y given x.
using WindowScorer =
    std::function<double(std::span<const TokenId> x, std::span<const TokenId> y)>;

WindowScorer plain_scorer(const LanguageModel& lm);
// Retrieves k documents for each x and scores y with the fixed ensemble.
WindowScorer ensemble_scorer(const Engine& engine, std::size_t k);

// Each document is cut into non-overlapping windows of `window` tokens.
// Window 0 only conditions; window i is scored given window i - 1. The byte
// count of a document is the UTF-8 length of its detokenized text minus that
// of window 0. Documents with a single window are skipped.
EvalReport bits_per_byte(const WindowScorer& scorer, const Tokenizer& tokenizer,
                         std::span<const EvalDocument> docs, std::size_t window);

struct PromptOptions {
  std::size_t k = 10;
  std::size_t shots = 0;
};

// "Knowledge: {doc}\n", shots, then "Question: {q}\nA. ..\nAnswer:"; the
// prediction is the letter with the highest ensembled next-token probability.
EvalReport multiple_choice_eval(const Engine& engine, const Tokenizer& tokenizer,
                                std::span<const McItem> items, std::span<const McItem> shots,
                                const PromptOptions& options);

std::string normalize_answer(std::string_view text);
bool exact_match(std::string_view prediction, std::span<const std::string> golds);

// "Knowledge: {doc}\n", shots, then "Question: {q}\nAnswer:"; greedy ensemble
// decoding up to 32 tokens or a newline.
EvalReport open_qa_eval(const Engine& engine, const Tokenizer& tokenizer,
                        std::span<const QaItem> items, std::span<const QaItem> shots,
                        const PromptOptions& options);

struct AblationRow {
  std::string mode;
  std::size_t k = 0;
  double bpb = 0.0;
};

// mode name -> retriever; "random", "replug" and "lsr" are the usual modes.
using RetrieverSet = std::map<std::string, const Retriever*>;

std::vector<AblationRow> ablation_sweep(const CorpusStore& corpus, const LanguageModel& lm,
                                        const Tokenizer& tokenizer,
                                        const RetrieverSet& retrievers,
                                        std::span<const EvalDocument> docs,
                                        std::span<const std::size_t> k_values,
                                        std::span<const std::string> modes,
                                        const EngineOptions& engine_options,
                                        TaskPool* pool = nullptr);

std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace replug
