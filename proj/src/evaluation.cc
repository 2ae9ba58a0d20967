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

#include "replug/evaluation.h"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "replug/error.h"
#include "replug/hash.h"
#include "replug/log.h"

namespace replug {

Json EvalReport::to_json() const {
  Json j;
  j["task"] = task;
  j["metric_value"] = metric_value;
  j["aggregation"] = aggregation;
  j["config_fingerprint"] = config_fingerprint;
  j["skipped"] = skipped;
  j["errors"] = errors;
  Json items = Json::array();
  for (const auto& it : per_item) {
    items.push_back({{"item_id", it.item_id}, {"value", it.value}, {"weight", it.weight}});
  }
  j["per_item"] = std::move(items);
  return j;
}

double EvalReport::aggregate() const {
  double num = 0.0;
  double den = 0.0;
  for (const auto& it : per_item) {
    num += it.value * it.weight;
    den += it.weight;
  }
  return den == 0.0 ? 0.0 : num / den;
}

std::string config_fingerprint(const Json& config) {
  // nlohmann's dump is compact and deterministic for a given key order.
  return hex64(fnv1a64(config.dump()));
}

namespace {

template <typename T, typename Fn>
std::vector<T> read_items(const std::string& path, Fn&& parse) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t line_no) {
    try {
      out.push_back(parse(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kConfiguration,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

void write_lines(const std::string& path, const std::vector<Json>& lines) {
  std::string out;
  for (const auto& j : lines) out += j.dump() + "\n";
  write_text_file(path, out);
}

}  // namespace

std::vector<EvalDocument> read_eval_documents(const std::string& path) {
  return read_items<EvalDocument>(path, [](const Json& j) {
    return EvalDocument{j.at("doc_id").get<std::string>(), j.at("text").get<std::string>()};
  });
}

std::vector<McItem> read_mc_items(const std::string& path) {
  return read_items<McItem>(path, [](const Json& j) {
    McItem m;
    m.id = j.at("id").get<std::string>();
    m.question = j.at("question").get<std::string>();
    m.choices = j.at("choices").get<std::vector<std::string>>();
    if (j.contains("gold") && !j["gold"].is_null()) m.gold = j["gold"].get<std::string>();
    return m;
  });
}

std::vector<QaItem> read_qa_items(const std::string& path) {
  return read_items<QaItem>(path, [](const Json& j) {
    return QaItem{j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                  j.at("golds").get<std::vector<std::string>>()};
  });
}

void write_eval_documents(const std::string& path, std::span<const EvalDocument> docs) {
  std::vector<Json> lines;
  for (const auto& d : docs) lines.push_back({{"doc_id", d.doc_id}, {"text", d.text}});
  write_lines(path, lines);
}

void write_mc_items(const std::string& path, std::span<const McItem> items) {
  std::vector<Json> lines;
  for (const auto& m : items) {
    Json j{{"id", m.id}, {"question", m.question}, {"choices", m.choices}};
    if (m.gold) j["gold"] = *m.gold;
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

void write_qa_items(const std::string& path, std::span<const QaItem> items) {
  std::vector<Json> lines;
  for (const auto& q : items) {
    lines.push_back({{"id", q.id}, {"question", q.question}, {"golds", q.golds}});
  }
  write_lines(path, lines);
}

WindowScorer plain_scorer(const LanguageModel& lm) {
  return [&lm](std::span<const TokenId> x, std::span<const TokenId> y) {
    check_window(x.size() + y.size(), lm.context_window());
    return lm.score_continuation(Prompt::bare(x), y).total_logprob;
  };
}

WindowScorer ensemble_scorer(const Engine& engine, std::size_t k) {
  return [&engine, k](std::span<const TokenId> x, std::span<const TokenId> y) {
    const Retrieval r = engine.retrieve(x, k);
    return ensemble_sequence_logprob(engine.lm(), x, y, r.docs, r.weights, engine.pool());
  };
}

EvalReport bits_per_byte(const WindowScorer& scorer, const Tokenizer& tokenizer,
                         std::span<const EvalDocument> docs, std::size_t window) {
  if (window < 1) throw Error(ErrorKind::kConfiguration, "BPB window must be >= 1");
  if (docs.empty()) throw Error(ErrorKind::kArgument, "no evaluation documents");
  EvalReport report;
  report.task = "lm-bpb";
  report.aggregation = "byte_weighted_mean";
  double total_bits = 0.0;
  double total_bytes = 0.0;
  for (const auto& doc : docs) {
    const TokenSeq tokens = tokenizer.tokenize(doc.text);
    if (tokens.size() <= window) {
      ++report.skipped;
      log().warn("BPB: document {} has no window to score", doc.doc_id);
      continue;
    }
    const std::span<const TokenId> all(tokens);
    const std::size_t bytes = tokenizer.detokenize(all).size() -
                              tokenizer.detokenize(all.first(window)).size();
    double nats = 0.0;
    for (std::size_t start = window; start < tokens.size(); start += window) {
      const std::size_t len = std::min(window, tokens.size() - start);
      nats += scorer(all.subspan(start - window, window), all.subspan(start, len));
    }
    const double bits = -nats / std::numbers::ln2;
    report.per_item.push_back({doc.doc_id, bits / static_cast<double>(bytes),
                               static_cast<double>(bytes)});
    total_bits += bits;
    total_bytes += static_cast<double>(bytes);
  }
  if (total_bytes == 0.0) throw Error(ErrorKind::kArgument, "BPB over zero bytes");
  report.metric_value = total_bits / total_bytes;
  return report;
}

namespace {

TokenId single_token(const Tokenizer& tokenizer, std::string_view text) {
  const TokenSeq t = tokenizer.tokenize(text);
  if (t.size() != 1) {
    throw Error(ErrorKind::kVocabulary,
                "'" + std::string(text) + "' is not a single token for " + tokenizer.id());
  }
  return t.front();
}

// Label, then the tail of the document that fits, then the rest of the prompt.
Prompt knowledge_prompt(const TokenSeq& label, std::span<const TokenId> doc,
                        const TokenSeq& rest, std::size_t reserve, std::size_t window) {
  check_window(label.size() + rest.size() + reserve, window);
  const std::size_t room = window - label.size() - rest.size() - reserve;
  const std::size_t keep = std::min(room, doc.size());
  Prompt p;
  p.tokens = label;
  p.tokens.insert(p.tokens.end(), doc.end() - static_cast<std::ptrdiff_t>(keep), doc.end());
  p.tokens.insert(p.tokens.end(), rest.begin(), rest.end());
  return p;
}

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::string mc_block(const McItem& item) {
  std::string s = "Question: " + item.question + "\n";
  for (std::size_t i = 0; i < item.choices.size(); ++i) {
    s += letter(i) + ". " + item.choices[i] + "\n";
  }
  return s + "Answer:";
}

std::vector<Prompt> prompts_for(const Engine& engine, const Retrieval& r, const TokenSeq& label,
                                const TokenSeq& rest, std::size_t reserve) {
  std::vector<Prompt> prompts;
  for (const DocumentChunk* d : r.docs) {
    prompts.push_back(knowledge_prompt(label, d->tokens, rest, reserve,
                                       engine.lm().context_window()));
  }
  return prompts;
}

double mean_of(const EvalReport& report) {
  double s = 0.0;
  for (const auto& it : report.per_item) s += it.value;
  return report.per_item.empty() ? 0.0 : s / static_cast<double>(report.per_item.size());
}

}  // namespace

EvalReport multiple_choice_eval(const Engine& engine, const Tokenizer& tokenizer,
                                std::span<const McItem> items, std::span<const McItem> shots,
                                const PromptOptions& options) {
  EvalReport report;
  report.task = "multiple-choice";
  report.aggregation = "mean";
  std::string shot_text;
  for (std::size_t i = 0; i < std::min(options.shots, shots.size()); ++i) {
    if (!shots[i].gold) continue;
    shot_text += mc_block(shots[i]) + " " + *shots[i].gold + "\n\n";
  }
  const TokenSeq label = tokenizer.tokenize("Knowledge: ");
  for (const auto& item : items) {
    if (!item.gold || item.choices.size() < 2) {
      ++report.skipped;
      log().warn("multiple-choice: item {} skipped (missing gold or < 2 choices)", item.id);
      continue;
    }
    double correct = 0.0;
    try {
      std::vector<TokenId> letters;
      for (std::size_t i = 0; i < item.choices.size(); ++i) {
        letters.push_back(single_token(tokenizer, letter(i)));
      }
      const TokenSeq rest = tokenizer.tokenize("\n" + shot_text + mc_block(item));
      const Retrieval r = engine.retrieve(tokenizer.tokenize(item.question), options.k);
      const auto prompts = prompts_for(engine, r, label, rest, 1);
      const auto dist = mix_next_token(engine.lm(), prompts, r.weights.weights, engine.pool());
      std::size_t best = 0;
      for (std::size_t i = 1; i < letters.size(); ++i) {
        if (dist.probs[letters[i]] > dist.probs[letters[best]]) best = i;
      }
      correct = letter(best) == *item.gold ? 1.0 : 0.0;
    } catch (const Error& e) {
      ++report.errors;
      log().error("multiple-choice: item {} failed: {}", item.id, e.what());
    }
    report.per_item.push_back({item.id, correct, 1.0});
  }
  report.metric_value = mean_of(report);
  return report;
}

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream words(cleaned);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool exact_match(std::string_view prediction, std::span<const std::string> golds) {
  const std::string p = normalize_answer(prediction);
  if (p.empty()) return false;
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return true;
  }
  return false;
}

EvalReport open_qa_eval(const Engine& engine, const Tokenizer& tokenizer,
                        std::span<const QaItem> items, std::span<const QaItem> shots,
                        const PromptOptions& options) {
  constexpr std::size_t kMaxAnswerTokens = 32;
  EvalReport report;
  report.task = "open-qa";
  report.aggregation = "mean";
  std::string shot_text;
  for (std::size_t i = 0; i < std::min(options.shots, shots.size()); ++i) {
    if (shots[i].golds.empty()) continue;
    shot_text += "Question: " + shots[i].question + "\nAnswer: " + shots[i].golds.front() + "\n";
  }
  const TokenSeq label = tokenizer.tokenize("Knowledge: ");
  const TokenId newline = single_token(tokenizer, "\n");
  const TokenId stops[] = {newline};
  for (const auto& item : items) {
    if (item.golds.empty()) {
      ++report.skipped;
      log().warn("open-qa: item {} has no gold answers", item.id);
      continue;
    }
    double correct = 0.0;
    try {
      const TokenSeq rest =
          tokenizer.tokenize("\n" + shot_text + "Question: " + item.question + "\nAnswer:");
      const Retrieval r = engine.retrieve(tokenizer.tokenize(item.question), options.k);
      const auto prompts = prompts_for(engine, r, label, rest, kMaxAnswerTokens);
      const TokenSeq answer = greedy_decode_prompts(engine.lm(), prompts, r.weights.weights,
                                                    kMaxAnswerTokens, stops, engine.pool());
      correct = exact_match(tokenizer.detokenize(answer), item.golds) ? 1.0 : 0.0;
    } catch (const Error& e) {
      ++report.errors;
      log().error("open-qa: item {} failed: {}", item.id, e.what());
    }
    report.per_item.push_back({item.id, correct, 1.0});
  }
  report.metric_value = mean_of(report);
  return report;
}

std::vector<AblationRow> ablation_sweep(const CorpusStore& corpus, const LanguageModel& lm,
                                        const Tokenizer& tokenizer,
                                        const RetrieverSet& retrievers,
                                        std::span<const EvalDocument> docs,
                                        std::span<const std::size_t> k_values,
                                        std::span<const std::string> modes,
                                        const EngineOptions& engine_options, TaskPool* pool) {
  std::vector<AblationRow> rows;
  for (const auto& mode : modes) {
    auto it = retrievers.find(mode);
    if (it == retrievers.end() || it->second == nullptr) {
      throw Error(ErrorKind::kConfiguration, "no retriever or checkpoint for mode " + mode);
    }
    const Engine engine(corpus, *it->second, lm, engine_options, pool);
    for (std::size_t k : k_values) {
      const auto report =
          bits_per_byte(ensemble_scorer(engine, k), tokenizer, docs, engine_options.query_window);
      rows.push_back({mode, k, report.metric_value});
    }
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "mode,k,bpb\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9f", r.bpb);
    out += r.mode + "," + std::to_string(r.k) + "," + buf + "\n";
  }
  return out;
}

}  // namespace replug
