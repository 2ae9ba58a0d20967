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

#include "replug/synthetic.h"

#include <algorithm>
#include <filesystem>
#include <random>

#include "replug/error.h"
#include "replug/json_io.h"

namespace replug {

namespace {

std::string key_word(std::size_t t, std::size_t f) {
  return "k" + std::to_string(t) + "_" + std::to_string(f);
}
std::string facet_word(std::size_t t, std::size_t f, std::size_t j) {
  return "w" + std::to_string(t) + "_" + std::to_string(f) + "_" + std::to_string(j);
}
std::string general_word(std::size_t t, std::size_t j) {
  return "g" + std::to_string(t) + "_" + std::to_string(j);
}
std::string filler_word(std::size_t j) { return "f" + std::to_string(j); }
std::string answer_word(std::size_t t) { return "a" + std::to_string(t); }
std::string topic_letter(std::size_t t) { return std::string(1, "ABCD"[t % 4]); }

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  // m distinct values from [0, n).
  std::vector<std::size_t> distinct(std::size_t n, std::size_t m) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + below(n - i)]);
    idx.resize(m);
    return idx;
  }

 private:
  std::mt19937_64 rng_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

class Builder {
 public:
  Builder(const HarnessOptions& o, std::uint64_t stream) : o_(o), g_(o.seed * 1000003 + stream) {}

  void add_general(std::vector<std::string>& out, std::size_t t, std::size_t n) {
    for (std::size_t j : g_.distinct(o_.general_words, std::min(n, o_.general_words))) {
      out.push_back(general_word(t, j));
    }
  }
  void add_filler(std::vector<std::string>& out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(filler_word(g_.below(o_.filler_words)));
  }

  // Keys with some of their facet words, general words and filler.
  std::string corpus_doc(std::size_t t) {
    const std::size_t len = 2 * o_.window;
    const auto facets = g_.distinct(o_.facets, o_.keys_per_doc);
    std::vector<std::string> words;
    const std::size_t per_facet = o_.words_per_facet / o_.keys_per_doc;
    for (std::size_t f : facets) {
      words.push_back(key_word(t, f));
      for (std::size_t j : g_.distinct(o_.words_per_facet, per_facet)) {
        words.push_back(facet_word(t, f, j));
      }
    }
    add_general(words, t, 6);
    add_filler(words, len - words.size());
    g_.shuffle(words);
    return join(words);
  }

  std::vector<std::string> context(std::size_t t) {
    std::vector<std::string> words;
    add_general(words, t, 5);
    add_filler(words, o_.window - words.size());
    g_.shuffle(words);
    return words;
  }

  // Equal counts from every facet of the topic.
  std::vector<std::string> continuation(std::size_t t) {
    std::vector<std::string> words;
    const std::size_t per_facet = 3;
    for (std::size_t f = 0; f < o_.facets; ++f) {
      for (std::size_t j : g_.distinct(o_.words_per_facet, per_facet)) {
        words.push_back(facet_word(t, f, j));
      }
    }
    add_general(words, t, 2);
    add_filler(words, o_.window - std::min(words.size(), o_.window));
    words.resize(o_.window);
    g_.shuffle(words);
    return words;
  }

  std::string question(std::size_t t) {
    std::vector<std::string> words;
    add_general(words, t, 4);
    return join(words);
  }

  Gen& gen() { return g_; }

 private:
  const HarnessOptions& o_;
  Gen g_;
};

std::string mc_text(const McItem& m) {
  std::string s = "Question: " + m.question + "\n";
  for (std::size_t i = 0; i < m.choices.size(); ++i) {
    s += std::string(1, static_cast<char>('A' + i)) + ". " + m.choices[i] + "\n";
  }
  return s + "Answer: " + *m.gold + "\n";
}

}  // namespace

Harness make_harness(const HarnessOptions& o) {
  if (o.topics < 1 || o.facets < 2 || o.keys_per_doc < 1 || o.keys_per_doc > o.facets || o.words_per_facet < 2 || o.window < 8 ||
      o.general_words < 6 || o.filler_words < 1) {
    throw Error(ErrorKind::kConfiguration, "harness options out of range");
  }
  Harness h;
  h.options = o;

  Builder corpus(o, 1);
  for (std::size_t i = 0; i < o.corpus_docs; ++i) {
    const std::size_t t = i % o.topics;
    const std::string id = "c" + std::to_string(i);
    h.corpus_docs.push_back({id, corpus.corpus_doc(t)});
    h.source_topic[id] = t;
  }

  Builder train(o, 2);
  for (std::size_t i = 0; i < o.train_examples; ++i) {
    const std::size_t t = i % o.topics;
    auto words = train.context(t);
    const auto cont = train.continuation(t);
    words.insert(words.end(), cont.begin(), cont.end());
    const std::string id = "t" + std::to_string(i);
    h.train_docs.push_back({id, join(words)});
    h.source_topic[id] = t;
  }

  Builder eval(o, 3);
  for (std::size_t i = 0; i < o.eval_docs; ++i) {
    const std::size_t t = i % o.topics;
    auto words = eval.context(t);
    const auto cont = eval.continuation(t);
    words.insert(words.end(), cont.begin(), cont.end());
    h.eval_docs.push_back({"e" + std::to_string(i), join(words)});
  }

  Builder probe(o, 4);
  for (std::size_t i = 0; i < o.probe_queries; ++i) {
    const std::size_t t = i % o.topics;
    h.probe_queries.emplace_back(join(probe.context(t)), t);
  }

  Builder items(o, 5);
  const std::size_t n_choices = std::min<std::size_t>(4, o.topics);
  auto make_mc = [&](std::size_t t, const std::string& id) {
    McItem m;
    m.id = id;
    m.question = items.question(t);
    const std::size_t gold = static_cast<std::size_t>("ABCD"[t % 4] - 'A');
    for (std::size_t c = 0; c < n_choices; ++c) {
      m.choices.push_back(answer_word(c == gold ? t : (t + 1 + c) % o.topics));
    }
    if (gold < n_choices) m.gold = topic_letter(t);
    return m;
  };
  for (std::size_t i = 0; i < o.mc_items; ++i) {
    h.mc_items.push_back(make_mc(i % o.topics, "mc" + std::to_string(i)));
  }
  for (std::size_t i = 0; i < o.qa_items; ++i) {
    const std::size_t t = i % o.topics;
    h.qa_items.push_back({"qa" + std::to_string(i), items.question(t), {answer_word(t)}});
  }

  // Mock LM: bigram text and one rule per facet key.
  Builder lm(o, 6);
  for (std::size_t i = 0; i < 300; ++i) h.lm_corpus.push_back(lm.corpus_doc(i % o.topics));
  for (std::size_t t = 0; t < o.topics; ++t) {
    for (int rep = 0; rep < 6; ++rep) {
      h.lm_corpus.push_back("Question: " + lm.question(t) + "\nAnswer: " + answer_word(t) +
                            "\n");
    }
    h.lm_corpus.push_back(mc_text(make_mc(t, "")));
  }
  for (std::size_t t = 0; t < o.topics; ++t) {
    for (std::size_t f = 0; f < o.facets; ++f) {
      std::vector<std::string> boosted;
      for (std::size_t j = 0; j < o.words_per_facet; ++j) boosted.push_back(facet_word(t, f, j));
      boosted.push_back(answer_word(t));
      boosted.push_back(topic_letter(t));
      h.lm_rules.emplace_back(key_word(t, f), std::move(boosted));
    }
  }

  std::vector<std::string> texts = h.lm_corpus;
  for (const auto& d : h.corpus_docs) texts.push_back(d.text);
  for (const auto& d : h.train_docs) texts.push_back(d.text);
  for (const auto& d : h.eval_docs) texts.push_back(d.text);
  for (const auto& [q, t] : h.probe_queries) texts.push_back(q);
  for (const auto& m : h.mc_items) texts.push_back(mc_text(m));
  for (const auto& q : h.qa_items) texts.push_back(q.question + " " + q.golds.front());
  std::vector<std::string> labels = {"Knowledge:", "Question:", "Answer:", "A", "B", "C", "D"};
  for (std::size_t t = 0; t < o.topics; ++t) {
    for (std::size_t f = 0; f < o.facets; ++f) {
      labels.push_back(key_word(t, f));
      for (std::size_t j = 0; j < o.words_per_facet; ++j) labels.push_back(facet_word(t, f, j));
    }
    for (std::size_t j = 0; j < o.general_words; ++j) labels.push_back(general_word(t, j));
    labels.push_back(answer_word(t));
  }
  for (std::size_t j = 0; j < o.filler_words; ++j) labels.push_back(filler_word(j));
  texts.push_back(join(labels));
  h.tokenizer = WhitespaceTokenizer::fit(texts);
  return h;
}

Json Harness::mock_lm_spec() const {
  Json j;
  j["boost"] = options.boost;
  j["context_window"] = 4096;
  j["corpus"] = lm_corpus;
  j["rules"] = Json::array();
  for (const auto& [marker, boosted] : lm_rules) {
    j["rules"].push_back({{"marker", marker}, {"boosted", boosted}});
  }
  return j;
}

MockLm Harness::make_lm() const { return MockLm::from_json(mock_lm_spec(), tokenizer); }

ChunkOptions Harness::chunk_options() const {
  return ChunkOptions{2 * options.window, options.window, true};
}

ExampleOptions Harness::example_options() const {
  return ExampleOptions{options.window, options.window, std::nullopt, options.seed};
}

std::vector<TopicQuery> Harness::probe_set() const {
  std::vector<TopicQuery> out;
  for (const auto& [text, t] : probe_queries) out.push_back({tokenizer.tokenize(text), t});
  return out;
}

std::size_t chunk_topic(const TopicMap& topics, const std::string& doc_id) {
  auto it = topics.find(doc_id.substr(0, doc_id.find('#')));
  if (it == topics.end()) throw Error(ErrorKind::kArgument, "unknown chunk " + doc_id);
  return it->second;
}

std::size_t Harness::chunk_topic(const std::string& doc_id) const {
  return replug::chunk_topic(source_topic, doc_id);
}

void Harness::write(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  tokenizer.save((d / "vocab.txt").string());
  write_text_file((d / "mock_lm.json").string(), mock_lm_spec().dump(1) + "\n");
  write_raw_documents((d / "corpus.jsonl").string(), corpus_docs);
  write_raw_documents((d / "train.jsonl").string(), train_docs);
  write_eval_documents((d / "eval.jsonl").string(), eval_docs);
  write_mc_items((d / "mc.jsonl").string(), mc_items);
  write_qa_items((d / "qa.jsonl").string(), qa_items);
  std::string probe;
  for (const auto& [text, t] : probe_queries) {
    probe += Json{{"text", text}, {"topic", t}}.dump() + "\n";
  }
  write_text_file((d / "probe.jsonl").string(), probe);
  Json topics = Json::object();
  for (const auto& [id, t] : source_topic) topics[id] = t;
  write_text_file((d / "topics.json").string(), topics.dump() + "\n");
}

namespace {

template <typename Fn>
void rank_each(const EncoderParams& params, const IndexSnapshot& snapshot,
               std::span<const TopicQuery> queries, std::size_t k, Fn&& fn) {
  for (const auto& q : queries) fn(q, snapshot.search_exact(embed(params, q.tokens), k));
}

}  // namespace

double topic_mrr(const EncoderParams& params, const IndexSnapshot& snapshot,
                 std::span<const TopicQuery> queries, const TopicMap& topics) {
  if (queries.empty()) throw Error(ErrorKind::kArgument, "no probe queries");
  double total = 0.0;
  rank_each(params, snapshot, queries, snapshot.size(), [&](const TopicQuery& q, const auto& hits) {
    for (std::size_t r = 0; r < hits.size(); ++r) {
      if (chunk_topic(topics, hits[r].doc_id) == q.topic) {
        total += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  });
  return total / static_cast<double>(queries.size());
}

double topic_precision(const EncoderParams& params, const IndexSnapshot& snapshot,
                       std::span<const TopicQuery> queries, const TopicMap& topics,
                       std::size_t k) {
  if (queries.empty()) throw Error(ErrorKind::kArgument, "no probe queries");
  double total = 0.0;
  rank_each(params, snapshot, queries, k, [&](const TopicQuery& q, const auto& hits) {
    std::size_t same = 0;
    for (const auto& h : hits) same += chunk_topic(topics, h.doc_id) == q.topic ? 1 : 0;
    total += static_cast<double>(same) / static_cast<double>(hits.size());
  });
  return total / static_cast<double>(queries.size());
}

std::vector<TopicQuery> read_probe_queries(const std::string& path, const Tokenizer& tokenizer) {
  std::vector<TopicQuery> out;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    out.push_back({tokenizer.tokenize(j.at("text").get<std::string>()),
                   j.at("topic").get<std::size_t>()});
  });
  return out;
}

TopicMap read_topic_map(const std::string& path) {
  TopicMap out;
  const Json j = read_json_file(path);
  try {
    for (const auto& [id, t] : j.items()) out[id] = t.get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfiguration, path + ": " + e.what());
  }
  return out;
}

}  // namespace replug
