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

#include "replug/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "replug/corpus.h"
#include "replug/encoder.h"
#include "replug/ensemble.h"
#include "replug/error.h"
#include "replug/evaluation.h"
#include "replug/log.h"
#include "replug/mock_lm.h"
#include "replug/remote.h"
#include "replug/stub_servers.h"
#include "replug/synthetic.h"
#include "replug/task_pool.h"
#include "replug/tokenizer.h"

namespace replug {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
void read_field(const Json& j, const char* key, T& into) {
  if (j.contains(key) && !j[key].is_null()) into = j[key].get<T>();
}

}  // namespace

EngineConfig EngineConfig::from_json(const Json& j, const std::string& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::kConfiguration, "config must be a JSON object");
  EngineConfig c;
  try {
    read_field(j, "tokenizer", c.tokenizer);
    read_field(j, "vocab", c.vocab);
    read_field(j, "corpus", c.corpus);
    read_field(j, "train_docs", c.train_docs);
    read_field(j, "eval_docs", c.eval_docs);
    read_field(j, "index", c.index);
    read_field(j, "checkpoint", c.checkpoint);
    read_field(j, "base_checkpoint", c.base_checkpoint);
    if (j.contains("index_mode")) c.index_mode = parse_index_mode(j["index_mode"].get<std::string>());
    if (j.contains("lm")) {
      const Json& lm = j["lm"];
      read_field(lm, "kind", c.lm.kind);
      read_field(lm, "mock_spec", c.lm.mock_spec);
      read_field(lm, "endpoint", c.lm.endpoint);
      read_field(lm, "max_in_flight", c.lm.max_in_flight);
      read_field(lm, "context_window", c.lm.context_window);
      read_field(lm, "requests_per_second", c.lm.requests_per_second);
    }
    if (j.contains("encoder")) read_field(j["encoder"], "dim", c.encoder_dim);
    if (j.contains("training")) c.training = TrainingConfig::from_json(j["training"]);
    if (j.contains("data")) {
      const Json& d = j["data"];
      read_field(d, "context_length", c.context_length);
      read_field(d, "continuation_length", c.continuation_length);
      if (d.contains("max_examples")) c.max_examples = d["max_examples"].get<std::size_t>();
    }
    if (j.contains("inference")) {
      read_field(j["inference"], "k", c.k);
      read_field(j["inference"], "query_window", c.query_window);
    }
    read_field(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfiguration, std::string("config: ") + e.what());
  }
  for (std::string* p : {&c.vocab, &c.corpus, &c.train_docs, &c.eval_docs, &c.index, &c.checkpoint,
                         &c.base_checkpoint, &c.lm.mock_spec}) {
    *p = resolve(base_dir, *p);
  }
  c.training.seed = c.seed;
  return c;
}

EngineConfig EngineConfig::load(const std::string& path) {
  return from_json(read_json_file(path), fs::path(path).parent_path().string());
}

Json EngineConfig::to_json() const {
  Json j;
  j["tokenizer"] = tokenizer;
  j["vocab"] = vocab;
  j["corpus"] = corpus;
  j["train_docs"] = train_docs;
  j["eval_docs"] = eval_docs;
  j["index"] = index;
  j["checkpoint"] = checkpoint;
  j["base_checkpoint"] = base_checkpoint;
  j["index_mode"] = index_mode == IndexMode::kExact ? "exact" : "approximate";
  j["lm"] = {{"kind", lm.kind},
             {"mock_spec", lm.mock_spec},
             {"endpoint", lm.endpoint},
             {"max_in_flight", lm.max_in_flight},
             {"context_window", lm.context_window},
             {"requests_per_second", lm.requests_per_second}};
  j["encoder"] = {{"dim", encoder_dim}};
  Json training_json = training.to_json();
  training_json.erase("seed");
  j["training"] = std::move(training_json);
  j["data"] = {{"context_length", context_length}, {"continuation_length", continuation_length}};
  if (max_examples) j["data"]["max_examples"] = *max_examples;
  j["inference"] = {{"k", k}, {"query_window", query_window}};
  j["seed"] = seed;
  return j;
}

void apply_environment(EngineConfig& config) {
  if (const char* v = std::getenv("REPLUG_LM_ENDPOINT"); v != nullptr && *v != '\0') {
    config.lm.endpoint = v;
  }
  if (const char* v = std::getenv("REPLUG_LM_TOKEN"); v != nullptr && *v != '\0') {
    config.lm.token = v;
  }
  if (const char* v = std::getenv("REPLUG_SEED"); v != nullptr && *v != '\0') {
    try {
      std::size_t used = 0;
      config.seed = std::stoull(v, &used);
      if (used != std::string(v).size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfiguration, std::string("REPLUG_SEED is not an integer: ") + v);
    }
    config.training.seed = config.seed;
  }
}

namespace {

// Config-file options shared by most subcommands; flags override the file.
struct CommonFlags {
  std::string config;
  std::optional<std::string> lm;
  std::optional<std::size_t> k;
  std::optional<std::size_t> query_window;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus;
  std::optional<std::string> checkpoint;
  std::optional<std::string> index_mode;

  void attach(CLI::App* app, bool config_required = true, bool with_k = true) {
    auto* c = app->add_option("--config", config, "engine config JSON");
    if (config_required) c->required();
    app->add_option("--lm", lm, "mock | http");
    if (with_k) app->add_option("--k", k, "documents per query");
    app->add_option("--query-window", query_window, "retrieval query tokens");
    app->add_option("--seed", seed, "seed");
    app->add_option("--corpus", corpus, "corpus manifest");
    app->add_option("--checkpoint", checkpoint, "trained encoder checkpoint");
    app->add_option("--index-mode", index_mode, "exact | approximate");
  }

  EngineConfig resolve_config() const {
    EngineConfig c = config.empty() ? EngineConfig{} : EngineConfig::load(config);
    if (lm) c.lm.kind = *lm;
    if (k) c.k = *k;
    if (query_window) c.query_window = *query_window;
    if (seed) {
      c.seed = *seed;
      c.training.seed = *seed;
    }
    if (corpus) c.corpus = *corpus;
    if (checkpoint) c.checkpoint = *checkpoint;
    if (index_mode) c.index_mode = parse_index_mode(*index_mode);
    apply_environment(c);
    if (c.k < 1) throw Error(ErrorKind::kConfiguration, "k must be >= 1");
    if (c.query_window < 1) throw Error(ErrorKind::kConfiguration, "query_window must be >= 1");
    return c;
  }
};

struct Runtime {
  EngineConfig config;
  std::unique_ptr<Tokenizer> tokenizer;
  std::unique_ptr<LanguageModel> lm;
  std::unique_ptr<TaskPool> pool;
  std::unique_ptr<CorpusStore> corpus;

  explicit Runtime(EngineConfig c) : config(std::move(c)) {
    tokenizer = make_tokenizer(config.tokenizer, config.vocab);
  }

  void load_lm() {
    if (config.lm.kind == "mock") {
      if (config.lm.mock_spec.empty()) {
        throw Error(ErrorKind::kConfiguration, "lm.mock_spec is required for the mock LM");
      }
      auto mock = MockLm::from_json(read_json_file(config.lm.mock_spec), *tokenizer);
      lm = std::make_unique<MockLm>(std::move(mock));
    } else if (config.lm.kind == "http") {
      if (config.lm.endpoint.empty()) {
        throw Error(ErrorKind::kConfiguration, "the http LM needs an endpoint");
      }
      HttpLmOptions o;
      o.endpoint = Endpoint::parse(config.lm.endpoint);
      o.auth_token = config.lm.token;
      o.requests_per_second = config.lm.requests_per_second;
      o.context_window = config.lm.context_window;
      lm = std::make_unique<HttpLm>(std::move(o), *tokenizer);
    } else {
      throw Error(ErrorKind::kConfiguration, "unknown lm kind: " + config.lm.kind);
    }
    if (config.lm.max_in_flight > 1) pool = std::make_unique<TaskPool>(config.lm.max_in_flight);
  }

  void load_corpus_store() {
    if (config.corpus.empty()) throw Error(ErrorKind::kConfiguration, "no corpus manifest");
    corpus = std::make_unique<CorpusStore>(load_corpus(config.corpus, *tokenizer).chunks);
  }

  std::shared_ptr<const EncoderParams> base_encoder() const {
    if (!config.base_checkpoint.empty()) {
      return std::make_shared<const EncoderParams>(load_checkpoint(config.base_checkpoint));
    }
    return std::make_shared<const EncoderParams>(
        EncoderParams::random(tokenizer->vocab_size(), config.encoder_dim, config.seed));
  }

  std::shared_ptr<const EncoderParams> trained_encoder() const {
    if (config.checkpoint.empty() || !fs::exists(config.checkpoint)) {
      throw Error(ErrorKind::kConfiguration,
                  "lsr mode needs a trained encoder checkpoint (missing: '" +
                      config.checkpoint + "')");
    }
    return std::make_shared<const EncoderParams>(load_checkpoint(config.checkpoint));
  }

  std::shared_ptr<const EncoderParams> encoder(const std::string& mode) const {
    auto params = mode == "lsr" ? trained_encoder() : base_encoder();
    if (params->vocab_size() != tokenizer->vocab_size()) {
      throw Error(ErrorKind::kConfiguration, "encoder vocabulary size does not match tokenizer");
    }
    return params;
  }
};

// A retriever plus whatever it needs to stay alive.
struct RetrieverBundle {
  std::shared_ptr<const EncoderParams> params;
  std::unique_ptr<SnapshotRegistry> registry;
  std::unique_ptr<Retriever> retriever;
};

RetrieverBundle make_retriever(const Runtime& rt, const std::string& mode) {
  RetrieverBundle b;
  if (mode == "random") {
    b.retriever = std::make_unique<RandomRetriever>(*rt.corpus, rt.config.seed);
    return b;
  }
  if (mode != "replug" && mode != "lsr") {
    throw Error(ErrorKind::kConfiguration, "unknown retrieval mode: " + mode);
  }
  b.params = rt.encoder(mode);
  b.registry = std::make_unique<SnapshotRegistry>(
      build_index(embed_corpus(*b.params, *rt.corpus), rt.config.index_mode));
  b.retriever = std::make_unique<DenseRetriever>(b.params, *b.registry);
  return b;
}

std::string default_mode(const EngineConfig& c) {
  return !c.checkpoint.empty() && fs::exists(c.checkpoint) ? "lsr" : "replug";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void emit(std::ostream& out, const Json& j, const std::optional<std::string>& file) {
  const std::string text = j.dump(2) + "\n";
  if (file) write_text_file(*file, text);
  out << text;
}

Json training_fingerprint_input(const EngineConfig& c, const std::string& task,
                                const std::string& mode, const std::string& data) {
  Json j = c.to_json();
  j["task"] = task;
  j["retrieval_mode"] = mode;
  j["data"]["eval_file"] = fs::path(data).filename().string();
  for (const char* key : {"vocab", "corpus", "train_docs", "eval_docs", "index", "checkpoint",
                          "base_checkpoint"}) {
    j[key] = fs::path(j[key].get<std::string>()).filename().string();
  }
  j["lm"]["mock_spec"] = fs::path(c.lm.mock_spec).filename().string();
  return j;
}

Json harness_config(const Harness& h) {
  Json j;
  j["tokenizer"] = "whitespace";
  j["vocab"] = "vocab.txt";
  j["corpus"] = "corpus/manifest.json";
  j["train_docs"] = "train.jsonl";
  j["eval_docs"] = "eval.jsonl";
  j["index"] = "index.rpix";
  j["checkpoint"] = "train/final.rpix";
  j["index_mode"] = "exact";
  j["lm"] = {{"kind", "mock"}, {"mock_spec", "mock_lm.json"}, {"max_in_flight", 1}};
  j["encoder"] = {{"dim", 32}};
  j["training"] = {{"gamma", 0.1},
                   {"beta", 0.1},
                   {"k_train", 20},
                   {"learning_rate", 0.01},
                   {"batch_size", 16},
                   {"warmup_ratio", 0.1},
                   {"refresh_interval_T", 100},
                   {"total_steps", 600}};
  j["data"] = {{"context_length", h.options.window},
               {"continuation_length", h.options.window}};
  j["inference"] = {{"k", 10}, {"query_window", h.options.window}};
  j["seed"] = h.options.seed;
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Retrieval-augmented LM engine with an ensembling reader and a trainable retriever",
               "replug"};
  app.require_subcommand(1);
  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "tokenize and chunk raw documents");
  std::string ingest_in, ingest_out, ingest_tok = "whitespace", ingest_vocab, ingest_exclude;
  std::size_t chunk_len = 128, min_tail = 32;
  bool no_dedup = false;
  ingest->add_option("--in", ingest_in, "raw documents JSONL {source_id, text}")->required();
  ingest->add_option("--out", ingest_out, "output directory")->required();
  ingest->add_option("--chunk-len", chunk_len, "tokens per chunk");
  ingest->add_option("--min-tail", min_tail, "shortest kept final chunk");
  ingest->add_option("--tokenizer", ingest_tok, "whitespace | byte");
  ingest->add_option("--vocab", ingest_vocab, "vocabulary file (fitted and written when absent)");
  ingest->add_option("--exclude", ingest_exclude, "raw documents whose sources are excluded");
  ingest->add_flag("--no-dedup", no_dedup, "keep duplicate chunks");
  ingest->callback([&] {
    action = [&] {
      const auto raw = read_raw_documents(ingest_in);
      std::vector<RawDocument> excluded_docs;
      if (!ingest_exclude.empty()) excluded_docs = read_raw_documents(ingest_exclude);
      fs::create_directories(ingest_out);
      std::string vocab = ingest_vocab;
      if (ingest_tok == "whitespace" && vocab.empty()) {
        std::vector<std::string> texts;
        for (const auto& d : raw) texts.push_back(d.text);
        for (const auto& d : excluded_docs) texts.push_back(d.text);
        vocab = (fs::path(ingest_out) / "vocab.txt").string();
        WhitespaceTokenizer::fit(texts).save(vocab);
      }
      const auto tokenizer = make_tokenizer(ingest_tok, vocab);
      std::set<std::string> excluded;
      for (const auto& d : excluded_docs) excluded.insert(d.source_id);
      const auto chunked =
          chunk_corpus(raw, *tokenizer, {chunk_len, min_tail, !no_dedup}, excluded);
      write_chunks((fs::path(ingest_out) / chunked.manifest.chunks_file).string(), chunked.chunks);
      const std::string manifest = (fs::path(ingest_out) / "manifest.json").string();
      write_manifest(manifest, chunked.manifest);
      emit(out,
           {{"manifest", manifest},
            {"chunks", chunked.chunks.size()},
            {"duplicates_dropped", chunked.duplicates_dropped},
            {"excluded_sources", excluded.size()},
            {"tokenizer_id", tokenizer->id()}},
           std::nullopt);
    };
  });

  // index
  auto* index = app.add_subcommand("index", "build, search or verify a vector index");
  index->require_subcommand(1);
  CommonFlags index_flags;
  std::optional<std::string> index_path;
  std::string index_encoder = "auto";
  auto add_index_common = [&](CLI::App* sub, bool needs_config) {
    index_flags.attach(sub, needs_config);
    sub->add_option("--index", index_path, "snapshot file");
    sub->add_option("--encoder", index_encoder, "auto | replug | lsr");
  };
  auto encoder_mode = [&](const EngineConfig& c) {
    return index_encoder == "auto" ? default_mode(c) : index_encoder;
  };
  auto* index_build = index->add_subcommand("build", "embed the corpus and write a snapshot");
  add_index_common(index_build, true);
  index_build->callback([&] {
    action = [&] {
      Runtime rt(index_flags.resolve_config());
      if (index_path) rt.config.index = *index_path;
      if (rt.config.index.empty()) throw Error(ErrorKind::kConfiguration, "no index path");
      rt.load_corpus_store();
      const auto params = rt.encoder(encoder_mode(rt.config));
      const auto snap =
          build_index(embed_corpus(*params, *rt.corpus), rt.config.index_mode);
      snap->save(rt.config.index);
      emit(out,
           {{"index", rt.config.index},
            {"count", snap->size()},
            {"dim", snap->dim()},
            {"generation", snap->generation()}},
           std::nullopt);
    };
  });
  auto* index_search = index->add_subcommand("search", "top-k documents for a query text");
  add_index_common(index_search, true);
  std::string search_query;
  index_search->add_option("--query", search_query, "query text")->required();
  index_search->callback([&] {
    action = [&] {
      Runtime rt(index_flags.resolve_config());
      if (index_path) rt.config.index = *index_path;
      const auto params = rt.encoder(encoder_mode(rt.config));
      const auto snap = IndexSnapshot::load(rt.config.index, rt.config.index_mode);
      const auto hits =
          snap->search_top_k(embed(*params, rt.tokenizer->tokenize(search_query)), rt.config.k);
      Json j = Json::array();
      for (const auto& h : hits) {
        j.push_back({{"doc_id", h.doc_id}, {"score", h.score}, {"generation", h.generation}});
      }
      emit(out, {{"hits", j}}, std::nullopt);
    };
  });
  auto* index_verify =
      index->add_subcommand("verify", "compare index search against a full-scan oracle");
  std::string verify_path;
  std::size_t verify_queries = 100;
  index_verify->add_option("--index", verify_path, "snapshot file")->required();
  index_verify->add_option("--queries", verify_queries, "stored vectors used as queries");
  index_verify->callback([&] {
    action = [&] {
      const auto snap = IndexSnapshot::load(verify_path, IndexMode::kExact);
      const auto approx = IndexSnapshot::load(verify_path, IndexMode::kApproximate);
      const std::size_t n = snap->size();
      for (std::size_t i = 0; i < n; ++i) {
        if (l2_norm(snap->vector(i)) == 0.0) {
          throw Error(ErrorKind::kDegenerateEmbedding, "zero vector for " + snap->ids()[i]);
        }
      }
      const std::size_t k = std::min<std::size_t>(10, n);
      const std::size_t q = std::min(verify_queries, n);
      std::size_t agree = 0;
      double found = 0.0;
      for (std::size_t qi = 0; qi < q; ++qi) {
        const auto v = snap->vector(qi * n / q);
        const Embedding query{{v.begin(), v.end()}};
        std::vector<std::pair<double, std::string>> scan;
        for (std::size_t i = 0; i < n; ++i) {
          scan.emplace_back(cosine_similarity(query.view(), snap->vector(i)), snap->ids()[i]);
        }
        std::sort(scan.begin(), scan.end(), [](const auto& a, const auto& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        const auto hits = snap->search_top_k(query, k);
        bool same = true;
        for (std::size_t i = 0; i < k; ++i) same = same && hits[i].doc_id == scan[i].second;
        agree += same ? 1 : 0;
        for (const auto& h : approx->search_top_k(query, k)) {
          for (std::size_t i = 0; i < k; ++i) found += h.doc_id == scan[i].second ? 1.0 : 0.0;
        }
      }
      const bool ok = agree == q;
      emit(out,
           {{"index", verify_path},
            {"count", n},
            {"dim", snap->dim()},
            {"generation", snap->generation()},
            {"queries", q},
            {"exact_agreement", q ? static_cast<double>(agree) / static_cast<double>(q) : 1.0},
            {"approximate_recall", q ? found / static_cast<double>(q * k) : 1.0},
            {"approximate_probes", approx->probes()},
            {"ok", ok}},
           std::nullopt);
      if (!ok) throw Error(ErrorKind::kContract, "exact search disagrees with the full scan");
    };
  });

  // train
  auto* train = app.add_subcommand("train", "train the retriever against the LM");
  CommonFlags train_flags;
  train_flags.attach(train);
  std::optional<std::string> train_docs, train_out, metrics_path, probe_path, topics_path;
  std::optional<std::size_t> total_steps;
  train->add_option("--train", train_docs, "raw training documents JSONL");
  train->add_option("--out", train_out, "checkpoint directory");
  train->add_option("--metrics", metrics_path, "metrics JSONL (default <out>/metrics.jsonl)");
  train->add_option("--steps", total_steps, "override total_steps");
  train->add_option("--probe", probe_path, "probe queries JSONL {text, topic}");
  train->add_option("--topics", topics_path, "source topic map JSON");
  train->callback([&] {
    action = [&] {
      Runtime rt(train_flags.resolve_config());
      if (train_docs) rt.config.train_docs = *train_docs;
      if (total_steps) rt.config.training.total_steps = *total_steps;
      rt.config.training.validate();
      if (rt.config.train_docs.empty()) {
        throw Error(ErrorKind::kConfiguration, "no training documents configured");
      }
      const std::string dir =
          train_out ? *train_out
                    : (rt.config.checkpoint.empty()
                           ? std::string("train")
                           : fs::path(rt.config.checkpoint).parent_path().string());
      rt.load_lm();
      const ChunkedCorpus chunked = load_corpus(rt.config.corpus, *rt.tokenizer);
      rt.corpus = std::make_unique<CorpusStore>(chunked.chunks);
      const TrainingSet set = make_training_examples(
          read_raw_documents(rt.config.train_docs), *rt.tokenizer,
          {rt.config.context_length, rt.config.continuation_length, rt.config.max_examples,
           rt.config.seed});
      for (const auto& c : rt.corpus->chunks()) {
        if (set.source_ids.contains(c.source_id)) {
          throw Error(ErrorKind::kConfiguration,
                      "training source " + c.source_id + " is also in the retrieval corpus");
        }
      }
      if (set.examples.empty()) throw Error(ErrorKind::kConfiguration, "no training examples");

      fs::create_directories(dir);
      const std::string metrics_file =
          metrics_path ? *metrics_path : (fs::path(dir) / "metrics.jsonl").string();
      std::ofstream metrics(metrics_file, std::ios::binary | std::ios::trunc);
      if (!metrics) throw Error(ErrorKind::kIo, "cannot write " + metrics_file);

      std::vector<TopicQuery> probe;
      TopicMap topics;
      if (probe_path && topics_path) {
        probe = read_probe_queries(*probe_path, *rt.tokenizer);
        topics = read_topic_map(*topics_path);
      }
      const std::size_t n_probe = std::min<std::size_t>(32, set.examples.size());
      const std::span<const TrainingExample> probe_examples(set.examples.data(), n_probe);

      TrainingLoopOptions opts;
      opts.index_mode = rt.config.index_mode;
      opts.checkpoint_dir = dir;
      opts.pool = rt.pool.get();
      opts.metrics_sink = [&](const Json& j) { metrics << j.dump() << '\n'; };
      opts.probe = [&](const EncoderParams& p, const IndexSnapshot& snap) {
        Json q;
        const auto prepared =
            prepare_targets(p, probe_examples, snap, *rt.corpus, *rt.lm, rt.config.training);
        q["probe_loss"] = batch_loss(p, prepared, rt.config.training.gamma);
        if (!probe.empty()) {
          q["mrr"] = topic_mrr(p, snap, probe, topics);
          q["precision_at_10"] = topic_precision(p, snap, probe, topics, 10);
        }
        return q;
      };
      const auto base = rt.base_encoder();
      const auto result =
          training_loop(rt.config.training, *rt.corpus, set.examples, *rt.lm, *base, opts);
      metrics.flush();
      if (!metrics) throw Error(ErrorKind::kIo, "failed writing " + metrics_file);
      double final_loss = 0.0;
      for (const auto& m : result.metrics) {
        if (!m.contains("event")) final_loss = m["loss"].get<double>();
      }
      emit(out,
           {{"steps", rt.config.training.total_steps},
            {"examples", set.examples.size()},
            {"skipped_short", set.skipped_short},
            {"final_loss", final_loss},
            {"refreshes", result.refresh_steps.size()},
            {"generation", result.final_generation},
            {"checkpoint", result.last_checkpoint},
            {"metrics", metrics_file}},
           std::nullopt);
    };
  });

  // evaluation subcommands
  CommonFlags eval_flags;
  std::optional<std::string> eval_mode, eval_out, eval_shots;
  std::string eval_data;
  std::size_t n_shots = 0;
  auto add_eval = [&](const char* name, const char* help, const char* data_flag,
                      bool data_required) {
    auto* sub = app.add_subcommand(name, help);
    eval_flags.attach(sub);
    auto* data = sub->add_option(data_flag, eval_data, "evaluation data JSONL");
    if (data_required) data->required();
    sub->add_option("--retriever", eval_mode, "lsr | replug | random | none");
    sub->add_option("--out", eval_out, "also write the report here");
    return sub;
  };
  auto run_eval = [&](const std::string& task) {
    Runtime rt(eval_flags.resolve_config());
    rt.load_lm();
    rt.load_corpus_store();
    const std::string mode = eval_mode ? *eval_mode : default_mode(rt.config);
    const EngineOptions eo{rt.config.k, rt.config.query_window, false};
    const PromptOptions po{rt.config.k, n_shots};
    EvalReport report;
    RetrieverBundle bundle;
    if (mode != "none") bundle = make_retriever(rt, mode);
    if (task == "lm-bpb") {
      if (eval_data.empty()) eval_data = rt.config.eval_docs;
      if (eval_data.empty()) throw Error(ErrorKind::kConfiguration, "no evaluation documents");
      const auto docs = read_eval_documents(eval_data);
      if (mode == "none") {
        report = bits_per_byte(plain_scorer(*rt.lm), *rt.tokenizer, docs, rt.config.query_window);
      } else {
        const Engine engine(*rt.corpus, *bundle.retriever, *rt.lm, eo, rt.pool.get());
        report = bits_per_byte(ensemble_scorer(engine, rt.config.k), *rt.tokenizer, docs,
                               rt.config.query_window);
      }
    } else {
      if (mode == "none") {
        throw Error(ErrorKind::kConfiguration, task + " needs a retriever");
      }
      const Engine engine(*rt.corpus, *bundle.retriever, *rt.lm, eo, rt.pool.get());
      if (task == "multiple-choice") {
        const auto items = read_mc_items(eval_data);
        const auto shots = eval_shots ? read_mc_items(*eval_shots) : std::vector<McItem>{};
        report = multiple_choice_eval(engine, *rt.tokenizer, items, shots, po);
      } else {
        const auto items = read_qa_items(eval_data);
        const auto shots = eval_shots ? read_qa_items(*eval_shots) : std::vector<QaItem>{};
        report = open_qa_eval(engine, *rt.tokenizer, items, shots, po);
      }
    }
    Json fp = training_fingerprint_input(rt.config, task, mode, eval_data);
    fp["shots"] = n_shots;
    report.config_fingerprint = config_fingerprint(fp);
    emit(out, report.to_json(), eval_out);
  };
  auto* eval_lm = add_eval("eval-lm", "bits per byte on held-out documents", "--eval", false);
  eval_lm->callback([&] { action = [&] { run_eval("lm-bpb"); }; });
  auto* eval_mc = add_eval("eval-mc", "multiple-choice accuracy", "--items", true);
  eval_mc->add_option("--shots", eval_shots, "in-context examples JSONL");
  eval_mc->add_option("--n-shots", n_shots, "number of in-context examples");
  eval_mc->callback([&] { action = [&] { run_eval("multiple-choice"); }; });
  auto* eval_qa = add_eval("eval-qa", "open-domain QA exact match", "--items", true);
  eval_qa->add_option("--shots", eval_shots, "in-context examples JSONL");
  eval_qa->add_option("--n-shots", n_shots, "number of in-context examples");
  eval_qa->callback([&] { action = [&] { run_eval("open-qa"); }; });

  // query
  auto* query = app.add_subcommand("query", "top next tokens for a context");
  CommonFlags query_flags;
  query_flags.attach(query);
  std::string query_context;
  std::optional<std::string> query_mode;
  std::size_t query_top = 10;
  query->add_option("--context", query_context, "file holding the context text")->required();
  query->add_option("--retriever", query_mode, "lsr | replug | random");
  query->add_option("--top", query_top, "tokens to print");
  query->callback([&] {
    action = [&] {
      Runtime rt(query_flags.resolve_config());
      rt.load_lm();
      rt.load_corpus_store();
      const std::string mode = query_mode ? *query_mode : default_mode(rt.config);
      auto bundle = make_retriever(rt, mode);
      const Engine engine(*rt.corpus, *bundle.retriever, *rt.lm,
                          {rt.config.k, rt.config.query_window, false}, rt.pool.get());
      const TokenSeq x = rt.tokenizer->tokenize(read_text(query_context));
      const auto res = retrieve_and_ensemble(engine, x, rt.config.k);
      std::vector<TokenId> order(res.distribution.probs.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
      const std::size_t top = std::min(query_top, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                        order.end(), [&](TokenId a, TokenId b) {
                          const double pa = res.distribution.probs[a];
                          const double pb = res.distribution.probs[b];
                          return pa != pb ? pa > pb : a < b;
                        });
      Json docs = Json::array();
      for (std::size_t i = 0; i < res.retrieval.docs.size(); ++i) {
        docs.push_back({{"doc_id", res.retrieval.docs[i]->doc_id},
                        {"weight", res.retrieval.weights.weights[i]}});
      }
      Json tokens = Json::array();
      for (std::size_t i = 0; i < top; ++i) {
        tokens.push_back({{"token", rt.tokenizer->token_text(order[i])},
                          {"prob", res.distribution.probs[order[i]]}});
      }
      emit(out, {{"retriever", mode}, {"documents", docs}, {"top_tokens", tokens}}, std::nullopt);
    };
  });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "BPB for each retrieval mode and k");
  CommonFlags ablate_flags;
  ablate_flags.attach(ablate, true, false);
  std::string ablate_modes = "random,replug,lsr", ablate_ks = "1,2,5,10";
  std::optional<std::string> ablate_eval, ablate_out;
  ablate->add_option("--modes", ablate_modes, "comma-separated modes");
  ablate->add_option("--k,--k-values", ablate_ks, "comma-separated ensemble sizes");
  ablate->add_option("--eval", ablate_eval, "evaluation documents JSONL (default: eval_docs)");
  ablate->add_option("--out", ablate_out, "also write the CSV here");
  ablate->callback([&] {
    action = [&] {
      Runtime rt(ablate_flags.resolve_config());
      const auto modes = split_csv(ablate_modes);
      std::vector<std::size_t> ks;
      for (const auto& s : split_csv(ablate_ks)) {
        try {
          ks.push_back(std::stoul(s));
        } catch (const std::exception&) {
          throw Error(ErrorKind::kConfiguration, "bad k value: " + s);
        }
        if (ks.back() < 1) throw Error(ErrorKind::kConfiguration, "k values must be >= 1");
      }
      if (modes.empty() || ks.empty()) {
        throw Error(ErrorKind::kConfiguration, "no modes or k values");
      }
      rt.load_lm();
      rt.load_corpus_store();
      std::vector<RetrieverBundle> bundles;
      RetrieverSet set;
      for (const auto& m : modes) {
        bundles.push_back(make_retriever(rt, m));
        set[m] = bundles.back().retriever.get();
      }
      const std::string eval_path = ablate_eval ? *ablate_eval : rt.config.eval_docs;
      if (eval_path.empty()) throw Error(ErrorKind::kConfiguration, "no evaluation documents");
      const auto docs = read_eval_documents(eval_path);
      const auto rows =
          ablation_sweep(*rt.corpus, *rt.lm, *rt.tokenizer, set, docs, ks, modes,
                         {rt.config.k, rt.config.query_window, false}, rt.pool.get());
      const std::string csv = ablation_csv(rows);
      if (ablate_out) write_text_file(*ablate_out, csv);
      out << csv;
    };
  });

  // stub servers
  auto* stub_lm = app.add_subcommand("stub-lm", "serve the mock LM over loopback HTTP");
  CommonFlags stub_flags;
  stub_flags.attach(stub_lm);
  int stub_port = 0;
  int fail_count = 0;
  int fail_status = 503;
  std::string stub_token;
  stub_lm->add_option("--port", stub_port, "port (0 = ephemeral)");
  stub_lm->add_option("--fail-count", fail_count, "fail this many requests first");
  stub_lm->add_option("--fail-status", fail_status, "status for injected failures");
  stub_lm->add_option("--require-token", stub_token, "expected bearer token");
  stub_lm->callback([&] {
    action = [&] {
      EngineConfig c = stub_flags.resolve_config();
      c.lm.kind = "mock";
      Runtime rt(c);
      rt.load_lm();
      LmStubOptions o;
      o.failures = {fail_count, fail_status};
      o.required_token = stub_token;
      o.port = stub_port;
      LmStub stub(*rt.lm, *rt.tokenizer, o);
      out << Json{{"url", stub.url("/v1/lm")}, {"port", stub.port()}}.dump() << std::endl;
      stub.wait();
    };
  });
  auto* stub_embed = app.add_subcommand("stub-embed", "serve deterministic embeddings");
  std::size_t embed_dim = 16;
  stub_embed->add_option("--port", stub_port, "port (0 = ephemeral)");
  stub_embed->add_option("--dim", embed_dim, "embedding dimension");
  stub_embed->add_option("--fail-count", fail_count, "fail this many requests first");
  stub_embed->add_option("--fail-status", fail_status, "status for injected failures");
  stub_embed->callback([&] {
    action = [&] {
      EmbedStub stub(embed_dim, {fail_count, fail_status}, stub_port);
      out << Json{{"url", stub.url("/embed")}, {"port", stub.port()}}.dump() << std::endl;
      stub.wait();
    };
  });

  // make-harness
  auto* harness = app.add_subcommand("make-harness", "write the synthetic topic harness");
  std::string harness_out;
  HarnessOptions ho;
  harness->add_option("--out", harness_out, "output directory")->required();
  harness->add_option("--seed", ho.seed, "harness seed");
  harness->add_option("--corpus-docs", ho.corpus_docs, "retrieval corpus size");
  harness->add_option("--train-examples", ho.train_examples, "training examples");
  harness->add_option("--eval-docs", ho.eval_docs, "evaluation documents");
  harness->callback([&] {
    action = [&] {
      const Harness h = make_harness(ho);
      h.write(harness_out);
      const fs::path dir(harness_out);
      std::set<std::string> excluded;
      for (const auto& d : h.train_docs) excluded.insert(d.source_id);
      const auto chunked = chunk_corpus(h.corpus_docs, h.tokenizer, h.chunk_options(), excluded);
      fs::create_directories(dir / "corpus");
      write_chunks((dir / "corpus" / chunked.manifest.chunks_file).string(), chunked.chunks);
      write_manifest((dir / "corpus" / "manifest.json").string(), chunked.manifest);
      write_text_file((dir / "config.json").string(), harness_config(h).dump(2) + "\n");
      emit(out,
           {{"dir", harness_out},
            {"config", (dir / "config.json").string()},
            {"chunks", chunked.chunks.size()},
            {"train_docs", h.train_docs.size()},
            {"eval_docs", h.eval_docs.size()},
            {"vocab_size", h.tokenizer.vocab_size()}},
           std::nullopt);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, std::cerr) == 0) return 0;
    std::cerr << app.help();
    return 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    log().error("{}", e.what());
    return e.kind() == ErrorKind::kConfiguration ? 2 : 1;
  } catch (const std::exception& e) {
    log().error("{}", e.what());
    return 1;
  }
}

}  // namespace replug
