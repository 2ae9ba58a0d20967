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

#include "replug/trainer.h"

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>

#include "replug/error.h"
#include "replug/log.h"

namespace replug {

void TrainingConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfiguration, what); };
  if (!(gamma > 0.0)) fail("gamma must be > 0");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (k_train < 1) fail("k_train must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) fail("warmup_ratio must be in [0, 1]");
  if (refresh_interval < 1) fail("refresh_interval_T must be >= 1");
  if (total_steps < 1) fail("total_steps must be >= 1");
}

TrainingConfig TrainingConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kConfiguration, "training config must be an object");
  TrainingConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "gamma") {
        c.gamma = value.get<double>();
      } else if (key == "beta") {
        c.beta = value.get<double>();
      } else if (key == "k_train") {
        c.k_train = value.get<std::size_t>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "warmup_ratio") {
        c.warmup_ratio = value.get<double>();
      } else if (key == "refresh_interval_T") {
        c.refresh_interval = value.get<std::size_t>();
      } else if (key == "total_steps") {
        c.total_steps = value.get<std::size_t>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else {
        throw Error(ErrorKind::kConfiguration, "unknown training config key: " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfiguration, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

Json TrainingConfig::to_json() const {
  Json j;
  j["gamma"] = gamma;
  j["beta"] = beta;
  j["k_train"] = k_train;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["warmup_ratio"] = warmup_ratio;
  j["refresh_interval_T"] = refresh_interval;
  j["total_steps"] = total_steps;
  j["seed"] = seed;
  return j;
}

std::size_t warmup_steps(const TrainingConfig& config) {
  return static_cast<std::size_t>(
      std::ceil(config.warmup_ratio * static_cast<double>(config.total_steps)));
}

double learning_rate_at(const TrainingConfig& config, std::size_t step) {
  const std::size_t w = warmup_steps(config);
  if (step < w) {
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(w);
  }
  return config.learning_rate;
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps) {
  if (grad.size() != params.size()) {
    throw Error(ErrorKind::kContract, "adam_update: gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

std::vector<PreparedExample> prepare_targets(const EncoderParams& params,
                                             std::span<const TrainingExample> batch,
                                             const IndexSnapshot& snapshot,
                                             const CorpusStore& corpus, const LanguageModel& lm,
                                             const TrainingConfig& config, TaskPool* pool) {
  std::vector<PreparedExample> out(batch.size());
  std::vector<std::pair<std::size_t, std::size_t>> calls;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (ex.continuation.empty()) {
      throw Error(ErrorKind::kDegenerateExample, "training example with empty continuation");
    }
    out[b].query = ex.context;
    const auto hits = snapshot.search_top_k(embed(params, ex.context), config.k_train);
    for (const auto& h : hits) {
      out[b].docs.push_back(&corpus.at(h.doc_id));
      calls.emplace_back(b, out[b].docs.size() - 1);
    }
  }
  std::vector<ContinuationScore> scores(calls.size());
  run_indexed(pool, calls.size(), [&](std::size_t i) {
    const auto [b, j] = calls[i];
    const auto& ex = batch[b];
    const Prompt prompt = Prompt::with_document(out[b].docs[j]->tokens, ex.context,
                                                ex.continuation.size(), lm.context_window());
    scores[i] = lm.score_continuation(prompt, ex.continuation);
  });
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i].total_logprob)) {
      const auto [b, j] = calls[i];
      throw Error(ErrorKind::kTraining, "LM returned a NaN score for document '" +
                                            out[b].docs[j]->doc_id + "' (batch item " +
                                            std::to_string(b) + ")");
    }
  }
  std::size_t next = 0;
  for (auto& p : out) {
    std::span<const ContinuationScore> mine(scores.data() + next, p.docs.size());
    next += p.docs.size();
    p.lm_probs = lm_likelihood(mine, config.beta);
  }
  return out;
}

namespace {

struct ExampleTerms {
  double loss = 0.0;
  LikelihoodPair pair;
};

ExampleTerms example_terms(const EncoderParams& params, const PreparedExample& ex, double gamma,
                           double grad_scale, std::vector<double>* grad) {
  const std::size_t dim = params.dim();
  const Embedding q = embed(params, ex.query);
  std::vector<Embedding> d;
  std::vector<double> s;
  d.reserve(ex.docs.size());
  for (const DocumentChunk* doc : ex.docs) {
    d.push_back(embed(params, doc->tokens));
    s.push_back(cosine_similarity(q, d.back()));
  }
  ExampleTerms out;
  out.pair.retrieval_probs = retrieval_likelihood(s, gamma);
  out.pair.lm_probs = ex.lm_probs;
  for (const DocumentChunk* doc : ex.docs) out.pair.doc_ids.push_back(doc->doc_id);
  out.loss = kl_divergence(out.pair.retrieval_probs, ex.lm_probs);
  if (grad == nullptr) return out;

  const auto g = kl_score_gradient(out.pair.retrieval_probs, ex.lm_probs, gamma);
  std::vector<double> grad_q(dim, 0.0);
  std::vector<double> grad_d(dim);
  for (std::size_t j = 0; j < d.size(); ++j) {
    std::fill(grad_d.begin(), grad_d.end(), 0.0);
    accumulate_cosine_gradient(q.view(), d[j].view(), g[j] * grad_scale, grad_q, grad_d);
    accumulate_embed_gradient(ex.docs[j]->tokens, grad_d, *grad, dim);
  }
  accumulate_embed_gradient(ex.query, grad_q, *grad, dim);
  return out;
}

}  // namespace

BatchGradient batch_loss_and_gradient(const EncoderParams& params,
                                      std::span<const PreparedExample> batch, double gamma) {
  if (batch.empty()) throw Error(ErrorKind::kArgument, "empty batch");
  BatchGradient out;
  out.grad.assign(params.table().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto t = example_terms(params, ex, gamma, scale, &out.grad);
    out.loss += t.loss * scale;
    out.pairs.push_back(std::move(t.pair));
  }
  return out;
}

double batch_loss(const EncoderParams& params, std::span<const PreparedExample> batch,
                  double gamma) {
  if (batch.empty()) throw Error(ErrorKind::kArgument, "empty batch");
  double loss = 0.0;
  for (const auto& ex : batch) loss += example_terms(params, ex, gamma, 0.0, nullptr).loss;
  return loss / static_cast<double>(batch.size());
}

namespace {

bool retryable_lm_failure(ErrorKind kind) {
  return kind == ErrorKind::kTransport || kind == ErrorKind::kService ||
         kind == ErrorKind::kContract;
}

}  // namespace

double train_step(EncoderParams& params, AdamState& adam,
                  std::span<const TrainingExample> batch, const IndexSnapshot& snapshot,
                  const CorpusStore& corpus, const LanguageModel& lm,
                  const TrainingConfig& config, std::size_t step, TaskPool* pool) {
  if (batch.empty()) throw Error(ErrorKind::kArgument, "empty batch");
  std::vector<PreparedExample> prepared;
  for (int attempt = 0;; ++attempt) {
    try {
      prepared = prepare_targets(params, batch, snapshot, corpus, lm, config, pool);
      break;
    } catch (const Error& e) {
      if (attempt > 0 || !retryable_lm_failure(e.kind())) throw;
      log().warn("step {}: LM scoring failed, retrying once: {}", step, e.what());
    }
  }
  const auto bg = batch_loss_and_gradient(params, prepared, config.gamma);
  bool finite = std::isfinite(bg.loss);
  for (double g : bg.grad) finite = finite && std::isfinite(g);
  if (!finite) {
    throw Error(ErrorKind::kTraining, "non-finite loss or gradient at step " +
                                          std::to_string(step) + " (loss " +
                                          std::to_string(bg.loss) + ")");
  }
  adam_update(params.table(), bg.grad, adam, learning_rate_at(config, step));
  if (!params.all_finite()) {
    throw Error(ErrorKind::kTraining,
                "encoder parameters became non-finite at step " + std::to_string(step));
  }
  return bg.loss;
}

namespace {

class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) { reshuffle(); }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> out;
    const std::size_t take = std::min(batch_size, order_.size());
    while (out.size() < take) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_() % i)]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainingResult training_loop(const TrainingConfig& config, const CorpusStore& corpus,
                             std::span<const TrainingExample> examples, const LanguageModel& lm,
                             EncoderParams initial, const TrainingLoopOptions& options) {
  config.validate();
  if (examples.empty()) throw Error(ErrorKind::kConfiguration, "no training examples");
  if (corpus.empty()) throw Error(ErrorKind::kRetrievalUnavailable, "training corpus is empty");

  TrainingResult result;
  result.params = std::move(initial);
  EncoderParams& params = result.params;

  auto emit = [&](Json record) {
    if (options.metrics_sink) options.metrics_sink(record);
    result.metrics.push_back(std::move(record));
  };

  SnapshotRegistry registry(
      build_index(embed_corpus(params, corpus), options.index_mode, 1, options.approximate));
  SnapshotRegistry::SnapshotPtr current = registry.pin();

  if (!options.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.checkpoint_dir, ec);
  }
  auto checkpoint = [&](const EncoderParams& p, std::size_t step, const std::string& name) {
    const std::string path = (std::filesystem::path(options.checkpoint_dir) / name).string();
    try {
      save_checkpoint(path, p, {step, config.seed});
    } catch (const Error& e) {
      throw Error(ErrorKind::kIo, "checkpoint write failed at step " + std::to_string(step) +
                                      ": " + e.what() + "; last good checkpoint: " +
                                      (result.last_checkpoint.empty() ? std::string("none")
                                                                      : result.last_checkpoint));
    }
    result.last_checkpoint = path;
  };

  struct Pending {
    std::shared_future<SnapshotRegistry::SnapshotPtr> future;
    std::shared_ptr<const EncoderParams> params;
    std::size_t launched_at = 0;
  };
  std::optional<Pending> pending;
  auto adopt = [&]() {
    current = pending->future.get();
    Json rec;
    rec["step"] = pending->launched_at;
    rec["event"] = "refresh";
    rec["generation"] = current->generation();
    if (options.probe) rec["quality"] = options.probe(*pending->params, *current);
    emit(std::move(rec));
    pending.reset();
  };

  BatchSampler sampler(examples.size(), config.seed ^ 0x5bd1e995ULL);
  AdamState adam;
  std::vector<TrainingExample> batch;
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    if (pending && step >= pending->launched_at + 2) adopt();

    batch.clear();
    for (std::size_t i : sampler.next(config.batch_size)) batch.push_back(examples[i]);
    const double lr = learning_rate_at(config, step - 1);
    const double loss =
        train_step(params, adam, batch, *current, corpus, lm, config, step - 1, options.pool);
    Json rec;
    rec["step"] = step;
    rec["loss"] = loss;
    rec["lr"] = lr;
    rec["generation"] = current->generation();
    emit(std::move(rec));

    if (step % config.refresh_interval == 0) {
      if (pending) adopt();
      auto copy = std::make_shared<const EncoderParams>(params);
      if (!options.checkpoint_dir.empty()) {
        checkpoint(*copy, step, "step-" + std::to_string(step) + ".rpix");
      }
      auto future = registry.rebuild_async(
          [copy, &corpus]() { return embed_corpus(*copy, corpus); }, options.index_mode,
          options.approximate);
      pending = Pending{std::move(future), copy, step};
      result.refresh_steps.push_back(step);
    }
  }
  if (pending) adopt();
  if (!options.checkpoint_dir.empty()) checkpoint(params, config.total_steps, "final.rpix");
  result.final_generation = current->generation();
  return result;
}

}  // namespace replug
