#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "holoqa/checkpoint.hpp"
#include "holoqa/eval.hpp"
#include "holoqa/model.hpp"

namespace holoqa {

struct TrainConfig {
  double learning_rate = 1e-5;
  double l2_lambda = 1e-5;
  double clip_norm = 1.0;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::size_t keep_top_k = 3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

inline void validate_train_config(const TrainConfig& c) {
  if (c.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (c.l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
  if (!(c.clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (c.batch_size == 0 || c.max_epochs == 0 || c.patience == 0 ||
      c.keep_top_k == 0)
    throw ConfigError("batch_size, max_epochs, patience, keep_top_k must be >= 1");
  if (c.patience > c.max_epochs)
    throw ConfigError("patience cannot exceed max_epochs");
  if (c.beta1 < 0.0 || c.beta1 >= 1.0 || c.beta2 < 0.0 || c.beta2 >= 1.0)
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(c.adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

constexpr double kPredictionEps = 1e-7;  // clamp for log arguments

// Summed (not averaged) binary cross-entropy over the batch plus
// lambda * ||theta||^2 over the given parameters; predictions are the
// positive-class probabilities.
template <typename T>
double pointwise_loss(const std::vector<T>& predictions,
                      const std::vector<int>& labels,
                      const std::vector<Tensor<T>>& params, double lambda) {
  if (predictions.size() != labels.size())
    throw DimensionError("got " + std::to_string(predictions.size()) +
                         " predictions for " + std::to_string(labels.size()) +
                         " labels");
  double ce = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw DataError("label " + std::to_string(labels[i]) + " outside {0,1}");
    const double a = std::clamp(static_cast<double>(predictions[i]),
                                kPredictionEps, 1.0 - kPredictionEps);
    ce -= labels[i] == 1 ? std::log(a) : std::log(1.0 - a);
  }
  double l2 = 0.0;
  for (const auto& p : params)
    for (const T v : p.values()) l2 += static_cast<double>(v) * v;
  return ce + lambda * l2;
}

// Cross-entropy of one instance, built on the active tape. For label 1 the
// clamped probability is the positive-class softmax output; for label 0 its
// complement, which is exactly the other softmax component.
template <typename T>
Tensor<T> instance_ce(
    const Model<T>& model, const EncodedInstance& inst,
    const std::type_identity_t<std::optional<Tensor<T>>>& dropout_mask =
        std::nullopt,
    CompositionBackend backend = CompositionBackend::FFT) {
  if (inst.label != 0 && inst.label != 1)
    throw DataError("label " + std::to_string(inst.label) + " outside {0,1}");
  std::optional<std::array<double, 4>> x_feat;
  if (model.config.use_overlap_feats) x_feat = inst.x_feat;
  Tensor<T> probs = softmax2(
      model_logits(model, inst.q_ids, inst.a_ids, x_feat, dropout_mask, backend));
  Tensor<T> p = element(probs, inst.label == 1 ? 1 : 0);
  Tensor<T> safe = clamp(p, static_cast<T>(kPredictionEps),
                         static_cast<T>(1.0 - kPredictionEps));
  return scale(log_op(safe), T(-1));
}

template <typename T>
Tensor<T> l2_penalty(const std::vector<Tensor<T>>& params, double lambda) {
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (const auto& p : params) total = add(total, sum(mul(p, p)));
  return scale(total, static_cast<T>(lambda));
}

// Whole Eq.-8 objective on one tape. The training loop itself accumulates
// per-instance tapes instead (same gradients, far smaller graphs); this form
// exists for oracles and finite-difference checks.
template <typename T>
Tensor<T> batch_loss(
    const Model<T>& model, const std::vector<EncodedInstance>& batch,
    const std::vector<std::optional<Tensor<T>>>& masks, double lambda,
    CompositionBackend backend = CompositionBackend::FFT) {
  if (batch.empty()) throw DataError("empty batch");
  if (!masks.empty() && masks.size() != batch.size())
    throw DimensionError("mask count " + std::to_string(masks.size()) +
                         " != batch size " + std::to_string(batch.size()));
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (std::size_t i = 0; i < batch.size(); ++i)
    total = add(total, instance_ce(model, batch[i],
                                   masks.empty() ? std::nullopt : masks[i],
                                   backend));
  return add(total, l2_penalty(model.trainable_params(), lambda));
}

template <typename T>
struct BatchGradients {
  std::vector<std::vector<T>> grads;  // aligned with the parameter list
  double ce_sum = 0.0;
};

// One tape per instance, accumulated into flat buffers, plus the analytic
// L2 gradient 2*lambda*theta — equivalent to backward through batch_loss.
template <typename T>
BatchGradients<T> batch_gradients(
    const Model<T>& model, const std::vector<Tensor<T>>& params,
    const std::vector<EncodedInstance>& batch,
    const std::vector<std::optional<Tensor<T>>>& masks, double lambda,
    CompositionBackend backend = CompositionBackend::FFT) {
  if (batch.empty()) throw DataError("empty batch");
  if (!masks.empty() && masks.size() != batch.size())
    throw DimensionError("mask count " + std::to_string(masks.size()) +
                         " != batch size " + std::to_string(batch.size()));
  BatchGradients<T> out;
  out.grads.reserve(params.size());
  for (const auto& p : params) out.grads.emplace_back(p.numel(), T(0));
  for (const auto& p : params) p.clear_grad();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    {
      Tape<T> tape;
      Tensor<T> ce = instance_ce(model, batch[i],
                                 masks.empty() ? std::nullopt : masks[i],
                                 backend);
      out.ce_sum += static_cast<double>(ce.values()[0]);
      tape.backward(ce);
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      if (!params[pi].has_grad()) continue;
      const auto& g = params[pi].grad();
      for (std::size_t j = 0; j < g.size(); ++j) out.grads[pi][j] += g[j];
      params[pi].clear_grad();
    }
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& vals = params[pi].values();
    const T two_lambda = static_cast<T>(2.0 * lambda);
    for (std::size_t j = 0; j < vals.size(); ++j)
      out.grads[pi][j] += two_lambda * vals[j];
  }
  return out;
}

// Scales all gradients by max_norm/g when the global L2 norm g exceeds
// max_norm; returns the pre-clip norm.
template <typename T>
double clip_gradients(std::vector<std::vector<T>>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip norm must be positive");
  double sq = 0.0;
  for (const auto& g : grads)
    for (const T x : g) {
      if (!std::isfinite(static_cast<double>(x)))
        throw NumericError("non-finite gradient");
      sq += static_cast<double>(x) * x;
    }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (T& x : g) x = static_cast<T>(x * s);
  }
  return norm;
}

template <typename T>
struct OptimizerState {
  std::vector<std::vector<double>> m;  // first moments, double regardless of T
  std::vector<std::vector<double>> v;  // second moments
  std::size_t t = 0;

  static OptimizerState init(const std::vector<Tensor<T>>& params) {
    OptimizerState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.numel(), 0.0);
      s.v.emplace_back(p.numel(), 0.0);
    }
    return s;
  }
};

// Bias-corrected Adam update in double precision, written back in T.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params,
               const std::vector<std::vector<T>>& grads,
               OptimizerState<T>& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("optimizer parameter/gradient/state count mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi].mutable_values();
    if (grads[pi].size() != vals.size() || state.m[pi].size() != vals.size())
      throw DimensionError("optimizer shape mismatch at parameter " +
                           std::to_string(pi));
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double g = static_cast<double>(grads[pi][j]);
      double& m = state.m[pi][j];
      double& v = state.v[pi][j];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
      vals[j] = static_cast<T>(static_cast<double>(vals[j]) - update);
    }
  }
}

// Inverted dropout: zero with probability rate, survivors scaled by
// 1/(1-rate) so inference needs no mask at all.
template <typename T>
Tensor<T> make_dropout_mask(std::size_t dim, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate outside [0, 1)");
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> m(dim);
  for (auto& x : m) x = rng.bernoulli(rate) ? T(0) : keep;
  return Tensor<T>::vector(std::move(m));
}

// Scores every instance against a read-only model, fanning out across
// worker threads in contiguous chunks; order of results is the input order
// regardless of worker count.
template <typename T>
std::vector<T> score_instances(const Model<T>& model,
                               const std::vector<EncodedInstance>& instances,
                               std::size_t workers = 1,
                               CompositionBackend backend = CompositionBackend::FFT) {
  std::vector<T> scores(instances.size());
  if (instances.empty()) return scores;
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      std::optional<std::array<double, 4>> x_feat;
      if (model.config.use_overlap_feats) x_feat = instances[i].x_feat;
      scores[i] = score_pair(model, instances[i].q_ids, instances[i].a_ids,
                             x_feat, backend);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, instances.size());
  if (workers == 1) {
    score_range(0, instances.size());
    return scores;
  }
  const std::size_t chunk = (instances.size() + workers - 1) / workers;
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      try {
        score_range(w * chunk, std::min(instances.size(), (w + 1) * chunk));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

// Groups instance scores by query (first-appearance order) and evaluates.
template <typename T>
std::pair<MetricReport, RankedRun> evaluate_model(
    const Model<T>& model, const std::vector<EncodedInstance>& instances,
    std::size_t workers = 1,
    CompositionBackend backend = CompositionBackend::FFT,
    const std::string& tag = "holoqa") {
  if (instances.empty()) throw DataError("nothing to evaluate");
  auto scores = score_instances(model, instances, workers, backend);
  std::vector<RankedQuery> queries;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto [it, inserted] = index.try_emplace(instances[i].query_id, queries.size());
    if (inserted) queries.push_back(RankedQuery{instances[i].query_id, {}});
    queries[it->second].candidates.push_back(
        RankedCandidate{instances[i].candidate_id,
                        static_cast<double>(scores[i]), instances[i].label});
  }
  RankedRun run = make_run(std::move(queries), tag);
  return {evaluate_run(run), std::move(run)};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // sum of Eq.-8 batch losses across the epoch
  double dev_map = 0.0;
  double dev_mrr = 0.0;
  double dev_p1 = 0.0;
  double seconds = 0.0;
};

struct SavedCheckpoint {
  double dev_map = 0.0;
  std::size_t epoch = 0;
  std::string path;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::vector<SavedCheckpoint> checkpoints;  // best dev MAP first
  double best_dev_map = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Epoch loop: seeded shuffle, batched forward/backward with per-instance
// tapes, global-norm clip, Adam step; dev metrics each epoch drive both the
// top-k checkpoints and early stopping (no strict improvement for `patience`
// consecutive epochs). Checkpointing is skipped when checkpoint_dir is "".
template <typename T>
TrainResult train(Model<T>& model, const std::vector<EncodedInstance>& train_set,
                  const std::vector<EncodedInstance>& dev_set,
                  const TrainConfig& config, const std::string& checkpoint_dir = "",
                  const CheckpointExtras& extras = {},
                  std::ostream* log_stream = nullptr,
                  CompositionBackend backend = CompositionBackend::FFT,
                  std::size_t workers = 1) {
  validate_train_config(config);
  if (train_set.empty()) throw DataError("training set is empty");
  if (dev_set.empty()) throw DataError("development set is empty");
  if (std::none_of(dev_set.begin(), dev_set.end(),
                   [](const EncodedInstance& i) { return i.label == 1; }))
    throw ConfigError("development set has no positive labels");
  if (!checkpoint_dir.empty())
    std::filesystem::create_directories(checkpoint_dir);

  auto params = model.trainable_params();
  auto state = OptimizerState<T>::init(params);
  Rng shuffle_rng(mix_seed(config.seed, 101));
  Rng dropout_rng(mix_seed(config.seed, 202));
  const bool use_dropout = model.dense && model.config.dropout_rate > 0.0;
  const std::size_t composed_dim =
      model.config.architecture == Architecture::ConcatLSTM
          ? 2 * model.config.lstm_dim
          : model.config.lstm_dim;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_improve = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      std::vector<EncodedInstance> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(train_set[order[i]]);
      std::vector<std::optional<Tensor<T>>> masks;
      if (use_dropout) {
        masks.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          masks.push_back(make_dropout_mask<T>(
              composed_dim, model.config.dropout_rate, dropout_rng));
      }
      auto bg = batch_gradients(model, params, batch, masks, config.l2_lambda,
                                backend);
      if (!std::isfinite(bg.ce_sum))
        throw NumericError("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(start / config.batch_size));
      double l2 = 0.0;
      for (const auto& p : params)
        for (const T x : p.values()) l2 += static_cast<double>(x) * x;
      epoch_loss += bg.ce_sum + config.l2_lambda * l2;
      clip_gradients(bg.grads, config.clip_norm);
      adam_step(params, bg.grads, state, config.learning_rate, config.beta1,
                config.beta2, config.adam_eps);
    }

    auto [report, run] = evaluate_model(model, dev_set, workers, backend);
    (void)run;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    EpochRecord record{epoch, epoch_loss, report.map, report.mrr,
                       report.p_at_1, seconds};
    result.log.push_back(record);
    if (log_stream)
      *log_stream << "epoch=" << epoch << " loss=" << record.loss
                  << " dev_map=" << record.dev_map
                  << " dev_mrr=" << record.dev_mrr
                  << " dev_p1=" << record.dev_p1
                  << " seconds=" << record.seconds << "\n";

    if (!checkpoint_dir.empty()) {
      const bool room = result.checkpoints.size() < config.keep_top_k;
      const bool better =
          !result.checkpoints.empty() &&
          record.dev_map > result.checkpoints.back().dev_map;
      if (room || better) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03zu.hqck", epoch);
        const std::string path =
            (std::filesystem::path(checkpoint_dir) / name).string();
        save_checkpoint(model, path, extras);
        result.checkpoints.push_back({record.dev_map, epoch, path});
        std::sort(result.checkpoints.begin(), result.checkpoints.end(),
                  [](const SavedCheckpoint& a, const SavedCheckpoint& b) {
                    if (a.dev_map != b.dev_map) return a.dev_map > b.dev_map;
                    return a.epoch < b.epoch;  // ties keep the earlier epoch
                  });
        if (result.checkpoints.size() > config.keep_top_k) {
          std::filesystem::remove(result.checkpoints.back().path);
          result.checkpoints.pop_back();
        }
      }
    }

    if (record.dev_map > best) {
      best = record.dev_map;
      result.best_epoch = epoch;
      since_improve = 0;
    } else if (++since_improve >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_dev_map = best;
  return result;
}

}  // namespace holoqa
