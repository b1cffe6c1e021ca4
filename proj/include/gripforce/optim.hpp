// Copyright 2026 The gripforce Authors
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gripforce/dataset.hpp"
#include "gripforce/error.hpp"
#include "gripforce/lstm.hpp"
#include "gripforce/numerics.hpp"

namespace gripforce {

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 30;
  std::size_t epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> clip_threshold;  // global L2 norm; off by default
  std::size_t hidden = 40;
  std::size_t threads = 1;  // results do not depend on this

  void validate() const {
    detail::require(learning_rate > 0, "TrainConfig: learning_rate must be > 0");
    detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    detail::require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    detail::require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
                    "TrainConfig: betas must lie in [0, 1)");
    detail::require(adam_eps > 0, "TrainConfig: adam_eps must be > 0");
    detail::require(!clip_threshold || *clip_threshold > 0,
                    "TrainConfig: clip_threshold must be > 0");
    detail::require(hidden >= 1, "TrainConfig: hidden must be >= 1");
  }
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t t = 0;

  static AdamState for_params(const ModelParams& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
                      const TrainConfig& cfg) {
  if (!same_shapes(params, grads) || !same_shapes(params, state.m) ||
      !same_shapes(params, state.v))
    throw ContractViolation("adam_step: parameter/gradient/state shapes differ");
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

  std::vector<std::span<double>> ps, ms, vs;
  std::vector<std::span<const double>> gs;
  for_each_tensor(params, [&](const std::string&, auto, std::span<double> d) { ps.push_back(d); });
  for_each_tensor(state.m, [&](const std::string&, auto, std::span<double> d) { ms.push_back(d); });
  for_each_tensor(state.v, [&](const std::string&, auto, std::span<double> d) { vs.push_back(d); });
  for_each_tensor(grads,
                  [&](const std::string&, auto, std::span<const double> d) { gs.push_back(d); });
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (std::size_t j = 0; j < ps[k].size(); ++j) {
      const double g = gs[k][j];
      double& m = ms[k][j];
      double& v = vs[k][j];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double m_hat = m / c1;
      const double v_hat = v / c2;
      ps[k][j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

// ---------------------------------------------------------------------------

namespace detail {

inline void add_into(Gradients& acc, const Gradients& g) {
  std::vector<std::span<double>> a;
  for_each_tensor(acc, [&](const std::string&, auto, std::span<double> d) { a.push_back(d); });
  std::size_t k = 0;
  for_each_tensor(g, [&](const std::string&, auto, std::span<const double> d) {
    for (std::size_t j = 0; j < d.size(); ++j) a[k][j] += d[j];
    ++k;
  });
}

inline void scale(Gradients& g, double s) {
  for_each_tensor(g, [&](const std::string&, auto, std::span<double> d) {
    for (double& v : d) v *= s;
  });
}

inline double l2_norm(const Gradients& g) {
  double s = 0.0;
  for_each_tensor(g, [&](const std::string&, auto, std::span<const double> d) {
    for (double v : d) s += v * v;
  });
  return std::sqrt(s);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers with a static
/// contiguous partition.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
}

}  // namespace detail

struct BatchResult {
  double mean_loss = 0.0;
  Gradients grads;  // mean over batch members
};

/// Mean loss and mean gradient over `members`. Per-sample gradients are
/// summed in member order so the result is independent of `threads`.
inline BatchResult batch_gradients(const PreparedModel& model,
                                   std::span<const NormalizedSample> samples,
                                   std::span<const std::size_t> members, std::size_t threads = 1) {
  detail::require(!members.empty(), "batch_gradients: empty batch");
  const ModelParams& p = model.params();
  std::vector<Gradients> per(members.size(), zeros_like(p));
  Vector losses(members.size());
  detail::parallel_for(members.size(), threads, [&](std::size_t i) {
    const auto& s = samples[members[i]];
    losses[i] = model.accumulate_gradients(s.x, s.y, per[i]);
  });
  BatchResult out{0.0, zeros_like(p)};
  for (std::size_t i = 0; i < members.size(); ++i) {
    detail::add_into(out.grads, per[i]);
    out.mean_loss += losses[i];
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  detail::scale(out.grads, inv);
  out.mean_loss *= inv;
  return out;
}

inline Vector predict_all(const ModelParams& p, std::span<const NormalizedSample> samples,
                          std::size_t threads, std::vector<Vector>* predictions = nullptr) {
  PreparedModel model(p);
  Vector losses(samples.size());
  if (predictions) predictions->assign(samples.size(), {});
  detail::parallel_for(samples.size(), threads, [&](std::size_t i) {
    Vector y = model.predict(samples[i].x);
    losses[i] = mse(y, samples[i].y);
    if (predictions) (*predictions)[i] = std::move(y);
  });
  return losses;
}

/// Mean per-sample MSE in normalised units; NaN for an empty set.
inline double mean_loss(const ModelParams& p, std::span<const NormalizedSample> samples,
                        std::size_t threads = 1) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Vector losses = predict_all(p, samples, threads);
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(samples.size());
}

struct LossHistory {
  Vector train_mse;  // per epoch, evaluated with the parameters at epoch end
  Vector test_mse;   // same, on the held-out pairs (NaN when there are none)
};

struct TrainResult {
  ModelParams params;
  LossHistory history;
  std::uint64_t steps = 0;
};

/// Batches for one epoch. Samples are bucketed by sequence length, each
/// bucket is shuffled and cut into batches (last one may be short), then the
/// batch list is shuffled. The order depends only on (seed, epoch).
inline std::vector<std::vector<std::size_t>> epoch_batches(
    std::span<const NormalizedSample> samples, std::size_t batch_size, std::uint64_t seed,
    std::size_t epoch) {
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < samples.size(); ++i) buckets[samples[i].x.rows()].push_back(i);
  Rng rng(derive_seed(seed, epoch + 1));
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idx] : buckets) {
    rng.shuffle(idx);
    for (std::size_t lo = 0; lo < idx.size(); lo += batch_size) {
      const std::size_t hi = std::min(idx.size(), lo + batch_size);
      batches.emplace_back(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(hi));
    }
  }
  rng.shuffle(batches);
  return batches;
}

using EpochCallback = std::function<void(std::size_t epoch, double train_mse, double test_mse)>;

inline TrainResult train(std::span<const NormalizedSample> train_samples,
                         std::span<const NormalizedSample> test_samples, const TrainConfig& cfg,
                         const NormStats& norm = {}, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_samples.empty()) throw ContractViolation("train: empty training set");
  TrainResult r{init_params(cfg.seed, cfg.hidden, train_samples.front().x.cols()), {}, 0};
  r.params.norm = norm;
  AdamState state = AdamState::for_params(r.params);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& batch : epoch_batches(train_samples, cfg.batch_size, cfg.seed, epoch)) {
      BatchResult br = [&] {
        PreparedModel model(r.params);
        return batch_gradients(model, train_samples, batch, cfg.threads);
      }();
      if (cfg.clip_threshold) {
        const double n = detail::l2_norm(br.grads);
        if (n > *cfg.clip_threshold) detail::scale(br.grads, *cfg.clip_threshold / n);
      }
      adam_step(r.params, br.grads, state, cfg);
      ++r.steps;
    }
    r.history.train_mse.push_back(mean_loss(r.params, train_samples, cfg.threads));
    r.history.test_mse.push_back(mean_loss(r.params, test_samples, cfg.threads));
    if (on_epoch) on_epoch(epoch, r.history.train_mse.back(), r.history.test_mse.back());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation

struct SampleResult {
  Vector predicted_N;
  Vector actual_N;
  Vector predicted_norm;
  Vector actual_norm;
};

struct Metrics {
  double mse_norm = 0.0;
  double mse_N2 = 0.0;
  double final_step_mae_N = 0.0;
  std::size_t n_samples = 0;
  std::vector<SampleResult> per_sample;
};

/// Metrics from given normalised predictions. `evaluate` feeds it the model
/// output; tests may feed any predictor.
inline Metrics evaluate_predictions(std::span<const TrainingSample> samples,
                                    std::span<const Vector> predictions_norm,
                                    const NormStats& norm) {
  if (samples.empty()) throw ContractViolation("evaluate: empty sample set");
  detail::require(samples.size() == predictions_norm.size(),
                  "evaluate: prediction count does not match sample count");
  Metrics m;
  m.n_samples = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    detail::require(s.y.size() == kHorizon && predictions_norm[i].size() == kHorizon,
                    "evaluate: horizon must be 70");
    SampleResult r;
    r.predicted_norm = predictions_norm[i];
    r.actual_N = s.y;
    for (std::size_t k = 0; k < kHorizon; ++k) {
      r.predicted_N.push_back(denormalize_grip(r.predicted_norm[k], norm));
      r.actual_norm.push_back(normalize_grip(s.y[k], norm));
    }
    m.mse_norm += mse(r.predicted_norm, r.actual_norm);
    m.mse_N2 += mse(r.predicted_N, r.actual_N);
    m.final_step_mae_N += std::abs(r.predicted_N.back() - r.actual_N.back());
    m.per_sample.push_back(std::move(r));
  }
  const double n = static_cast<double>(samples.size());
  m.mse_norm /= n;
  m.mse_N2 /= n;
  m.final_step_mae_N /= n;
  return m;
}

inline Metrics evaluate(const ModelParams& params, std::span<const TrainingSample> samples,
                        std::size_t threads = 1) {
  if (samples.empty()) throw ContractViolation("evaluate: empty sample set");
  const auto normalized = apply_norm(samples, params.norm);
  std::vector<Vector> preds;
  predict_all(params, normalized, threads, &preds);
  return evaluate_predictions(samples, preds, params.norm);
}

}  // namespace gripforce
