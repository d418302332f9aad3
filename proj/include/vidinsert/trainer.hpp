// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flow-matching training of the toy backbone with plain gradient descent.
//
// Loss over a batch: mean over examples of mean_i (v_pred - (eps - x0))_i^2
// at x_t = (1 - t) x0 + t eps. Each example's (t, eps) comes from its own
// labeled stream so the loss is a fixed function of the weights.

#ifndef VIDINSERT_TRAINER_HPP_
#define VIDINSERT_TRAINER_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidinsert/backprop.hpp"
#include "vidinsert/checkpoint.hpp"
#include "vidinsert/error.hpp"
#include "vidinsert/flow.hpp"
#include "vidinsert/model.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/synthbench.hpp"
#include "vidinsert/tensor_io.hpp"

namespace vidinsert {

struct TrainExample {
  VideoLatent x0;
  ConditionEmbedding cond;
};

// Frozen per-example draw.
struct FmDraw {
  float t = 0.5f;
  VideoLatent eps;
};

// Draws (t, eps) for `batch` from SeededRng(seed, "train/<step>/<slot>").
// t is uniform on (0, 1).
inline std::vector<FmDraw> draw_fm_noise(const std::vector<TrainExample>& batch,
                                         std::uint64_t seed, std::uint64_t step,
                                         std::string_view label = "train") {
  std::vector<FmDraw> draws;
  draws.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    SeededRng rng = SeededRng::derive(seed, label, step, i);
    FmDraw d;
    do {
      d.t = static_cast<float>(rng.uniform());
    } while (d.t <= 0.f || d.t >= 1.f);
    d.eps = VideoLatent(batch[i].x0.shape());
    rng.fill_normal(d.eps);
    draws.push_back(std::move(d));
  }
  return draws;
}

// Loss for any predictor p(x_t, t, cond) -> velocity.
template <typename Predictor>
double fm_loss(Predictor&& predict, const std::vector<TrainExample>& batch,
               const std::vector<FmDraw>& draws) {
  if (batch.empty()) throw InvalidArgument("flow-matching loss needs a non-empty batch");
  detail::check_axis("draws", draws.size(), batch.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const VideoLatent xt = forward_interpolate(batch[b].x0, draws[b].eps, draws[b].t);
    const VideoLatent target = velocity_target(batch[b].x0, draws[b].eps);
    const VideoLatent v = predict(xt, draws[b].t, batch[b].cond);
    check_same_shape(v.shape(), target.shape());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = static_cast<double>(v[i]) - static_cast<double>(target[i]);
      s += d * d;
    }
    total += s / static_cast<double>(v.size());
  }
  const double loss = total / static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite flow-matching loss");
  return loss;
}

// Loss and gradient for the model in precision T. `scale` multiplies the
// loss (and so every gradient).
template <typename T>
double fm_loss_and_grad(const Weights<T>& w, const std::vector<TrainExample>& batch,
                        const std::vector<FmDraw>& draws, Weights<T>* grad,
                        double scale = 1.0, const ForwardOptions& opts = {}) {
  if (batch.empty()) throw InvalidArgument("flow-matching loss needs a non-empty batch");
  detail::check_axis("draws", draws.size(), batch.size());
  if (grad) *grad = Weights<T>::zeros(w.config);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const VideoLatent& x0 = batch[b].x0;
    const VideoLatent& eps = draws[b].eps;
    detail::check_axis("channels", x0.channels(), w.config.channels);
    const std::size_t n = x0.shape().cells();
    const std::size_t c = x0.channels();
    const T t = static_cast<T>(draws[b].t);
    Matrix<T> xt(n, c), target(n, c);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      xt[i] = (T(1) - t) * static_cast<T>(x0[i]) + t * static_cast<T>(eps[i]);
      target[i] = static_cast<T>(eps[i]) - static_cast<T>(x0[i]);
    }
    const Matrix<T> text = batch[b].cond.tokens.template cast<T>();
    ForwardCache<T> cache;
    const Matrix<T> v = forward<T>(w, xt, x0.shape(), static_cast<double>(draws[b].t),
                                   text, {}, grad ? &cache : nullptr, opts);
    const double norm = scale / (static_cast<double>(v.size()) * batch.size());
    Matrix<T> dv(n, c);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T d = v[i] - target[i];
      s += static_cast<double>(d) * static_cast<double>(d);
      dv[i] = static_cast<T>(2.0 * norm) * d;
    }
    total += s / static_cast<double>(v.size());
    if (grad) backward(w, cache, dv, *grad, opts);
  }
  const double loss = scale * total / static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite flow-matching loss");
  if (grad) {
    for_each_param(*grad, [](const std::string& name, const Matrix<T>& g) {
      if (!g.all_finite()) throw NumericError("non-finite gradient in " + name);
    });
  }
  return loss;
}

struct TrainConfig {
  double step_size = 0.1;
  std::size_t steps = 200;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::filesystem::path dataset;     // synthesized index.json
  std::filesystem::path checkpoint;  // output directory
  std::filesystem::path trace;       // loss trace JSON; empty = checkpoint/trace.json
  ModelConfig model;

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
      throw InvalidArgument("train step_size must be > 0");
    }
    if (batch_size == 0) throw InvalidArgument("train batch_size must be >= 1");
    model.validate();
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"step_size", c.step_size},   {"steps", c.steps},
          {"batch_size", c.batch_size}, {"seed", c.seed},
          {"dataset", c.dataset.string()}, {"checkpoint", c.checkpoint.string()},
          {"trace", c.trace.string()},  {"model", to_json(c.model)}};
}

// Relative paths resolve against `base_dir`.
inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown_keys(j,
                              {"step_size", "steps", "batch_size", "seed", "dataset",
                               "checkpoint", "trace", "model"},
                              "train config");
  TrainConfig c;
  detail::read_key(j, "step_size", c.step_size);
  detail::read_key(j, "steps", c.steps);
  detail::read_key(j, "batch_size", c.batch_size);
  detail::read_key(j, "seed", c.seed);
  std::string s;
  auto path_key = [&](const char* key, std::filesystem::path& out) {
    if (!j.contains(key)) return;
    detail::read_key(j, key, s);
    std::filesystem::path p(s);
    out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  path_key("dataset", c.dataset);
  path_key("checkpoint", c.checkpoint);
  path_key("trace", c.trace);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  c.validate();
  return c;
}

struct LossTrace {
  std::vector<double> loss;  // batch loss before each update
  double eval_initial = 0.0;  // fixed evaluation draw, initial weights
  double eval_final = 0.0;    // same draw, final weights
};

inline nlohmann::json to_json(const LossTrace& t) {
  return {{"loss", t.loss}, {"eval_initial", t.eval_initial}, {"eval_final", t.eval_final}};
}

// Loads oracle clips and prompts of a synthesized set.
inline std::vector<TrainExample> load_training_set(const std::filesystem::path& index,
                                                   const ModelConfig& cfg) {
  std::vector<TrainExample> out;
  for (const auto& m : read_bench_index(index)) {
    const nlohmann::json j = read_json_file(m);
    if (!j.contains("oracle") || !j.contains("prompt")) {
      throw FormatError("training case lacks oracle/prompt: " + m.string());
    }
    TrainExample ex;
    ex.x0 = read_tensor(m.parent_path() / j.at("oracle").get<std::string>());
    detail::check_axis("training clip channels", ex.x0.channels(), cfg.channels);
    ex.cond = embed_prompt(j.at("prompt").get<std::string>(), cfg);
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw InvalidArgument("training set is empty");
  return out;
}

struct TrainResult {
  Weights<float> weights;
  LossTrace trace;
};

// Plain gradient descent. Batch members are drawn with replacement from
// the "train-batch/<step>" stream. On divergence `res` holds the trace so far.
inline void train_on(const TrainConfig& cfg, const std::vector<TrainExample>& data,
                     TrainResult& res) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("training set is empty");
  res = TrainResult{};
  res.weights = init_weights<float>(cfg.model, cfg.seed);
  const std::vector<FmDraw> eval_draws = draw_fm_noise(data, cfg.seed, 0, "train-eval");
  res.trace.eval_initial = fm_loss_and_grad<float>(res.weights, data, eval_draws, nullptr);
  Weights<float> grad;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    SeededRng pick = SeededRng::derive(cfg.seed, "train-batch", step, 0);
    std::vector<TrainExample> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) batch.push_back(data[pick.below(data.size())]);
    const std::vector<FmDraw> draws = draw_fm_noise(batch, cfg.seed, step);
    double loss = 0.0;
    try {
      loss = fm_loss_and_grad(res.weights, batch, draws, &grad);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at training step " + std::to_string(step));
    }
    res.trace.loss.push_back(loss);
    std::vector<Matrix<float>*> gs;
    for_each_param(grad, [&](const std::string&, Matrix<float>& g) { gs.push_back(&g); });
    std::size_t i = 0;
    const auto lr = static_cast<float>(cfg.step_size);
    for_each_param(res.weights, [&](const std::string&, Matrix<float>& m) {
      const Matrix<float>& g = *gs[i++];
      for (std::size_t k = 0; k < m.size(); ++k) m[k] -= lr * g[k];
    });
  }
  res.trace.eval_final = fm_loss_and_grad<float>(res.weights, data, eval_draws, nullptr);
}

inline TrainResult train_on(const TrainConfig& cfg, const std::vector<TrainExample>& data) {
  TrainResult res;
  train_on(cfg, data, res);
  return res;
}

// Trains on cfg.dataset and writes the checkpoint and trace.
inline TrainResult train(const TrainConfig& cfg) {
  const std::vector<TrainExample> data = load_training_set(cfg.dataset, cfg.model);
  const std::filesystem::path trace =
      !cfg.trace.empty() ? cfg.trace
                         : (cfg.checkpoint.empty() ? std::filesystem::path{}
                                                   : cfg.checkpoint / "trace.json");
  TrainResult res;
  try {
    train_on(cfg, data, res);
  } catch (const NumericError& e) {
    if (!trace.empty()) {
      write_json_file(trace, {{"config", to_json(cfg)},
                              {"trace", to_json(res.trace)},
                              {"aborted", e.what()}});
    }
    throw;
  }
  if (!cfg.checkpoint.empty()) save_checkpoint(cfg.checkpoint, res.weights);
  if (!trace.empty()) {
    write_json_file(trace, {{"config", to_json(cfg)}, {"trace", to_json(res.trace)}});
  }
  return res;
}

}  // namespace vidinsert

#endif  // VIDINSERT_TRAINER_HPP_
