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

// Dual-path insertion sampler.
//
// Each step at time t:
//   1. x_rec = (1 - t) x0 + t eps                     reconstruction latent
//   2. run the model on x_rec, capturing V_vis per layer; drop its velocity
//   3. refresh: background cells of the edited latent <- x_rec
//   4. anchor: edited cells of frame 0 <- (1 - t) X1_hat + t eps[0]
//   5. run the model on the edited latent with clone / fusion hooks
//   6. Euler step
// After the last step the refresh and anchor are applied once more at t = 0.

#ifndef VIDINSERT_PIPELINE_HPP_
#define VIDINSERT_PIPELINE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidinsert/checkpoint.hpp"
#include "vidinsert/error.hpp"
#include "vidinsert/flow.hpp"
#include "vidinsert/guidance.hpp"
#include "vidinsert/model.hpp"
#include "vidinsert/tensor_io.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

struct InsertJob {
  VideoLatent source;        // X_{1:T}
  VideoLatent edited_frame;  // X1_hat, one frame
  RegionMask mask;           // 1 = edited region
  std::string prompt;
  GuidanceConfig guidance;

  void validate() const {
    if (source.empty()) throw InvalidArgument("job has no source video");
    detail::check_axis("edited frame count", edited_frame.frames(), 1);
    detail::check_axis("edited frame height", edited_frame.height(), source.height());
    detail::check_axis("edited frame width", edited_frame.width(), source.width());
    detail::check_axis("edited frame channels", edited_frame.channels(), source.channels());
    check_mask_shape(mask, source.shape());
    guidance.validate();
  }
};

struct RunArtifacts {
  VideoLatent output;
  // Mean |x_hat - x_bg| over background latent cells after each step (the
  // last entry after the terminal refresh / anchor).
  std::vector<double> drift;
  GuidanceConfig config;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  // Deterministic part of the run report; wall time is reported separately.
  nlohmann::json report() const {
    return {{"config", to_json(config)},
            {"seed", seed},
            {"steps", drift.size()},
            {"drift", drift}};
  }
};

// Test probes into a run.
struct RunProbe {
  std::function<void(std::string_view consumer, const NoiseInstance& eps)> on_noise;
  std::function<void(std::size_t step, const ValueCache& cache)> on_cache_frozen;
};

namespace detail {

// Frame-0 cells (all, or those set in `mask`) follow the straight path from
// eps[0] to the edited first frame.
inline void anchor_first_frame(VideoLatent& x, const VideoLatent& first,
                               const VideoLatent& eps, float t,
                               const RegionMask* mask) {
  const std::size_t c = x.channels();
  const std::size_t cells = x.height() * x.width();
  auto dst = x.frame(0);
  auto src = first.frame(0);
  auto noise = eps.frame(0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (mask && !(*mask)[cell]) continue;
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = cell * c + k;
      dst[i] = lerp_path(src[i], noise[i], t);
    }
  }
}

inline double background_drift(const VideoLatent& x, const VideoLatent& bg,
                               const RegionMask& mask) {
  const std::size_t c = x.channels();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t cell = 0; cell < mask.size(); ++cell) {
    if (mask[cell]) continue;
    for (std::size_t k = 0; k < c; ++k) {
      sum += std::abs(static_cast<double>(x[cell * c + k]) - bg[cell * c + k]);
    }
    n += c;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline RunArtifacts run_insert(const Weights<float>& weights,
                               const InsertJob& job, const RunProbe& probe = {}) {
  job.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const GuidanceConfig& g = job.guidance;
  const TimeGrid grid = TimeGrid::uniform(g.steps);
  const NoiseInstance eps(job.source.shape(), g.seed);
  const ConditionEmbedding cond = embed_prompt(job.prompt, weights.config);
  const TokenMask tmask = tokenize_mask(job.mask);
  const std::size_t layers = weights.config.layers;

  RunArtifacts art;
  art.config = g;
  art.seed = g.seed;
  art.drift.reserve(g.steps);

  ValueCache cache;
  std::size_t current_step = 0;

  SamplerCallbacks cb;
  cb.before_predict = [&](std::size_t step, float t, VideoLatent& x) {
    current_step = step;
    if (probe.on_noise) probe.on_noise("reconstruction", eps);
    const VideoLatent x_rec = forward_interpolate(job.source, eps, t);
    cache = ValueCache{};
    predict_velocity(weights, x_rec, t, cond, capture_hook(cache, step));
    cache.require_step(step, layers);
    cache.freeze();
    if (probe.on_cache_frozen) probe.on_cache_frozen(step, cache);
    if (g.refresh_at(step)) {
      if (probe.on_noise) probe.on_noise("refresh", eps);
      x = latent_refresh(x, x_rec, job.mask);
    }
    detail::anchor_first_frame(x, job.edited_frame, eps.latent(), t, &job.mask);
  };
  cb.after_step = [&](std::size_t step, float t_next, VideoLatent& x) {
    if (!x.all_finite()) {
      throw NumericError("non-finite state at step " + std::to_string(step));
    }
    const VideoLatent x_bg = forward_interpolate(job.source, eps, t_next);
    if (step + 1 == grid.steps()) {
      if (g.refresh_enabled && g.terminal_refresh) x = latent_refresh(x, x_bg, job.mask);
      detail::anchor_first_frame(x, job.edited_frame, eps.latent(), t_next, &job.mask);
    }
    art.drift.push_back(detail::background_drift(x, x_bg, job.mask));
  };

  auto field = [&](const VideoLatent& x, float t) {
    return predict_velocity(weights, x, t, cond,
                            fusion_hook(cache, current_step, tmask, g));
  };
  if (probe.on_noise) probe.on_noise("initial", eps);
  art.output = sample(field, eps, grid, cb);
  art.wall_seconds = detail::seconds_since(t0);
  return art;
}

// Image-conditioned sampler without any background guidance: frame 0 is
// anchored to the edited first frame everywhere, nothing else is touched.
inline VideoLatent sample_unguided(const Weights<float>& weights,
                                   const InsertJob& job) {
  job.validate();
  const GuidanceConfig& g = job.guidance;
  const TimeGrid grid = TimeGrid::uniform(g.steps);
  const NoiseInstance eps(job.source.shape(), g.seed);
  const ConditionEmbedding cond = embed_prompt(job.prompt, weights.config);
  SamplerCallbacks cb;
  cb.before_predict = [&](std::size_t, float t, VideoLatent& x) {
    detail::anchor_first_frame(x, job.edited_frame, eps.latent(), t, nullptr);
  };
  cb.after_step = [&](std::size_t step, float t_next, VideoLatent& x) {
    if (!x.all_finite()) {
      throw NumericError("non-finite state at step " + std::to_string(step));
    }
    if (step + 1 == grid.steps()) {
      detail::anchor_first_frame(x, job.edited_frame, eps.latent(), t_next, nullptr);
    }
  };
  auto field = [&](const VideoLatent& x, float t) {
    return predict_velocity(weights, x, t, cond);
  };
  return sample(field, eps, grid, cb);
}

// Reconstruction path alone. Every step re-derives x_rec by interpolation
// and runs the model on it only to capture values; the result at t = 0 is
// the source itself.
inline RunArtifacts run_reconstruct(const Weights<float>& weights,
                                    const VideoLatent& source,
                                    const std::string& prompt,
                                    const GuidanceConfig& g,
                                    ValueCache* cache_out = nullptr) {
  g.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const TimeGrid grid = TimeGrid::uniform(g.steps);
  const NoiseInstance eps(source.shape(), g.seed);
  const ConditionEmbedding cond = embed_prompt(prompt, weights.config);
  ValueCache local;
  ValueCache& cache = cache_out ? *cache_out : local;
  RunArtifacts art;
  art.config = g;
  art.seed = g.seed;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const VideoLatent x_rec = forward_interpolate(source, eps, grid[k]);
    predict_velocity(weights, x_rec, grid[k], cond, capture_hook(cache, k));
    if (!cache_out) cache.release(k);
    art.drift.push_back(0.0);
  }
  cache.freeze();
  art.output = forward_interpolate(source, eps, 0.f);
  art.wall_seconds = detail::seconds_since(t0);
  return art;
}

struct OverheadReport {
  double dual_path_seconds = 0.0;    // median run_insert
  double single_path_seconds = 0.0;  // median sample_unguided
  double ratio = 0.0;
  std::size_t trials = 0;
};

inline OverheadReport overhead_report(const Weights<float>& weights,
                                      const InsertJob& job,
                                      std::size_t trials = 5) {
  if (trials == 0) throw InvalidArgument("overhead report needs >= 1 trial");
  std::vector<double> dual, single;
  for (std::size_t i = 0; i < trials; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    sample_unguided(weights, job);
    single.push_back(detail::seconds_since(t0));
    t0 = std::chrono::steady_clock::now();
    run_insert(weights, job);
    dual.push_back(detail::seconds_since(t0));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  OverheadReport r;
  r.trials = trials;
  r.dual_path_seconds = median(dual);
  r.single_path_seconds = median(single);
  r.ratio = r.dual_path_seconds / r.single_path_seconds;
  return r;
}

// Job manifest: {"source", "edited_frame", "mask", "prompt", "oracle"?,
// "guidance"?}; paths are relative to the manifest's directory. Synthesized
// cases add "mask_px", "case" and "spec".
struct JobManifest {
  std::filesystem::path dir;
  std::filesystem::path source, edited_frame, mask;
  std::optional<std::filesystem::path> oracle, mask_px;
  std::string prompt;
  std::string case_id;
  nlohmann::json guidance = nlohmann::json::object();
};

inline JobManifest read_job_manifest(const std::filesystem::path& path) {
  const nlohmann::json j = read_json_file(path);
  detail::reject_unknown_keys(j,
                              {"source", "edited_frame", "mask", "prompt", "oracle",
                               "guidance", "mask_px", "case", "spec"},
                              "job manifest");
  JobManifest m;
  m.dir = path.parent_path();
  auto req = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw FormatError(std::string("job manifest lacks '") + key + "'");
    }
    return m.dir / j.at(key).get<std::string>();
  };
  m.source = req("source");
  m.edited_frame = req("edited_frame");
  m.mask = req("mask");
  if (j.contains("oracle")) m.oracle = req("oracle");
  if (j.contains("mask_px")) m.mask_px = req("mask_px");
  detail::read_key(j, "prompt", m.prompt);
  detail::read_key(j, "case", m.case_id);
  if (j.contains("guidance")) m.guidance = j.at("guidance");
  return m;
}

inline InsertJob load_job(const JobManifest& m, const GuidanceConfig& base) {
  InsertJob job;
  job.source = read_tensor(m.source);
  job.edited_frame = read_tensor(m.edited_frame);
  job.mask = read_mask(m.mask, job.source.frames());
  job.prompt = m.prompt;
  job.guidance = guidance_from_json(m.guidance, base);
  job.validate();
  return job;
}

}  // namespace vidinsert

#endif  // VIDINSERT_PIPELINE_HPP_
