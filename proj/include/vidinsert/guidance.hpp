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

// Background guidance for the edited path:
//
//  * value clone   V* = M V + (1 - M) V_rec
//  * sparse fusion V* = M V + (1 - M) [R V + (1 - R) V_rec], R ~ Bernoulli(p)
//  * latent refresh x* = M x + (1 - M) x_bg(t)
//
// M is 1 on the edited region. Clone and fusion act on whole token rows of
// the visual value matrix; refresh acts on latent cells.

#ifndef VIDINSERT_GUIDANCE_HPP_
#define VIDINSERT_GUIDANCE_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidinsert/error.hpp"
#include "vidinsert/matrix.hpp"
#include "vidinsert/model.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

// Latent cells grouped into one visual token.
struct TokenGeometry {
  std::size_t patch_h = 1;
  std::size_t patch_w = 1;
};

// One bit per visual token in frame / row / column order.
struct TokenMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool operator[](std::size_t j) const { return bits[j] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }
  friend bool operator==(const TokenMask&, const TokenMask&) = default;
};

// Token j is edited iff any latent cell it covers is edited.
inline TokenMask tokenize_mask(const RegionMask& mask,
                               const TokenGeometry& geo = {}) {
  if (geo.patch_h == 0 || geo.patch_w == 0 ||
      mask.height() % geo.patch_h != 0 || mask.width() % geo.patch_w != 0) {
    throw DimensionError("token geometry does not tile mask " +
                         std::to_string(mask.height()) + "x" +
                         std::to_string(mask.width()));
  }
  const std::size_t th = mask.height() / geo.patch_h;
  const std::size_t tw = mask.width() / geo.patch_w;
  TokenMask tm{std::vector<std::uint8_t>(mask.frames() * th * tw, 0)};
  for (std::size_t t = 0; t < mask.frames(); ++t) {
    for (std::size_t y = 0; y < mask.height(); ++y) {
      for (std::size_t x = 0; x < mask.width(); ++x) {
        if (mask.at(t, y, x)) {
          tm.bits[(t * th + y / geo.patch_h) * tw + x / geo.patch_w] = 1;
        }
      }
    }
  }
  return tm;
}

// Bernoulli(p) keep-bits for the edited path's own background values.
struct RetentionMask {
  std::vector<std::uint8_t> bits;
  double p = 0.0;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  std::size_t layer = 0;

  std::size_t size() const { return bits.size(); }
  bool operator[](std::size_t j) const { return bits[j] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }
};

// Draws n i.i.d. Bernoulli(p) bits from the ("retention", step, layer)
// substream of `seed`; the same provenance always gives the same bits.
inline RetentionMask sample_retention_mask(std::size_t n, double p,
                                           std::uint64_t seed,
                                           std::size_t step,
                                           std::size_t layer) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("retention probability outside [0,1]");
  }
  RetentionMask r{std::vector<std::uint8_t>(n, 0), p, seed, step, layer};
  SeededRng rng = SeededRng::derive(seed, "retention", step, layer);
  for (auto& b : r.bits) b = rng.bernoulli(p) ? 1 : 0;
  return r;
}

namespace detail {

template <typename T>
void check_value_rows(const Matrix<T>& v, const Matrix<T>& v_rec,
                      std::size_t mask_len) {
  detail::check_axis("value rows", v.rows(), v_rec.rows());
  detail::check_axis("value cols", v.cols(), v_rec.cols());
  detail::check_axis("token mask length", mask_len, v.rows());
}

}  // namespace detail

// Edited tokens keep V_vis; background tokens take the reconstruction rows.
template <typename T>
Matrix<T> clone_values(const Matrix<T>& v_vis, const Matrix<T>& v_rec_vis,
                       const TokenMask& tmask) {
  detail::check_value_rows(v_vis, v_rec_vis, tmask.size());
  Matrix<T> out = v_rec_vis;
  for (std::size_t j = 0; j < tmask.size(); ++j) {
    if (tmask[j]) std::copy(v_vis.row(j).begin(), v_vis.row(j).end(), out.row(j).begin());
  }
  return out;
}

// Background tokens keep V_vis where r = 1 and take V_rec where r = 0;
// edited tokens always keep V_vis.
template <typename T>
Matrix<T> sparse_fuse(const Matrix<T>& v_vis, const Matrix<T>& v_rec_vis,
                      const TokenMask& tmask, const RetentionMask& r) {
  detail::check_value_rows(v_vis, v_rec_vis, tmask.size());
  detail::check_axis("retention mask length", r.size(), tmask.size());
  Matrix<T> out = v_rec_vis;
  for (std::size_t j = 0; j < tmask.size(); ++j) {
    if (tmask[j] || r[j]) {
      std::copy(v_vis.row(j).begin(), v_vis.row(j).end(), out.row(j).begin());
    }
  }
  return out;
}

// Edited cells keep x_hat; background cells take the noised source latent.
inline VideoLatent latent_refresh(const VideoLatent& x_hat,
                                  const VideoLatent& x_bg,
                                  const RegionMask& mask) {
  return masked_blend(x_hat, x_bg, mask);
}

// Frozen reconstruction-path values keyed by (step, layer).
class ValueCache {
 public:
  using Key = std::pair<std::size_t, std::size_t>;

  void put(std::size_t step, std::size_t layer, Matrix<float> v) {
    if (frozen_) throw CacheError("value cache is frozen");
    auto [it, inserted] = entries_.emplace(Key{step, layer}, std::move(v));
    if (!inserted) {
      throw CacheError("duplicate value capture for step " + std::to_string(step) +
                       " layer " + std::to_string(layer));
    }
  }

  const Matrix<float>& get(std::size_t step, std::size_t layer) const {
    auto it = entries_.find(Key{step, layer});
    if (it == entries_.end()) {
      throw CacheError("value cache miss for step " + std::to_string(step) +
                       " layer " + std::to_string(layer));
    }
    return it->second;
  }

  bool contains(std::size_t step, std::size_t layer) const {
    return entries_.count(Key{step, layer}) != 0;
  }

  // Checks that every layer of `step` is present before it is read.
  void require_step(std::size_t step, std::size_t layers) const {
    for (std::size_t l = 0; l < layers; ++l) get(step, l);
  }

  // Drops one step's entries once the edited pass has consumed them.
  void release(std::size_t step) {
    std::erase_if(entries_, [&](const auto& kv) { return kv.first.first == step; });
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<Key, Matrix<float>>& entries() const { return entries_; }

 private:
  std::map<Key, Matrix<float>> entries_;
  bool frozen_ = false;
};

// How often a fresh retention mask is drawn.
enum class RetentionResample { kPerStepLayer, kPerStep, kFixed };

inline std::string to_string(RetentionResample r) {
  switch (r) {
    case RetentionResample::kPerStep: return "per_step";
    case RetentionResample::kFixed: return "fixed";
    default: return "per_step_layer";
  }
}

inline RetentionResample parse_retention_resample(const std::string& s) {
  if (s == "per_step_layer") return RetentionResample::kPerStepLayer;
  if (s == "per_step") return RetentionResample::kPerStep;
  if (s == "fixed") return RetentionResample::kFixed;
  throw FormatError("unknown retention_resample '" + s + "'");
}

struct GuidanceConfig {
  bool clone_enabled = true;
  bool fusion_enabled = true;
  double retention_p = 0.2;
  RetentionResample retention_resample = RetentionResample::kPerStepLayer;
  bool refresh_enabled = true;
  std::size_t refresh_stride = 1;
  bool terminal_refresh = true;
  std::optional<std::vector<std::size_t>> active_layers;  // nullopt: all
  std::uint64_t seed = 0;
  std::size_t steps = 50;

  void validate() const {
    if (!(retention_p >= 0.0 && retention_p <= 1.0)) {
      throw InvalidArgument("retention_p must lie in [0,1]");
    }
    if (refresh_stride < 1) throw InvalidArgument("refresh_stride must be >= 1");
    if (steps < 1) throw InvalidArgument("steps must be >= 1");
  }

  bool layer_active(std::size_t layer) const {
    if (!active_layers) return true;
    return std::find(active_layers->begin(), active_layers->end(), layer) !=
           active_layers->end();
  }

  bool injects_values() const { return clone_enabled; }

  // Refresh before the prediction of `step`?
  bool refresh_at(std::size_t step) const {
    return refresh_enabled && step % refresh_stride == 0;
  }

  std::pair<std::size_t, std::size_t> retention_key(std::size_t step,
                                                    std::size_t layer) const {
    switch (retention_resample) {
      case RetentionResample::kPerStep: return {step, 0};
      case RetentionResample::kFixed: return {0, 0};
      default: return {step, layer};
    }
  }
};

inline nlohmann::json to_json(const GuidanceConfig& g) {
  nlohmann::json j;
  j["clone_enabled"] = g.clone_enabled;
  j["fusion_enabled"] = g.fusion_enabled;
  j["retention_p"] = g.retention_p;
  j["retention_resample"] = to_string(g.retention_resample);
  j["refresh_enabled"] = g.refresh_enabled;
  j["refresh_stride"] = g.refresh_stride;
  j["terminal_refresh"] = g.terminal_refresh;
  j["active_layers"] = g.active_layers ? nlohmann::json(*g.active_layers)
                                       : nlohmann::json("all");
  j["seed"] = g.seed;
  j["steps"] = g.steps;
  return j;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return item.key() == k; });
    if (!ok) throw FormatError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
inline GuidanceConfig guidance_from_json(const nlohmann::json& j,
                                         GuidanceConfig base = {}) {
  detail::reject_unknown_keys(
      j,
      {"clone_enabled", "fusion_enabled", "retention_p", "retention_resample",
       "refresh_enabled", "refresh_stride", "terminal_refresh", "active_layers",
       "seed", "steps"},
      "guidance");
  detail::read_key(j, "clone_enabled", base.clone_enabled);
  detail::read_key(j, "fusion_enabled", base.fusion_enabled);
  detail::read_key(j, "retention_p", base.retention_p);
  if (j.contains("retention_resample")) {
    std::string s;
    detail::read_key(j, "retention_resample", s);
    base.retention_resample = parse_retention_resample(s);
  }
  detail::read_key(j, "refresh_enabled", base.refresh_enabled);
  detail::read_key(j, "refresh_stride", base.refresh_stride);
  detail::read_key(j, "terminal_refresh", base.terminal_refresh);
  if (j.contains("active_layers")) {
    const auto& a = j.at("active_layers");
    if (a.is_string() && a.get<std::string>() == "all") {
      base.active_layers.reset();
    } else {
      std::vector<std::size_t> layers;
      detail::read_key(j, "active_layers", layers);
      base.active_layers = std::move(layers);
    }
  }
  detail::read_key(j, "seed", base.seed);
  detail::read_key(j, "steps", base.steps);
  base.validate();
  return base;
}

// Reconstruction pass hook: stores each layer's V_vis and returns it as is.
inline ValueHook<float> capture_hook(ValueCache& cache, std::size_t step) {
  return [&cache, step](std::size_t layer, Matrix<float> v) {
    cache.put(step, layer, v);
    return v;
  };
}

// Edited pass hook: clone or sparse fusion against the cached values.
inline ValueHook<float> fusion_hook(const ValueCache& cache, std::size_t step,
                                   const TokenMask& tmask,
                                   const GuidanceConfig& cfg) {
  return [&cache, &tmask, &cfg, step](std::size_t layer, Matrix<float> v) {
    if (!cfg.injects_values() || !cfg.layer_active(layer)) return v;
    const Matrix<float>& rec = cache.get(step, layer);
    if (!cfg.fusion_enabled) return clone_values(v, rec, tmask);
    const auto [rs, rl] = cfg.retention_key(step, layer);
    const RetentionMask r =
        sample_retention_mask(tmask.size(), cfg.retention_p, cfg.seed, rs, rl);
    return sparse_fuse(v, rec, tmask, r);
  };
}

}  // namespace vidinsert

#endif  // VIDINSERT_GUIDANCE_HPP_
