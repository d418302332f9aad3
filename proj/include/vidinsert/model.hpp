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

// Toy spatiotemporal transformer predicting a flow-matching velocity.
//
// Sequence layout: [text tokens | visual tokens]. Visual tokens are latent
// cells in frame-major, then row, then column order; one token per cell.
// Each layer is pre-RMSNorm self-attention followed by a pre-RMSNorm SiLU
// feed-forward, both residual. A value hook may rewrite the visual rows of V
// right after the value projection.

#ifndef VIDINSERT_MODEL_HPP_
#define VIDINSERT_MODEL_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "vidinsert/attention.hpp"
#include "vidinsert/error.hpp"
#include "vidinsert/matrix.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 32;
  std::size_t ffn_mult = 2;
  std::size_t text_tokens = 8;
  std::size_t channels = 12;

  std::size_t ffn_width() const { return d_model * ffn_mult; }
  std::size_t head_dim() const { return d_model / heads; }

  void validate() const {
    if (layers == 0 || heads == 0 || d_model == 0 || ffn_mult == 0 ||
        channels == 0) {
      throw InvalidArgument("model config extents must be >= 1");
    }
    if (d_model % heads != 0) {
      throw InvalidArgument("d_model must be divisible by heads");
    }
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kRmsEps = 1e-5;

template <typename T>
struct LayerWeights {
  Matrix<T> attn_norm;  // 1 x D
  Matrix<T> wq, wk, wv, wo;  // D x D
  Matrix<T> ffn_norm;  // 1 x D
  Matrix<T> ffn_up;    // D x F
  Matrix<T> ffn_down;  // F x D
};

template <typename T>
struct Weights {
  ModelConfig config;
  Matrix<T> in_proj;     // C x D
  Matrix<T> time_proj;   // D x D
  std::vector<LayerWeights<T>> layers;
  Matrix<T> final_norm;  // 1 x D
  Matrix<T> out_proj;    // D x C

  // Zero-filled weights with the shapes implied by `cfg`.
  static Weights zeros(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.d_model;
    const std::size_t f = cfg.ffn_width();
    Weights w;
    w.config = cfg;
    w.in_proj = Matrix<T>(cfg.channels, d);
    w.time_proj = Matrix<T>(d, d);
    w.layers.resize(cfg.layers);
    for (auto& l : w.layers) {
      l.attn_norm = Matrix<T>(1, d);
      l.wq = Matrix<T>(d, d);
      l.wk = Matrix<T>(d, d);
      l.wv = Matrix<T>(d, d);
      l.wo = Matrix<T>(d, d);
      l.ffn_norm = Matrix<T>(1, d);
      l.ffn_up = Matrix<T>(d, f);
      l.ffn_down = Matrix<T>(f, d);
    }
    w.final_norm = Matrix<T>(1, d);
    w.out_proj = Matrix<T>(d, cfg.channels);
    return w;
  }
};

// Visits every parameter in canonical (checkpoint / init) order.
template <typename W, typename Fn>
void for_each_param(W& w, Fn&& fn) {
  fn(std::string("in_proj"), w.in_proj);
  fn(std::string("time_proj"), w.time_proj);
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    auto& l = w.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    fn(p + "attn_norm", l.attn_norm);
    fn(p + "wq", l.wq);
    fn(p + "wk", l.wk);
    fn(p + "wv", l.wv);
    fn(p + "wo", l.wo);
    fn(p + "ffn_norm", l.ffn_norm);
    fn(p + "ffn_up", l.ffn_up);
    fn(p + "ffn_down", l.ffn_down);
  }
  fn(std::string("final_norm"), w.final_norm);
  fn(std::string("out_proj"), w.out_proj);
}

template <typename U, typename T>
Weights<U> cast_weights(const Weights<T>& w) {
  Weights<U> out = Weights<U>::zeros(w.config);
  std::vector<const Matrix<T>*> from;
  for_each_param(w, [&](const std::string&, const Matrix<T>& m) { from.push_back(&m); });
  std::size_t i = 0;
  for_each_param(out, [&](const std::string&, Matrix<U>& m) {
    m = from[i++]->template cast<U>();
  });
  return out;
}

// Deterministic initialization: Gaussian projections with std 1/sqrt(fan_in),
// unit normalization scales. Drawn from the "weights" stream of `seed`.
template <typename T>
Weights<T> init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  Weights<T> w = Weights<T>::zeros(cfg);
  SeededRng rng(seed, "weights");
  for_each_param(w, [&](const std::string& name, Matrix<T>& m) {
    if (name.ends_with("norm")) {
      m.fill(T(1));
      return;
    }
    const double std = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    for (auto& x : m.values()) x = static_cast<T>(std * rng.normal());
  });
  return w;
}

// Text conditioning rows (text_tokens x d_model). Row 0 is seeded by the
// whole prompt, rows 1.. by individual words; words past the last row are
// folded into it. Each seed is a 64-bit FNV-1a hash.
struct ConditionEmbedding {
  Matrix<float> tokens;
  friend bool operator==(const ConditionEmbedding& a,
                         const ConditionEmbedding& b) {
    return a.tokens.bitwise_equal(b.tokens);
  }
};

inline ConditionEmbedding embed_prompt(const std::string& prompt,
                                       const ModelConfig& cfg) {
  ConditionEmbedding e{Matrix<float>(cfg.text_tokens, cfg.d_model)};
  if (cfg.text_tokens == 0) return e;
  auto add_token = [&](std::size_t row, std::uint64_t h, const char* label) {
    SeededRng rng(h, label);
    for (std::size_t c = 0; c < cfg.d_model; ++c) {
      e.tokens(row, c) += static_cast<float>(rng.normal());
    }
  };
  add_token(0, fnv1a64(prompt), "prompt");
  std::istringstream words(prompt);
  std::string word;
  std::size_t row = 1;
  while (words >> word && cfg.text_tokens > 1) {
    add_token(std::min(row, cfg.text_tokens - 1), fnv1a64(word), "word");
    ++row;
  }
  return e;
}

// Fixed 3D sinusoidal encoding: the model width is split into three equal
// even-sized bands for frame, row and column; leftover columns stay zero.
template <typename T>
Matrix<T> spacetime_encoding(std::size_t frames, std::size_t height,
                             std::size_t width, std::size_t d_model) {
  const std::size_t band = 2 * (d_model / 6);
  Matrix<T> pe(frames * height * width, d_model);
  if (band == 0) return pe;
  auto fill_band = [&](std::size_t row, std::size_t offset, double pos) {
    for (std::size_t k = 0; k < band / 2; ++k) {
      const double freq =
          std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(band));
      pe(row, offset + 2 * k) = static_cast<T>(std::sin(pos * freq));
      pe(row, offset + 2 * k + 1) = static_cast<T>(std::cos(pos * freq));
    }
  };
  std::size_t r = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x, ++r) {
        fill_band(r, 0, static_cast<double>(t));
        fill_band(r, band, static_cast<double>(y));
        fill_band(r, 2 * band, static_cast<double>(x));
      }
    }
  }
  return pe;
}

// Sinusoidal embedding of 1000 * t, 1 x d_model.
template <typename T>
Matrix<T> time_embedding(double t, std::size_t d_model) {
  Matrix<T> e(1, d_model);
  const std::size_t half = d_model / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    e(0, 2 * k) = static_cast<T>(std::sin(1000.0 * t * freq));
    e(0, 2 * k + 1) = static_cast<T>(std::cos(1000.0 * t * freq));
  }
  return e;
}

// Rewrites the visual value rows of one layer. Receives the layer index and
// V_vis (visual_len x d_model); must return the same shape.
template <typename T>
using ValueHook = std::function<Matrix<T>(std::size_t layer, Matrix<T> v_vis)>;

template <typename T>
struct LayerCache {
  Matrix<T> h_in, a, q, k, v, attn, h_mid, b, up, act;
  std::vector<T> rms1, rms2;
  std::vector<Matrix<T>> probs;
};

// Intermediates kept for the backward pass.
template <typename T>
struct ForwardCache {
  Matrix<T> x_vis;
  Matrix<T> temb;
  std::vector<LayerCache<T>> layers;
  Matrix<T> h_final;  // visual rows only
  Matrix<T> f;
  std::vector<T> rms_final;
};

struct ForwardOptions {
  // Layers bypassed entirely (residual passes through unchanged).
  std::vector<bool> skip_layers;
  bool skipped(std::size_t l) const {
    return l < skip_layers.size() && skip_layers[l];
  }
};

namespace detail {

// y_i = x_i / rms(x_i) * g; returns the per-row rms.
template <typename T>
std::vector<T> rms_norm(const Matrix<T>& x, const Matrix<T>& g, Matrix<T>& y,
                        std::size_t row_begin = 0) {
  const std::size_t rows = x.rows() - row_begin;
  const std::size_t d = x.cols();
  y = Matrix<T>(rows, d);
  std::vector<T> rms(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const T* xi = x.data() + (row_begin + i) * d;
    T ss = T(0);
    for (std::size_t c = 0; c < d; ++c) ss += xi[c] * xi[c];
    const T r = std::sqrt(ss / static_cast<T>(d) + static_cast<T>(kRmsEps));
    rms[i] = r;
    const T inv = T(1) / r;
    for (std::size_t c = 0; c < d; ++c) y(i, c) = xi[c] * inv * g(0, c);
  }
  return rms;
}

template <typename T>
T silu(T u) {
  return u / (T(1) + std::exp(-u));
}

}  // namespace detail

// Runs the network on visual inputs x_vis ((frames*height*width) x channels)
// and returns the velocity rows in the same layout.
template <typename T>
Matrix<T> forward(const Weights<T>& w, const Matrix<T>& x_vis,
                  const Shape4& grid, double t, const Matrix<T>& text,
                  const ValueHook<T>& hook = {}, ForwardCache<T>* cache = nullptr,
                  const ForwardOptions& opts = {}) {
  const ModelConfig& cfg = w.config;
  const std::size_t d = cfg.d_model;
  const std::size_t n_vis = grid.frames * grid.height * grid.width;
  const std::size_t n_text = cfg.text_tokens;
  const std::size_t n = n_text + n_vis;
  detail::check_axis("visual tokens", x_vis.rows(), n_vis);
  detail::check_axis("channels", x_vis.cols(), cfg.channels);
  detail::check_axis("text tokens", text.rows(), n_text);
  detail::check_axis("text width", text.cols(), d);

  Matrix<T> temb = time_embedding<T>(t, d);
  Matrix<T> tproj = matmul(temb, w.time_proj);
  Matrix<T> h(n, d);
  h.set_rows(0, text);
  {
    Matrix<T> vis = matmul(x_vis, w.in_proj);
    const Matrix<T> pe = spacetime_encoding<T>(grid.frames, grid.height, grid.width, d);
    for (std::size_t i = 0; i < n_vis; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        h(n_text + i, c) = vis(i, c) + pe(i, c) + tproj(0, c);
      }
    }
  }
  if (cache) {
    cache->x_vis = x_vis;
    cache->temb = temb;
    cache->layers.assign(cfg.layers, LayerCache<T>{});
  }

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    if (opts.skipped(l)) continue;
    const LayerWeights<T>& lw = w.layers[l];
    LayerCache<T> scratch;
    LayerCache<T>& lc = cache ? cache->layers[l] : scratch;
    if (cache) lc.h_in = h;

    lc.rms1 = detail::rms_norm(h, lw.attn_norm, lc.a);
    AttentionState<T> st;
    st.heads = cfg.heads;
    st.text_len = n_text;
    st.q = matmul(lc.a, lw.wq);
    st.k = matmul(lc.a, lw.wk);
    st.v = matmul(lc.a, lw.wv);
    if (hook) {
      Matrix<T> replaced = hook(l, st.v.slice_rows(n_text, n_vis));
      if (replaced.rows() != n_vis || replaced.cols() != d) {
        throw DimensionError("value hook returned wrong shape at layer " +
                             std::to_string(l));
      }
      st.v.set_rows(n_text, replaced);
    }
    lc.attn = attention(st, cache ? &lc.probs : nullptr);
    Matrix<T> proj = matmul(lc.attn, lw.wo);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += proj[i];
    if (cache) {
      lc.q = std::move(st.q);
      lc.k = std::move(st.k);
      lc.v = std::move(st.v);
      lc.h_mid = h;
    }

    lc.rms2 = detail::rms_norm(h, lw.ffn_norm, lc.b);
    matmul(lc.b, lw.ffn_up, lc.up);
    lc.act = Matrix<T>(lc.up.rows(), lc.up.cols());
    for (std::size_t i = 0; i < lc.up.size(); ++i) lc.act[i] = detail::silu(lc.up[i]);
    Matrix<T> down = matmul(lc.act, lw.ffn_down);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += down[i];
  }

  Matrix<T> f;
  std::vector<T> rms_final = detail::rms_norm(h, w.final_norm, f, n_text);
  Matrix<T> vel = matmul(f, w.out_proj);
  if (cache) {
    cache->h_final = h.slice_rows(n_text, n_vis);
    cache->f = std::move(f);
    cache->rms_final = std::move(rms_final);
  }
  return vel;
}

inline Matrix<float> latent_rows(const VideoLatent& x) {
  Matrix<float> m(x.shape().cells(), x.channels());
  std::copy(x.data().begin(), x.data().end(), m.data());
  return m;
}

inline VideoLatent rows_to_latent(const Matrix<float>& m, const Shape4& shape) {
  return VideoLatent(shape, std::vector<float>(m.values().begin(), m.values().end()));
}

// Velocity of the toy backbone at (latent, t) under text conditioning.
inline VideoLatent predict_velocity(const Weights<float>& w,
                                    const VideoLatent& latent, float t,
                                    const ConditionEmbedding& cond,
                                    const ValueHook<float>& hook = {}) {
  detail::check_axis("channels", latent.channels(), w.config.channels);
  Matrix<float> vel = forward<float>(w, latent_rows(latent), latent.shape(),
                                     static_cast<double>(t), cond.tokens, hook);
  if (!vel.all_finite()) throw NumericError("non-finite velocity prediction");
  return rows_to_latent(vel, latent.shape());
}

}  // namespace vidinsert

#endif  // VIDINSERT_MODEL_HPP_
