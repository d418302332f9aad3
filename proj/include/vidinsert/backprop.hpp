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

// Reverse-mode gradients of the toy transformer, written out by hand
// against the intermediates in ForwardCache. Text rows are treated as
// constants and value hooks are not supported here.

#ifndef VIDINSERT_BACKPROP_HPP_
#define VIDINSERT_BACKPROP_HPP_

#include <cmath>
#include <vector>

#include "vidinsert/error.hpp"
#include "vidinsert/matrix.hpp"
#include "vidinsert/model.hpp"

namespace vidinsert {

namespace detail {

// out = a * b^T, accumulating into `out` (same shape as a * b^T).
template <typename T>
void matmul_a_bt_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  detail::check_axis("matmul inner", a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      T s = T(0);
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) += s;
    }
  }
}

// Backward of y = x / rms(x) * g over rows [row_begin, ...) of x.
// dy has one row per normalized row. Adds into dx (same rows as x) and dg.
template <typename T>
void rms_norm_backward(const Matrix<T>& x, const Matrix<T>& g,
                       const std::vector<T>& rms, const Matrix<T>& dy,
                       Matrix<T>& dx, Matrix<T>& dg, std::size_t row_begin = 0) {
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    const T* xi = x.data() + (row_begin + i) * d;
    const T* dyi = dy.data() + i * d;
    T* dxi = dx.data() + (row_begin + i) * d;
    const T r = rms[i];
    const T inv = T(1) / r;
    T dot = T(0);
    for (std::size_t c = 0; c < d; ++c) {
      dg(0, c) += dyi[c] * xi[c] * inv;
      dot += dyi[c] * g(0, c) * xi[c];
    }
    const T k = dot / (static_cast<T>(d) * r * r * r);
    for (std::size_t c = 0; c < d; ++c) {
      dxi[c] += g(0, c) * dyi[c] * inv - xi[c] * k;
    }
  }
}

template <typename T>
T silu_grad(T u) {
  const T s = T(1) / (T(1) + std::exp(-u));
  return s * (T(1) + u * (T(1) - s));
}

// Softmax attention backward from cached per-head probabilities.
template <typename T>
void attention_backward(const Matrix<T>& q, const Matrix<T>& k,
                        const Matrix<T>& v, const std::vector<Matrix<T>>& probs,
                        std::size_t heads, const Matrix<T>& dout, Matrix<T>& dq,
                        Matrix<T>& dk, Matrix<T>& dv) {
  const std::size_t n = q.rows();
  const std::size_t d = q.cols() / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  dq = Matrix<T>(n, q.cols());
  dk = Matrix<T>(n, q.cols());
  dv = Matrix<T>(n, q.cols());
  std::vector<T> dp(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d;
    const Matrix<T>& p = probs.at(h);
    for (std::size_t i = 0; i < n; ++i) {
      T row_dot = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        T s = T(0);
        for (std::size_t c = 0; c < d; ++c) s += dout(i, off + c) * v(j, off + c);
        dp[j] = s;
        row_dot += s * p(i, j);
        for (std::size_t c = 0; c < d; ++c) dv(j, off + c) += p(i, j) * dout(i, off + c);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const T ds = p(i, j) * (dp[j] - row_dot) * scale;
        for (std::size_t c = 0; c < d; ++c) {
          dq(i, off + c) += ds * k(j, off + c);
          dk(j, off + c) += ds * q(i, off + c);
        }
      }
    }
  }
}

}  // namespace detail

// Accumulates dL/dW into `grad` given dL/dvel (visual rows x channels) and
// the cache of the forward pass that produced vel.
template <typename T>
void backward(const Weights<T>& w, const ForwardCache<T>& cache,
              const Matrix<T>& dvel, Weights<T>& grad,
              const ForwardOptions& opts = {}) {
  const ModelConfig& cfg = w.config;
  const std::size_t d = cfg.d_model;
  const std::size_t n_text = cfg.text_tokens;
  const std::size_t n_vis = cache.x_vis.rows();
  const std::size_t n = n_text + n_vis;
  detail::check_axis("velocity gradient rows", dvel.rows(), n_vis);
  detail::check_axis("velocity gradient cols", dvel.cols(), cfg.channels);

  matmul_at_b_acc(cache.f, dvel, grad.out_proj);
  Matrix<T> df(n_vis, d);
  detail::matmul_a_bt_acc(dvel, w.out_proj, df);

  Matrix<T> dh(n, d);
  {
    Matrix<T> dh_vis(n_vis, d);
    detail::rms_norm_backward(cache.h_final, w.final_norm, cache.rms_final, df,
                              dh_vis, grad.final_norm);
    dh.set_rows(n_text, dh_vis);
  }

  for (std::size_t l = cfg.layers; l-- > 0;) {
    if (opts.skipped(l)) continue;
    const LayerWeights<T>& lw = w.layers[l];
    LayerWeights<T>& lg = grad.layers[l];
    const LayerCache<T>& lc = cache.layers[l];

    // Feed-forward block.
    matmul_at_b_acc(lc.act, dh, lg.ffn_down);
    Matrix<T> dup(lc.up.rows(), lc.up.cols());
    detail::matmul_a_bt_acc(dh, lw.ffn_down, dup);
    for (std::size_t i = 0; i < dup.size(); ++i) dup[i] *= detail::silu_grad(lc.up[i]);
    matmul_at_b_acc(lc.b, dup, lg.ffn_up);
    Matrix<T> db(n, d);
    detail::matmul_a_bt_acc(dup, lw.ffn_up, db);
    detail::rms_norm_backward(lc.h_mid, lw.ffn_norm, lc.rms2, db, dh, lg.ffn_norm);

    // Attention block.
    matmul_at_b_acc(lc.attn, dh, lg.wo);
    Matrix<T> dattn(n, d);
    detail::matmul_a_bt_acc(dh, lw.wo, dattn);
    Matrix<T> dq, dk, dv;
    detail::attention_backward(lc.q, lc.k, lc.v, lc.probs, cfg.heads, dattn, dq, dk, dv);
    matmul_at_b_acc(lc.a, dq, lg.wq);
    matmul_at_b_acc(lc.a, dk, lg.wk);
    matmul_at_b_acc(lc.a, dv, lg.wv);
    Matrix<T> da(n, d);
    detail::matmul_a_bt_acc(dq, lw.wq, da);
    detail::matmul_a_bt_acc(dk, lw.wk, da);
    detail::matmul_a_bt_acc(dv, lw.wv, da);
    detail::rms_norm_backward(lc.h_in, lw.attn_norm, lc.rms1, da, dh, lg.attn_norm);
  }

  const Matrix<T> dh_vis = dh.slice_rows(n_text, n_vis);
  matmul_at_b_acc(cache.x_vis, dh_vis, grad.in_proj);
  Matrix<T> dtp(1, d);
  for (std::size_t i = 0; i < n_vis; ++i) {
    for (std::size_t c = 0; c < d; ++c) dtp(0, c) += dh_vis(i, c);
  }
  matmul_at_b_acc(cache.temb, dtp, grad.time_proj);
}

}  // namespace vidinsert

#endif  // VIDINSERT_BACKPROP_HPP_
