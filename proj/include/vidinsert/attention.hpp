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

#ifndef VIDINSERT_ATTENTION_HPP_
#define VIDINSERT_ATTENTION_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <vector>

#include "vidinsert/error.hpp"
#include "vidinsert/matrix.hpp"

namespace vidinsert {

namespace detail {

// exp(x) for x <= 0 in plain float arithmetic so the softmax loop vectorizes
// and gives the same bits on every host. Max error about 2 ulp.
inline float exp_nonpositive(float x) {
  constexpr float kLog2e = 1.44269504088896341f;
  constexpr float kShift = 12582912.0f;  // 1.5 * 2^23: round-to-nearest trick
  constexpr float kLn2Hi = 0.693359375f;
  constexpr float kLn2Lo = -2.12194440e-4f;
  // Clamp to -87 on the bit pattern: for x <= 0 a larger unsigned pattern
  // is a more negative value, and an integer min vectorizes where a float
  // compare (NaN-aware) does not.
  constexpr std::uint32_t kFloorBits = std::bit_cast<std::uint32_t>(-87.0f);
  x = std::bit_cast<float>(std::min(std::bit_cast<std::uint32_t>(x), kFloorBits));
  const float z = x * kLog2e + kShift;
  const float n = z - kShift;
  const std::int32_t ni =
      std::bit_cast<std::int32_t>(z) - std::bit_cast<std::int32_t>(kShift);
  float r = x - n * kLn2Hi;
  r = r - n * kLn2Lo;
  float p = 1.f / 5040.f;
  p = p * r + 1.f / 720.f;
  p = p * r + 1.f / 120.f;
  p = p * r + 1.f / 24.f;
  p = p * r + 1.f / 6.f;
  p = p * r + 0.5f;
  p = p * r + 1.f;
  p = p * r + 1.f;
  const float scale = std::bit_cast<float>((ni + 127) << 23);
  return p * scale;
}

template <typename T>
inline T softmax_exp(T x) {
  if constexpr (std::is_same_v<T, float>) {
    return exp_nonpositive(x);
  } else {
    return std::exp(x);
  }
}

}  // namespace detail

// Q/K/V for one self-attention call over [text tokens, visual tokens].
// Each matrix is (text_len + visual_len) x d_model; heads split the columns
// into contiguous blocks of width d_model / heads.
template <typename T>
struct AttentionState {
  Matrix<T> q;
  Matrix<T> k;
  Matrix<T> v;
  std::size_t heads = 1;
  std::size_t text_len = 0;

  std::size_t tokens() const { return q.rows(); }
  std::size_t visual_len() const { return q.rows() - text_len; }
  std::size_t head_dim() const { return heads == 0 ? 0 : q.cols() / heads; }

  void validate() const {
    if (heads == 0 || q.cols() % heads != 0 || q.cols() / heads == 0) {
      throw InvalidArgument("attention head width must be >= 1");
    }
    if (!q.same_shape(k) || !q.same_shape(v)) {
      throw DimensionError("attention Q/K/V shape mismatch");
    }
    if (text_len > q.rows()) {
      throw DimensionError("text length exceeds token count");
    }
  }
};

namespace detail {

inline constexpr std::size_t kLanes = 32;

inline std::size_t padded_len(std::size_t n) {
  return (n + kLanes - 1) / kLanes * kLanes;
}

// l[j] = sum_c q[c] * kt[c][j] over a padded row.
template <typename T>
void attention_logits(const T* __restrict q, const T* __restrict kt,
                      T* __restrict l, std::size_t npad, std::size_t d) {
  for (std::size_t j = 0; j < npad; j += kLanes) {
    T acc[kLanes] = {};
    for (std::size_t c = 0; c < d; ++c) {
      const T qc = q[c];
      const T* __restrict kr = kt + c * npad + j;
      for (std::size_t u = 0; u < kLanes; ++u) acc[u] += qc * kr[u];
    }
    for (std::size_t u = 0; u < kLanes; ++u) l[j + u] = acc[u];
  }
}

template <typename T>
T lane_max(const T* __restrict l, std::size_t npad) {
  T lane[kLanes];
  for (std::size_t u = 0; u < kLanes; ++u) lane[u] = l[u];
  for (std::size_t j = kLanes; j < npad; j += kLanes) {
    for (std::size_t u = 0; u < kLanes; ++u) {
      lane[u] = l[j + u] > lane[u] ? l[j + u] : lane[u];
    }
  }
  T m = lane[0];
  for (std::size_t u = 1; u < kLanes; ++u) m = std::max(m, lane[u]);
  return m;
}

template <typename T>
void softmax_numerators(T* __restrict l, std::size_t npad, T m) {
  for (std::size_t j = 0; j < npad; ++j) l[j] = softmax_exp<T>(l[j] - m);
}

// Sum of a[j] * b[j] with kLanes fixed partial sums, folded pairwise.
template <typename T>
T lane_dot(const T* __restrict a, const T* __restrict b, std::size_t npad) {
  T lane[kLanes] = {};
  for (std::size_t j = 0; j < npad; j += kLanes) {
    for (std::size_t u = 0; u < kLanes; ++u) lane[u] += a[j + u] * b[j + u];
  }
  for (std::size_t w = kLanes / 2; w > 0; w /= 2) {
    for (std::size_t u = 0; u < w; ++u) lane[u] += lane[u + w];
  }
  return lane[0];
}

template <typename T>
T lane_sum(const T* __restrict a, std::size_t npad) {
  T lane[kLanes] = {};
  for (std::size_t j = 0; j < npad; j += kLanes) {
    for (std::size_t u = 0; u < kLanes; ++u) lane[u] += a[j + u];
  }
  for (std::size_t w = kLanes / 2; w > 0; w /= 2) {
    for (std::size_t u = 0; u < w; ++u) lane[u] += lane[u + w];
  }
  return lane[0];
}

}  // namespace detail

// Per-head softmax(Q K^T / sqrt(d)) V. When `probs` is non-null it receives
// one tokens x tokens probability matrix per head.
//
// Every reduction runs over a fixed lane layout, so results do not depend on
// the SIMD width the compiler picks.
template <typename T>
Matrix<T> attention(const AttentionState<T>& s,
                    std::vector<Matrix<T>>* probs = nullptr) {
  s.validate();
  if (!s.q.all_finite() || !s.k.all_finite()) {
    throw NumericError("non-finite attention logits");
  }
  const std::size_t n = s.tokens();
  const std::size_t npad = detail::padded_len(n);
  const std::size_t model = s.q.cols();
  const std::size_t d = s.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(d));
  Matrix<T> out(n, model);
  if (probs) probs->assign(s.heads, Matrix<T>(n, n));

  std::vector<T> kt(d * npad);
  std::vector<T> vt(d * npad);
  std::vector<T> q(d);
  std::vector<T> p(npad);
  for (std::size_t h = 0; h < s.heads; ++h) {
    const std::size_t off = h * d;
    std::fill(kt.begin(), kt.end(), T(0));
    std::fill(vt.begin(), vt.end(), T(0));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < d; ++c) {
        kt[c * npad + j] = s.k(j, off + c);
        vt[c * npad + j] = s.v(j, off + c);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) q[c] = s.q(i, off + c) * scale;
      detail::attention_logits(q.data(), kt.data(), p.data(), npad, d);
      for (std::size_t j = n; j < npad; ++j) p[j] = p[0];
      const T m = detail::lane_max(p.data(), npad);
      if (!std::isfinite(m)) throw NumericError("non-finite attention logits");
      detail::softmax_numerators(p.data(), npad, m);
      for (std::size_t j = n; j < npad; ++j) p[j] = T(0);
      const T inv = T(1) / detail::lane_sum(p.data(), npad);
      for (std::size_t c = 0; c < d; ++c) {
        out(i, off + c) = detail::lane_dot(p.data(), vt.data() + c * npad, npad) * inv;
      }
      if (probs) {
        T* pr = (*probs)[h].data() + i * n;
        for (std::size_t j = 0; j < n; ++j) pr[j] = p[j] * inv;
      }
    }
  }
  return out;
}

}  // namespace vidinsert

#endif  // VIDINSERT_ATTENTION_HPP_
