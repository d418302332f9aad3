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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "vidinsert.hpp"

namespace vidinsert {
namespace {

using testing::random_latent;
using testing::random_mask;
using testing::random_matrix;

TokenMask uniform_tokens(std::size_t n, std::uint8_t v) {
  return TokenMask{std::vector<std::uint8_t>(n, v)};
}

TokenMask alternating_tokens(std::size_t n) {
  TokenMask m{std::vector<std::uint8_t>(n, 0)};
  for (std::size_t j = 0; j < n; j += 2) m.bits[j] = 1;
  return m;
}

TEST(TokenizeMask, ConstantMasks) {
  EXPECT_EQ(tokenize_mask(RegionMask(2, 4, 4, 0)).count(), 0u);
  EXPECT_EQ(tokenize_mask(RegionMask(2, 4, 4, 1)).count(), 32u);
}

TEST(TokenizeMask, AnyCellRuleWithPatches) {
  RegionMask m(1, 4, 4);
  m.set(0, 3, 2, true);
  const TokenMask tm = tokenize_mask(m, {2, 2});
  ASSERT_EQ(tm.size(), 4u);
  EXPECT_EQ(tm.bits, (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_THROW(tokenize_mask(RegionMask(1, 3, 4), {2, 2}), DimensionError);
  EXPECT_THROW(tokenize_mask(m, {0, 1}), DimensionError);
}

TEST(TokenizeMask, UnitPatchIsCellOrder) {
  const RegionMask m = random_mask(Shape4{2, 3, 5, 1}, 4);
  const TokenMask tm = tokenize_mask(m);
  ASSERT_EQ(tm.size(), m.size());
  for (std::size_t j = 0; j < tm.size(); ++j) EXPECT_EQ(tm[j], m[j]);
}

class ValueOps : public ::testing::Test {
 protected:
  static constexpr std::size_t n = 24, d = 8;
  Matrix<float> v = random_matrix(n, d, 1);
  Matrix<float> rec = random_matrix(n, d, 2);
  TokenMask tm = alternating_tokens(n);
};

TEST_F(ValueOps, CloneReductions) {
  EXPECT_TRUE(clone_values(v, rec, uniform_tokens(n, 1)).bitwise_equal(v));
  EXPECT_TRUE(clone_values(v, rec, uniform_tokens(n, 0)).bitwise_equal(rec));
  EXPECT_TRUE(clone_values(v, v, tm).bitwise_equal(v));
}

TEST_F(ValueOps, ClonePerTokenRows) {
  const Matrix<float> out = clone_values(v, rec, tm);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix<float>& want = tm[j] ? v : rec;
    for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(out(j, c), want(j, c));
  }
}

TEST_F(ValueOps, FuseReductions) {
  const RetentionMask r0 = sample_retention_mask(n, 0.0, 1, 0, 0);
  const RetentionMask r1 = sample_retention_mask(n, 1.0, 1, 0, 0);
  EXPECT_TRUE(sparse_fuse(v, rec, tm, r0).bitwise_equal(clone_values(v, rec, tm)));
  EXPECT_TRUE(sparse_fuse(v, rec, tm, r1).bitwise_equal(v));
  const RetentionMask rh = sample_retention_mask(n, 0.5, 1, 0, 0);
  EXPECT_TRUE(sparse_fuse(v, rec, uniform_tokens(n, 1), rh).bitwise_equal(v));
}

TEST_F(ValueOps, FuseFollowsRetentionBits) {
  const RetentionMask r = sample_retention_mask(n, 0.5, 7, 3, 1);
  const Matrix<float> out = sparse_fuse(v, rec, tm, r);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix<float>& want = (tm[j] || r[j]) ? v : rec;
    for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(out(j, c), want(j, c));
  }
}

TEST_F(ValueOps, Locality) {
  const RetentionMask r = sample_retention_mask(n, 0.5, 2, 0, 0);
  for (std::size_t j : {0u, 1u, 13u}) {
    Matrix<float> v2 = v;
    for (std::size_t c = 0; c < d; ++c) v2(j, c) += 1.f;
    const Matrix<float> a = clone_values(v, rec, tm), b = clone_values(v2, rec, tm);
    const Matrix<float> fa = sparse_fuse(v, rec, tm, r), fb = sparse_fuse(v2, rec, tm, r);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      for (std::size_t c = 0; c < d; ++c) {
        EXPECT_EQ(a(i, c), b(i, c));
        EXPECT_EQ(fa(i, c), fb(i, c));
      }
    }
  }
}

TEST_F(ValueOps, ShapeMismatchThrows) {
  EXPECT_THROW(clone_values(v, random_matrix(n, d + 1, 3), tm), DimensionError);
  EXPECT_THROW(clone_values(v, rec, uniform_tokens(n - 1, 0)), DimensionError);
  EXPECT_THROW(sparse_fuse(v, rec, tm, sample_retention_mask(n + 1, 0.5, 0, 0, 0)),
               DimensionError);
}

TEST(Retention, ConstantsAndProvenance) {
  EXPECT_EQ(sample_retention_mask(1000, 0.0, 1, 2, 3).count(), 0u);
  EXPECT_EQ(sample_retention_mask(1000, 1.0, 1, 2, 3).count(), 1000u);
  const RetentionMask a = sample_retention_mask(500, 0.3, 9, 4, 1);
  EXPECT_EQ(a.bits, sample_retention_mask(500, 0.3, 9, 4, 1).bits);
  EXPECT_NE(a.bits, sample_retention_mask(500, 0.3, 9, 4, 0).bits);
  EXPECT_NE(a.bits, sample_retention_mask(500, 0.3, 9, 5, 1).bits);
  EXPECT_NE(a.bits, sample_retention_mask(500, 0.3, 8, 4, 1).bits);
  EXPECT_THROW(sample_retention_mask(4, 1.5, 0, 0, 0), InvalidArgument);
  EXPECT_THROW(sample_retention_mask(4, -0.1, 0, 0, 0), InvalidArgument);
}

TEST(Retention, SingleDrawFraction) {
  const std::size_t n = 10000;
  const double p = 0.2;
  const double frac = static_cast<double>(sample_retention_mask(n, p, 3, 0, 0).count()) / n;
  EXPECT_LE(std::abs(frac - p), 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Retention, PooledFraction) {
  const std::size_t n = 4096, draws = 100;
  const double p = 0.2;
  std::size_t kept = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    kept += sample_retention_mask(n, p, 11, k / 2, k % 2).count();
  }
  const double total = static_cast<double>(n * draws);
  EXPECT_LE(std::abs(kept / total - p), 3.0 * std::sqrt(p * (1 - p) / total));
}

TEST(LatentRefresh, ReductionsAndIdempotence) {
  const Shape4 s{3, 4, 4, 6};
  const VideoLatent x = random_latent(s, 1), bg = random_latent(s, 2);
  EXPECT_TRUE(latent_refresh(x, bg, RegionMask::like(s, 0)).bitwise_equal(bg));
  EXPECT_TRUE(latent_refresh(x, bg, RegionMask::like(s, 1)).bitwise_equal(x));
  const RegionMask m = random_mask(s, 3);
  const VideoLatent once = latent_refresh(x, bg, m);
  EXPECT_TRUE(latent_refresh(once, bg, m).bitwise_equal(once));
  for (std::size_t cell = 0; cell < m.size(); ++cell) {
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_EQ(once[cell * 6 + c], (m[cell] ? x : bg)[cell * 6 + c]);
    }
  }
}

TEST(LatentRefresh, TerminalRestoresSource) {
  const Shape4 s{2, 3, 3, 4};
  const VideoLatent x0 = random_latent(s, 5), eps = random_latent(s, 6), x = random_latent(s, 7);
  const RegionMask m = random_mask(s, 8);
  const VideoLatent out = latent_refresh(x, forward_interpolate(x0, eps, 0.f), m);
  EXPECT_TRUE(out.bitwise_equal(masked_blend(x, x0, m)));
}

TEST(ValueCache, WriteOnceAndFreeze) {
  ValueCache c;
  c.put(0, 0, random_matrix(2, 2, 1));
  EXPECT_THROW(c.put(0, 0, random_matrix(2, 2, 1)), CacheError);
  EXPECT_THROW(c.get(0, 1), CacheError);
  EXPECT_THROW(c.require_step(0, 2), CacheError);
  c.put(0, 1, random_matrix(2, 2, 2));
  EXPECT_NO_THROW(c.require_step(0, 2));
  c.freeze();
  EXPECT_THROW(c.put(1, 0, random_matrix(2, 2, 3)), CacheError);
  EXPECT_EQ(c.size(), 2u);
}

TEST(ValueCache, Release) {
  ValueCache c;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t l = 0; l < 2; ++l) c.put(s, l, random_matrix(1, 1, s * 2 + l));
  }
  c.release(1);
  EXPECT_EQ(c.size(), 4u);
  EXPECT_FALSE(c.contains(1, 0));
  EXPECT_TRUE(c.contains(2, 1));
}

TEST(CaptureHook, StoresLayersAndIsNeutral) {
  const ModelConfig cfg = testing::small_model();
  const Weights<float> w = init_weights<float>(cfg, 2);
  const VideoLatent x = random_latent(Shape4{2, 3, 3, 12}, 3);
  const ConditionEmbedding cond = embed_prompt("p", cfg);
  ValueCache a, b;
  const VideoLatent plain = predict_velocity(w, x, 0.4f, cond);
  EXPECT_TRUE(predict_velocity(w, x, 0.4f, cond, capture_hook(a, 5)).bitwise_equal(plain));
  predict_velocity(w, x, 0.4f, cond, capture_hook(b, 5));
  EXPECT_EQ(a.size(), cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EXPECT_TRUE(a.get(5, l).bitwise_equal(b.get(5, l)));
    EXPECT_EQ(a.get(5, l).rows(), x.shape().cells());
  }
  EXPECT_THROW(predict_velocity(w, x, 0.4f, cond, capture_hook(a, 5)), CacheError);
}

TEST(FusionHook, ClonesWhenPIsZeroAndRespectsLayers) {
  const std::size_t n = 6, d = 4;
  ValueCache cache;
  const Matrix<float> rec0 = random_matrix(n, d, 1), rec1 = random_matrix(n, d, 2);
  cache.put(0, 0, rec0);
  cache.put(0, 1, rec1);
  cache.freeze();
  const Matrix<float> v = random_matrix(n, d, 3);
  const TokenMask tm = alternating_tokens(n);
  GuidanceConfig g;
  g.retention_p = 0.0;
  EXPECT_TRUE(fusion_hook(cache, 0, tm, g)(1, v).bitwise_equal(clone_values(v, rec1, tm)));
  g.fusion_enabled = false;
  g.retention_p = 0.7;
  EXPECT_TRUE(fusion_hook(cache, 0, tm, g)(0, v).bitwise_equal(clone_values(v, rec0, tm)));
  g.active_layers = std::vector<std::size_t>{1};
  EXPECT_TRUE(fusion_hook(cache, 0, tm, g)(0, v).bitwise_equal(v));
  g.clone_enabled = false;
  g.active_layers.reset();
  EXPECT_TRUE(fusion_hook(cache, 0, tm, g)(1, v).bitwise_equal(v));
  g.clone_enabled = true;
  EXPECT_THROW(fusion_hook(cache, 3, tm, g)(0, v), CacheError);
}

TEST(GuidanceConfig, JsonRoundTripAndValidation) {
  GuidanceConfig g;
  g.retention_p = 0.35;
  g.refresh_stride = 3;
  g.retention_resample = RetentionResample::kPerStep;
  g.active_layers = std::vector<std::size_t>{0};
  g.seed = 77;
  g.steps = 12;
  const GuidanceConfig back = guidance_from_json(to_json(g));
  EXPECT_EQ(to_json(back), to_json(g));
  EXPECT_THROW(guidance_from_json({{"retention_p", 1.5}}), InvalidArgument);
  EXPECT_THROW(guidance_from_json({{"refresh_stride", 0}}), InvalidArgument);
  EXPECT_THROW(guidance_from_json({{"bogus", 1}}), FormatError);
  EXPECT_THROW(guidance_from_json({{"retention_p", "high"}}), FormatError);
  EXPECT_THROW(guidance_from_json({{"retention_resample", "never"}}), FormatError);
}

TEST(GuidanceConfig, Schedules) {
  GuidanceConfig g;
  g.refresh_stride = 3;
  EXPECT_TRUE(g.refresh_at(0));
  EXPECT_FALSE(g.refresh_at(1));
  EXPECT_TRUE(g.refresh_at(6));
  g.refresh_enabled = false;
  EXPECT_FALSE(g.refresh_at(0));
  EXPECT_EQ(g.retention_key(4, 2), (std::pair<std::size_t, std::size_t>{4, 2}));
  g.retention_resample = RetentionResample::kPerStep;
  EXPECT_EQ(g.retention_key(4, 2), (std::pair<std::size_t, std::size_t>{4, 0}));
  g.retention_resample = RetentionResample::kFixed;
  EXPECT_EQ(g.retention_key(4, 2), (std::pair<std::size_t, std::size_t>{0, 0}));
}

}  // namespace
}  // namespace vidinsert
