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
#include <utility>
#include <vector>

#include "test_util.hpp"
#include "vidinsert.hpp"

namespace vidinsert {
namespace {

using testing::random_latent;
using testing::random_matrix;
using testing::small_model;
using testing::TempDir;

AttentionState<float> make_state(std::size_t n, std::size_t d, std::size_t heads) {
  AttentionState<float> s;
  s.q = Matrix<float>(n, d);
  s.k = Matrix<float>(n, d);
  s.v = Matrix<float>(n, d);
  s.heads = heads;
  return s;
}

TEST(Attention, TwoTokenScalarSoftmax) {
  AttentionState<float> s = make_state(2, 1, 1);
  s.q(0, 0) = 1.f;
  s.k(0, 0) = 1.f;
  s.k(1, 0) = -1.f;
  s.v(0, 0) = 3.f;
  s.v(1, 0) = -5.f;
  const double w1 = std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0));
  EXPECT_NEAR(w1, 0.880797, 1e-6);
  const Matrix<float> out = attention(s);
  EXPECT_NEAR(out(0, 0), w1 * 3.0 + (1.0 - w1) * -5.0, 1e-5);
}

TEST(Attention, SingleTokenReturnsValue) {
  AttentionState<float> s = make_state(1, 4, 2);
  s.q = random_matrix(1, 4, 1);
  s.k = random_matrix(1, 4, 2);
  s.v = random_matrix(1, 4, 3);
  const Matrix<float> out = attention(s);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(0, c), s.v(0, c), 1e-6);
}

TEST(Attention, IdenticalKeysAverageValues) {
  AttentionState<float> s = make_state(2, 3, 1);
  s.q = random_matrix(2, 3, 4);
  const Matrix<float> k = random_matrix(1, 3, 5);
  s.k.set_rows(0, k);
  s.k.set_rows(1, k);
  s.v = random_matrix(2, 3, 6);
  const Matrix<float> out = attention(s);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(out(i, c), 0.5f * (s.v(0, c) + s.v(1, c)), 1e-6);
    }
  }
}

TEST(Attention, SoftmaxRowsSumToOne) {
  for (std::size_t n : {3u, 33u, 300u, 2048u}) {
    AttentionState<float> s = make_state(n, 8, 2);
    s.q = random_matrix(n, 8, n);
    s.k = random_matrix(n, 8, n + 1);
    s.v = random_matrix(n, 8, n + 2);
    std::vector<Matrix<float>> probs;
    attention(s, &probs);
    ASSERT_EQ(probs.size(), 2u);
    for (const auto& p : probs) {
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        for (float x : p.row(i)) {
          EXPECT_GE(x, 0.f);
          sum += x;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6) << n;
      }
    }
  }
}

TEST(Attention, MatchesDoubleReference) {
  const std::size_t n = 37, d = 8, heads = 2, hd = 4;
  AttentionState<float> s = make_state(n, d, heads);
  s.q = random_matrix(n, d, 7);
  s.k = random_matrix(n, d, 8);
  s.v = random_matrix(n, d, 9);
  const Matrix<float> out = attention(s);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> l(n);
      double m = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < hd; ++c) dot += double(s.q(i, h * hd + c)) * s.k(j, h * hd + c);
        l[j] = dot / std::sqrt(double(hd));
        m = std::max(m, l[j]);
      }
      double z = 0;
      for (auto& x : l) z += (x = std::exp(x - m));
      for (std::size_t c = 0; c < hd; ++c) {
        double o = 0;
        for (std::size_t j = 0; j < n; ++j) o += l[j] / z * s.v(j, h * hd + c);
        EXPECT_NEAR(out(i, h * hd + c), o, 1e-5);
      }
    }
  }
}

TEST(Attention, RejectsBadState) {
  AttentionState<float> s = make_state(2, 3, 2);
  EXPECT_THROW(attention(s), InvalidArgument);
  s = make_state(2, 4, 0);
  EXPECT_THROW(attention(s), InvalidArgument);
  s = make_state(2, 2, 1);
  s.q(0, 0) = std::nanf("");
  EXPECT_THROW(attention(s), NumericError);
}

class DenoiserTest : public ::testing::Test {
 protected:
  ModelConfig cfg = small_model();
  Weights<float> w = init_weights<float>(cfg, 3);
  VideoLatent x = random_latent(Shape4{2, 4, 4, 12}, 4);
  ConditionEmbedding cond = embed_prompt("a red disc moving right", cfg);
};

TEST_F(DenoiserTest, OutputShapeAndFinite) {
  const VideoLatent v = predict_velocity(w, x, 0.5f, cond);
  EXPECT_EQ(v.shape(), x.shape());
  EXPECT_TRUE(v.all_finite());
}

TEST_F(DenoiserTest, IdentityHookIsNeutral) {
  const VideoLatent plain = predict_velocity(w, x, 0.3f, cond);
  std::size_t calls = 0;
  ValueHook<float> id = [&](std::size_t, Matrix<float> v) { ++calls; return v; };
  EXPECT_TRUE(predict_velocity(w, x, 0.3f, cond, id).bitwise_equal(plain));
  EXPECT_EQ(calls, cfg.layers);
}

TEST_F(DenoiserTest, Stateless) {
  const VideoLatent a = predict_velocity(w, x, 0.7f, cond);
  const VideoLatent b = predict_velocity(w, x, 0.7f, cond);
  EXPECT_TRUE(a.bitwise_equal(b));
}

TEST_F(DenoiserTest, HookWrongShapeThrows) {
  ValueHook<float> bad = [](std::size_t, Matrix<float> v) {
    return v.slice_rows(0, v.rows() - 1);
  };
  EXPECT_THROW(predict_velocity(w, x, 0.5f, cond, bad), DimensionError);
}

TEST_F(DenoiserTest, HookSeesOnlyVisualValues) {
  ValueHook<float> check = [&](std::size_t, Matrix<float> v) {
    EXPECT_EQ(v.rows(), x.shape().cells());
    EXPECT_EQ(v.cols(), cfg.d_model);
    return v;
  };
  predict_velocity(w, x, 0.5f, cond, check);
}

TEST_F(DenoiserTest, HookChangesOutput) {
  ValueHook<float> zero = [](std::size_t, Matrix<float> v) {
    v.fill(0.f);
    return v;
  };
  EXPECT_FALSE(predict_velocity(w, x, 0.5f, cond, zero)
                   .bitwise_equal(predict_velocity(w, x, 0.5f, cond)));
}

// Swap two tokens' inputs: a position-blind network would just swap the
// corresponding output rows.
TEST_F(DenoiserTest, PositionSensitive) {
  const std::size_t c = x.channels();
  const std::size_t i = 1, j = 17;
  VideoLatent swapped = x;
  for (std::size_t k = 0; k < c; ++k) std::swap(swapped[i * c + k], swapped[j * c + k]);
  const VideoLatent a = predict_velocity(w, x, 0.5f, cond);
  VideoLatent b = predict_velocity(w, swapped, 0.5f, cond);
  for (std::size_t k = 0; k < c; ++k) std::swap(b[i * c + k], b[j * c + k]);
  EXPECT_FALSE(a.bitwise_equal(b));
}

TEST_F(DenoiserTest, TimeAndPromptMatter) {
  const VideoLatent a = predict_velocity(w, x, 0.5f, cond);
  EXPECT_FALSE(a.bitwise_equal(predict_velocity(w, x, 0.6f, cond)));
  EXPECT_FALSE(
      a.bitwise_equal(predict_velocity(w, x, 0.5f, embed_prompt("a blue square", cfg))));
}

TEST_F(DenoiserTest, ChannelMismatchThrows) {
  const VideoLatent bad = random_latent(Shape4{1, 2, 2, 5}, 1);
  EXPECT_THROW(predict_velocity(w, bad, 0.5f, cond), DimensionError);
}

TEST(Prompt, EmbeddingDeterministicAndDistinct) {
  const ModelConfig cfg = small_model();
  EXPECT_EQ(embed_prompt("a red disc", cfg), embed_prompt("a red disc", cfg));
  EXPECT_FALSE(embed_prompt("a red disc", cfg) == embed_prompt("a red square", cfg));
  EXPECT_FALSE(embed_prompt("", cfg) == embed_prompt(" x", cfg));
  const ConditionEmbedding e = embed_prompt("a b c d e f g", cfg);
  EXPECT_EQ(e.tokens.rows(), cfg.text_tokens);
  EXPECT_EQ(e.tokens.cols(), cfg.d_model);
}

TEST(Weights, InitDeterministic) {
  const ModelConfig cfg = small_model();
  const auto a = init_weights<float>(cfg, 1), b = init_weights<float>(cfg, 1),
             c = init_weights<float>(cfg, 2);
  EXPECT_TRUE(a.in_proj.bitwise_equal(b.in_proj));
  EXPECT_FALSE(a.in_proj.bitwise_equal(c.in_proj));
  ModelConfig bad = cfg;
  bad.heads = 3;
  EXPECT_THROW(init_weights<float>(bad, 1), InvalidArgument);
}

TEST(Checkpoint, RoundTripBitwise) {
  TempDir dir("ckpt");
  const ModelConfig cfg = small_model(6);
  const Weights<float> w = init_weights<float>(cfg, 9);
  save_checkpoint(dir.path(), w);
  const Weights<float> back = load_checkpoint(dir.path());
  EXPECT_EQ(back.config, cfg);
  std::vector<const Matrix<float>*> a;
  for_each_param(w, [&](const std::string&, const Matrix<float>& m) { a.push_back(&m); });
  std::size_t i = 0;
  for_each_param(back, [&](const std::string& name, const Matrix<float>& m) {
    EXPECT_TRUE(m.bitwise_equal(*a[i++])) << name;
  });
  EXPECT_THROW(load_checkpoint(dir / "missing"), FormatError);
}

TEST(GaussianField, PointMassAtRest) {
  VideoLatent x(Shape4{1, 1, 1, 1}, 0.375f);
  const VideoLatent v = analytic_gaussian_velocity(x, 0.5f, {{0.375}, 0.0});
  EXPECT_EQ(v[0], 0.f);
}

// Self-normalised importance estimate of E[x0 | x_t = x] from draws of the
// data distribution; the likelihood of x given x0 is N(x; (1-t) x0, t^2).
struct McEstimate {
  double v;
  double se;
};

McEstimate mc_velocity(double x, double t, double mu, double sd, std::size_t n,
                       std::uint64_t seed) {
  SeededRng rng(seed, "mc-oracle");
  std::vector<double> x0(n), w(n);
  double wsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x0[i] = mu + sd * rng.normal();
    const double z = (x - (1 - t) * x0[i]) / t;
    w[i] = std::exp(-0.5 * z * z);
    wsum += w[i];
  }
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) m += w[i] * x0[i];
  m /= wsum;
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) var += w[i] * w[i] * (x0[i] - m) * (x0[i] - m);
  const double se_m = std::sqrt(var) / wsum;
  // v = E[eps|x] - E[x0|x] with E[eps|x] = (x - (1-t) E[x0|x]) / t.
  return {(x - m) / t, se_m / t};
}

TEST(GaussianField, MatchesMonteCarloOracle) {
  const double mu = 0.3, sd = 1.0;
  std::uint64_t seed = 100;
  for (double t : {0.3, 0.5, 0.8, 1.0}) {
    for (double x : {-1.5, 0.0, 0.7, 2.0}) {
      const McEstimate mc = mc_velocity(x, t, mu, sd, 100000, seed++);
      const double v = gaussian_velocity(x, t, mu, sd);
      EXPECT_LE(std::abs(v - mc.v), 3.0 * mc.se + 1e-12) << "t=" << t << " x=" << x;
    }
  }
  // t = 1 with mu = 0: E[eps|x] = x, E[x0|x] = 0, so v = x.
  EXPECT_NEAR(gaussian_velocity(0.9, 1.0, 0.0, 1.0), 0.9, 1e-12);
}

}  // namespace
}  // namespace vidinsert
