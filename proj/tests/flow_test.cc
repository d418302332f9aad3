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

TEST(ForwardInterpolate, EndpointsAreBitwise) {
  const Shape4 s{2, 3, 3, 4};
  const VideoLatent x0 = random_latent(s, 1), eps = random_latent(s, 2);
  EXPECT_TRUE(forward_interpolate(x0, eps, 0.f).bitwise_equal(x0));
  EXPECT_TRUE(forward_interpolate(x0, eps, 1.f).bitwise_equal(eps));
}

TEST(ForwardInterpolate, QuarterExample) {
  const Shape4 s{1, 1, 1, 2};
  VideoLatent x0(s), eps(s);
  x0[0] = 2.f; eps[0] = -2.f;
  x0[1] = 0.f; eps[1] = 4.f;
  const VideoLatent x = forward_interpolate(x0, eps, 0.25f);
  EXPECT_FLOAT_EQ(x[0], 1.f);
  EXPECT_FLOAT_EQ(x[1], 1.f);
}

TEST(ForwardInterpolate, AffineInT) {
  const Shape4 s{1, 4, 4, 3};
  const VideoLatent x0 = random_latent(s, 3), eps = random_latent(s, 4);
  for (float t : {0.1f, 0.37f, 0.5f, 0.9f}) {
    const VideoLatent x = forward_interpolate(x0, eps, t);
    const VideoLatent v = velocity_target(x0, eps);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(x[i], x0[i] + t * v[i], 1e-5);
    }
  }
}

TEST(ForwardInterpolate, RejectsOutOfRangeAndShape) {
  const VideoLatent a(Shape4{1, 1, 1, 1}), b(Shape4{1, 1, 1, 2});
  EXPECT_THROW(forward_interpolate(a, a, 1.5f), InvalidArgument);
  EXPECT_THROW(forward_interpolate(a, a, -0.1f), InvalidArgument);
  EXPECT_THROW(forward_interpolate(a, a, std::nanf("")), InvalidArgument);
  EXPECT_THROW(forward_interpolate(a, b, 0.5f), DimensionError);
}

TEST(EulerStep, Examples) {
  const Shape4 s{1, 1, 1, 2};
  VideoLatent x(s), v(s);
  x[0] = 1.f; v[0] = 2.f;
  x[1] = -1.f; v[1] = -4.f;
  const VideoLatent y = euler_step(x, v, 0.25f);
  EXPECT_EQ(y[0], 0.5f);
  EXPECT_EQ(y[1], 0.f);
  EXPECT_THROW(euler_step(x, v, 0.f), InvalidArgument);
  v[0] = std::nanf("");
  EXPECT_THROW(euler_step(x, v, 0.1f), NumericError);
}

TEST(TimeGrid, UniformEndpointsAndValidation) {
  const TimeGrid g = TimeGrid::uniform(4);
  EXPECT_EQ(g.steps(), 4u);
  EXPECT_EQ(g[0], 1.f);
  EXPECT_EQ(g[2], 0.5f);
  EXPECT_EQ(g[4], 0.f);
  EXPECT_THROW(TimeGrid::uniform(0), InvalidArgument);
  EXPECT_THROW(TimeGrid({1.f, 0.5f, 0.5f, 0.f}), InvalidArgument);
  EXPECT_THROW(TimeGrid({0.9f, 0.f}), InvalidArgument);
}

TEST(NoiseInstance, SeedDeterminesSample) {
  const Shape4 s{2, 2, 2, 3};
  const NoiseInstance a(s, 5), b(s, 5), c(s, 6);
  EXPECT_TRUE(a.latent().bitwise_equal(b.latent()));
  EXPECT_FALSE(a.latent().bitwise_equal(c.latent()));
}

// With a point-mass data distribution the exact field transports every
// noise sample onto the point.
TEST(Sampler, PointMassConverges) {
  const Shape4 s{2, 4, 4, 3};
  GaussianField field{{{0.3, -1.0, 2.0}, 0.0}};
  const NoiseInstance eps(s, 9);
  const VideoLatent x = sample(field, eps, TimeGrid::uniform(50));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(x[i], field.spec.mean_for(i % 3), 1e-5);
  }
}

TEST(Sampler, ZeroFieldLeavesNoise) {
  const Shape4 s{1, 2, 2, 2};
  const NoiseInstance eps(s, 1);
  auto zero = [](const VideoLatent& x, float) { return VideoLatent(x.shape()); };
  EXPECT_TRUE(sample(zero, eps, TimeGrid::uniform(7)).bitwise_equal(eps.latent()));
}

TEST(Sampler, ConstantFieldShiftsByIntegral) {
  const Shape4 s{1, 1, 1, 1};
  const NoiseInstance eps(VideoLatent(s, 0.f));
  auto one = [](const VideoLatent& x, float) { return VideoLatent(x.shape(), 1.f); };
  EXPECT_NEAR(sample(one, eps, TimeGrid::uniform(10))[0], -1.f, 1e-6);
}

TEST(Sampler, CallbacksSeeEveryStep) {
  const NoiseInstance eps(Shape4{1, 1, 1, 1}, 3);
  std::vector<float> before, after;
  SamplerCallbacks cb;
  cb.before_predict = [&](std::size_t, float t, VideoLatent&) { before.push_back(t); };
  cb.after_step = [&](std::size_t, float t, VideoLatent&) { after.push_back(t); };
  auto zero = [](const VideoLatent& x, float) { return VideoLatent(x.shape()); };
  sample(zero, eps, TimeGrid::uniform(4), cb);
  EXPECT_EQ(before, (std::vector<float>{1.f, 0.75f, 0.5f, 0.25f}));
  EXPECT_EQ(after, (std::vector<float>{0.75f, 0.5f, 0.25f, 0.f}));
}

// The exact flow of a 1-D Gaussian maps eps to mu + sigma0 * eps; Euler error
// should shrink at least linearly as the grid refines.
TEST(Sampler, GaussianErrorShrinksWithSteps) {
  const Shape4 s{1, 8, 8, 4};
  const double mu = 0.3, sd = 0.5;
  GaussianField field{{{mu}, sd}};
  const NoiseInstance eps(s, 21);
  double prev = 1e9;
  for (std::size_t n : {10u, 50u, 200u}) {
    const VideoLatent x = sample(field, eps, TimeGrid::uniform(n));
    double err = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      err = std::max(err, std::abs(x[i] - (mu + sd * eps.latent()[i])));
    }
    EXPECT_LT(err, prev) << n;
    if (n == 200) {
      EXPECT_LT(err, prev / 3.0);
    }
    prev = err;
  }
}

TEST(Sampler, GaussianMoments) {
  const double mu = 0.3, sd = 1.0;
  GaussianField field{{{mu}, sd}};
  const NoiseInstance eps(Shape4{1, 10, 10, 10}, 4);
  const VideoLatent x = sample(field, eps, TimeGrid::uniform(50));
  double m = 0, v = 0;
  for (float a : x.data()) m += a;
  m /= static_cast<double>(x.size());
  for (float a : x.data()) v += (a - m) * (a - m);
  v /= static_cast<double>(x.size() - 1);
  EXPECT_LT(std::abs(m - mu), 4.0 * std::sqrt(v / static_cast<double>(x.size())));
  EXPECT_NEAR(v, sd * sd, 0.1 * sd * sd);
}

TEST(GaussianVelocity, MatchesConditionalExpectation) {
  // At t = 1, x = eps exactly: E[eps|x] = x, E[x0|x] = mean.
  EXPECT_NEAR(gaussian_velocity(0.7, 1.0, 0.3, 2.0), 0.7 - 0.3, 1e-12);
  // Point mass, t in (0,1): eps = (x - (1-t) mu) / t.
  const double t = 0.4, mu = 1.5, x = 0.2;
  EXPECT_NEAR(gaussian_velocity(x, t, mu, 0.0), (x - (1 - t) * mu) / t - mu, 1e-12);
  EXPECT_THROW(gaussian_velocity(1.0, 0.0, 0.0, 0.0), NumericError);
}

}  // namespace
}  // namespace vidinsert
