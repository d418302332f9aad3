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

// Linear flow-matching path x_t = (1 - t) x0 + t eps, t = 1 is pure noise,
// and an explicit Euler sampler integrating from t = 1 down to t = 0.

#ifndef VIDINSERT_FLOW_HPP_
#define VIDINSERT_FLOW_HPP_

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vidinsert/error.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

// Standard-normal sample shared by every consumer in a run. Move-only so a
// run cannot silently draw or duplicate a second one.
class NoiseInstance {
 public:
  NoiseInstance(Shape4 shape, std::uint64_t seed)
      : eps_(shape) {
    SeededRng rng(seed, "noise");
    rng.fill_normal(eps_);
  }
  explicit NoiseInstance(VideoLatent eps) : eps_(std::move(eps)) {}

  NoiseInstance(const NoiseInstance&) = delete;
  NoiseInstance& operator=(const NoiseInstance&) = delete;
  NoiseInstance(NoiseInstance&&) = default;
  NoiseInstance& operator=(NoiseInstance&&) = default;

  const VideoLatent& latent() const { return eps_; }
  const Shape4& shape() const { return eps_.shape(); }

 private:
  VideoLatent eps_;
};

// Descending times 1 = t[0] > t[1] > ... > t[N] = 0.
class TimeGrid {
 public:
  static TimeGrid uniform(std::size_t steps) {
    if (steps == 0) throw InvalidArgument("time grid needs >= 1 step");
    std::vector<float> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      t[k] = static_cast<float>(static_cast<double>(steps - k) /
                                static_cast<double>(steps));
    }
    return TimeGrid(std::move(t));
  }

  explicit TimeGrid(std::vector<float> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw InvalidArgument("time grid needs >= 2 points");
    if (times_.front() != 1.f || times_.back() != 0.f) {
      throw InvalidArgument("time grid must start at 1 and end at 0");
    }
    for (std::size_t k = 1; k < times_.size(); ++k) {
      if (!(times_[k] < times_[k - 1])) {
        throw InvalidArgument("time grid must be strictly decreasing");
      }
    }
  }

  std::size_t steps() const { return times_.size() - 1; }
  float operator[](std::size_t k) const { return times_[k]; }
  const std::vector<float>& times() const { return times_; }

 private:
  std::vector<float> times_;
};

namespace detail {

// Exact at both endpoints so clean / pure-noise states come back bitwise.
inline float lerp_path(float x0, float eps, float t) {
  if (t == 0.f) return x0;
  if (t == 1.f) return eps;
  return (1.f - t) * x0 + t * eps;
}

}  // namespace detail

// (1 - t) x0 + t eps. The endpoints return their input bitwise.
inline VideoLatent forward_interpolate(const VideoLatent& x0,
                                       const VideoLatent& eps, float t) {
  check_same_shape(x0.shape(), eps.shape());
  if (!(t >= 0.f && t <= 1.f)) {
    throw InvalidArgument("interpolation time outside [0,1]: " +
                          std::to_string(t));
  }
  if (t == 0.f) return x0;
  if (t == 1.f) return eps;
  VideoLatent out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = detail::lerp_path(x0[i], eps[i], t);
  }
  return out;
}

inline VideoLatent forward_interpolate(const VideoLatent& x0,
                                       const NoiseInstance& eps, float t) {
  return forward_interpolate(x0, eps.latent(), t);
}

// Conditional flow-matching regression target d/dt x_t = eps - x0.
inline VideoLatent velocity_target(const VideoLatent& x0,
                                   const VideoLatent& eps) {
  check_same_shape(x0.shape(), eps.shape());
  VideoLatent out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps[i] - x0[i];
  return out;
}

// One explicit Euler step toward t = 0: x - dt * v.
inline VideoLatent euler_step(const VideoLatent& x, const VideoLatent& v,
                              float dt) {
  check_same_shape(x.shape(), v.shape());
  if (!(dt > 0.f)) throw InvalidArgument("euler step needs dt > 0");
  if (!v.all_finite()) throw NumericError("non-finite velocity in euler step");
  VideoLatent out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - dt * v[i];
  return out;
}

// Anything evaluating a velocity at (x, t). Conditioning is bound into the
// callable by the caller.
template <typename F>
concept VelocityField = requires(F f, const VideoLatent& x, float t) {
  { f(x, t) } -> std::convertible_to<VideoLatent>;
};

struct SamplerCallbacks {
  // Runs on the state at grid time t[step] before the field is evaluated.
  std::function<void(std::size_t step, float t, VideoLatent& x)> before_predict;
  // Runs on the state at t[step + 1] right after the Euler update.
  std::function<void(std::size_t step, float t_next, VideoLatent& x)> after_step;
};

// Integrates from x = eps at t = 1 to t = 0 across `grid`.
template <VelocityField Field>
VideoLatent sample(Field&& field, const NoiseInstance& eps,
                   const TimeGrid& grid, const SamplerCallbacks& callbacks = {}) {
  VideoLatent x = eps.latent();
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const float t = grid[k];
    const float t_next = grid[k + 1];
    if (callbacks.before_predict) callbacks.before_predict(k, t, x);
    VideoLatent v = field(static_cast<const VideoLatent&>(x), t);
    check_same_shape(v.shape(), x.shape());
    x = euler_step(x, v, t - t_next);
    if (callbacks.after_step) callbacks.after_step(k, t_next, x);
  }
  return x;
}

}  // namespace vidinsert

#endif  // VIDINSERT_FLOW_HPP_
