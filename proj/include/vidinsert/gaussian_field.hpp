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

// Closed-form marginal velocity of the linear path when the data are
// x0 ~ Normal(mean, std^2 I). Used to validate the sampler exactly.

#ifndef VIDINSERT_GAUSSIAN_FIELD_HPP_
#define VIDINSERT_GAUSSIAN_FIELD_HPP_

#include <vector>

#include "vidinsert/error.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

struct GaussianFieldSpec {
  // Per-channel mean; a single entry broadcasts to every channel.
  std::vector<double> mean{0.0};
  double std = 1.0;  // 0 gives a point mass at `mean`

  double mean_for(std::size_t channel) const {
    if (mean.empty()) return 0.0;
    return mean.size() == 1 ? mean[0] : mean.at(channel);
  }
};

// v(x, t) = E[eps | x_t = x] - E[x0 | x_t = x]. With s^2 = (1-t)^2 std^2 + t^2
// and r = x - (1-t) mean:
//   E[x0 | x]  = mean + (1-t) std^2 / s^2 * r
//   E[eps | x] = t / s^2 * r
inline double gaussian_velocity(double x, double t, double mean, double std) {
  const double var0 = std * std;
  const double s2 = (1.0 - t) * (1.0 - t) * var0 + t * t;
  if (s2 <= 0.0) {
    throw NumericError("gaussian field is singular at t=0 with zero std");
  }
  const double r = x - (1.0 - t) * mean;
  const double e_x0 = mean + (1.0 - t) * var0 / s2 * r;
  const double e_eps = t / s2 * r;
  return e_eps - e_x0;
}

inline VideoLatent analytic_gaussian_velocity(const VideoLatent& x, float t,
                                              const GaussianFieldSpec& spec) {
  if (spec.std < 0.0) throw InvalidArgument("gaussian std must be >= 0");
  if (spec.mean.size() > 1) {
    detail::check_axis("gaussian mean channels", spec.mean.size(), x.channels());
  }
  VideoLatent v(x.shape());
  const std::size_t c = x.channels();
  for (std::size_t i = 0; i < x.size(); ++i) {
    v[i] = static_cast<float>(gaussian_velocity(x[i], t, spec.mean_for(i % c), spec.std));
  }
  return v;
}

// Field object usable with sample().
struct GaussianField {
  GaussianFieldSpec spec;
  VideoLatent operator()(const VideoLatent& x, float t) const {
    return analytic_gaussian_velocity(x, t, spec);
  }
};

}  // namespace vidinsert

#endif  // VIDINSERT_GAUSSIAN_FIELD_HPP_
