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

#ifndef VIDINSERT_RNG_HPP_
#define VIDINSERT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include "vidinsert/video.hpp"

namespace vidinsert {

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : s) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Labeled deterministic stream. Draw i of stream (seed, label) is
// splitmix64_mix(key + (i + 1) * golden) with key = mix(seed ^ fnv1a(label)),
// i.e. a SplitMix64 sequence; nothing depends on the host's <random>.
//
// Normals use Box-Muller on two consecutive uniforms and keep only the cosine
// branch, so every normal consumes exactly two raw draws.
class SeededRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  SeededRng(std::uint64_t seed, std::string_view label)
      : seed_(seed),
        label_(label),
        state_(splitmix64_mix(seed ^ fnv1a64(label))) {}

  // Stream for a labeled sub-purpose, e.g. derive(seed, "retention", step, layer).
  static SeededRng derive(std::uint64_t seed, std::string_view label,
                          std::uint64_t a, std::uint64_t b = 0) {
    std::string full(label);
    full += '/';
    full += std::to_string(a);
    full += '/';
    full += std::to_string(b);
    return SeededRng(seed, full);
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    state_ += kGolden;
    ++draws_;
    return splitmix64_mix(state_);
  }

  // Uniform on [0, 1) with 53 bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1].
  double uniform_open_low() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform_open_low();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void fill_normal(Video<T>& v, double scale = 1.0) {
    for (auto& x : v.data()) x = static_cast<T>(scale * normal());
  }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

}  // namespace vidinsert

#endif  // VIDINSERT_RNG_HPP_
