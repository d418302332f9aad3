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

#ifndef VIDINSERT_VIDEO_HPP_
#define VIDINSERT_VIDEO_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "vidinsert/error.hpp"

namespace vidinsert {

// Extent of a (frames, height, width, channels) grid.
struct Shape4 {
  std::size_t frames = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t cells() const { return frames * height * width; }
  std::size_t size() const { return cells() * channels; }
  friend bool operator==(const Shape4&, const Shape4&) = default;

  std::string str() const {
    return "(" + std::to_string(frames) + "," + std::to_string(height) + "," +
           std::to_string(width) + "," + std::to_string(channels) + ")";
  }
};

inline void check_same_shape(const Shape4& a, const Shape4& b) {
  detail::check_axis("frames", a.frames, b.frames);
  detail::check_axis("height", a.height, b.height);
  detail::check_axis("width", a.width, b.width);
  detail::check_axis("channels", a.channels, b.channels);
}

// Dense video grid. Channel is the fastest axis, then width, height, frame.
template <typename T>
class Video {
 public:
  using value_type = T;

  Video() = default;
  explicit Video(Shape4 shape, T fill = T(0)) : shape_(shape) {
    if (shape.frames == 0 || shape.height == 0 || shape.width == 0 ||
        shape.channels == 0) {
      throw DimensionError("video extents must be >= 1, got " + shape.str());
    }
    data_.assign(shape.size(), fill);
  }
  Video(Shape4 shape, std::vector<T> data) : Video(shape) {
    detail::check_axis("payload", data.size(), shape.size());
    data_ = std::move(data);
  }

  const Shape4& shape() const { return shape_; }
  std::size_t frames() const { return shape_.frames; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t t, std::size_t h, std::size_t w,
                    std::size_t c = 0) const {
    return ((t * shape_.height + h) * shape_.width + w) * shape_.channels + c;
  }
  T& at(std::size_t t, std::size_t h, std::size_t w, std::size_t c) {
    return data_[index(t, h, w, c)];
  }
  const T& at(std::size_t t, std::size_t h, std::size_t w,
              std::size_t c) const {
    return data_[index(t, h, w, c)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  // One frame as a contiguous (height, width, channels) block.
  std::span<T> frame(std::size_t t) {
    const std::size_t n = shape_.height * shape_.width * shape_.channels;
    return std::span<T>(data_).subspan(t * n, n);
  }
  std::span<const T> frame(std::size_t t) const {
    const std::size_t n = shape_.height * shape_.width * shape_.channels;
    return std::span<const T>(data_).subspan(t * n, n);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  // Bitwise comparison; distinguishes -0 from +0 and compares NaN payloads.
  bool bitwise_equal(const Video& other) const {
    if (!(shape_ == other.shape_)) return false;
    return std::equal(data_.begin(), data_.end(), other.data_.begin(),
                      [](T a, T b) {
                        return std::memcmp(&a, &b, sizeof(T)) == 0;
                      });
  }

  template <typename U>
  Video<U> cast() const {
    Video<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return out;
  }

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

using VideoLatent = Video<float>;
using PixelVideo = Video<float>;

// Binary (frames, height, width) grid: 1 marks the edited region, 0 the
// background that must be preserved.
class RegionMask {
 public:
  RegionMask() = default;
  RegionMask(std::size_t frames, std::size_t height, std::size_t width,
             std::uint8_t fill = 0)
      : frames_(frames), height_(height), width_(width) {
    if (frames == 0 || height == 0 || width == 0) {
      throw DimensionError("mask extents must be >= 1");
    }
    if (fill > 1) throw InvalidArgument("mask values must be 0 or 1");
    bits_.assign(frames * height * width, fill);
  }

  static RegionMask like(const Shape4& s, std::uint8_t fill = 0) {
    return RegionMask(s.frames, s.height, s.width, fill);
  }

  // Copies a single-frame mask onto every frame.
  static RegionMask replicate(const RegionMask& frame_mask,
                              std::size_t frames) {
    detail::check_axis("mask frames", frame_mask.frames(), 1);
    RegionMask out(frames, frame_mask.height(), frame_mask.width());
    const std::size_t n = frame_mask.bits_.size();
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy(frame_mask.bits_.begin(), frame_mask.bits_.end(),
                out.bits_.begin() + t * n);
    }
    return out;
  }

  // Reads a C=1 tensor holding exact 0.0/1.0 values. A single-frame mask is
  // expanded to `frames` frames when `frames` is nonzero.
  template <typename T>
  static RegionMask from_video(const Video<T>& v, std::size_t frames = 0) {
    detail::check_axis("mask channels", v.channels(), 1);
    RegionMask m(v.frames(), v.height(), v.width());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == T(0)) {
        m.bits_[i] = 0;
      } else if (v[i] == T(1)) {
        m.bits_[i] = 1;
      } else {
        throw FormatError("mask value at index " + std::to_string(i) +
                          " is not 0 or 1");
      }
    }
    if (frames != 0 && frames != m.frames()) {
      if (m.frames() != 1) {
        throw DimensionError("mask frames mismatch: " +
                             std::to_string(m.frames()) + " vs " +
                             std::to_string(frames));
      }
      return replicate(m, frames);
    }
    return m;
  }

  Video<float> to_video() const {
    Video<float> v(Shape4{frames_, height_, width_, 1});
    for (std::size_t i = 0; i < bits_.size(); ++i) v[i] = bits_[i] ? 1.f : 0.f;
    return v;
  }

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  std::size_t index(std::size_t t, std::size_t h, std::size_t w) const {
    return (t * height_ + h) * width_ + w;
  }
  bool at(std::size_t t, std::size_t h, std::size_t w) const {
    return bits_[index(t, h, w)] != 0;
  }
  void set(std::size_t t, std::size_t h, std::size_t w, bool v) {
    bits_[index(t, h, w)] = v ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool all() const { return count() == bits_.size(); }
  bool none() const { return count() == 0; }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline void check_mask_shape(const RegionMask& m, const Shape4& s) {
  detail::check_axis("mask frames", m.frames(), s.frames);
  detail::check_axis("mask height", m.height(), s.height);
  detail::check_axis("mask width", m.width(), s.width);
}

// Replicates each mask cell across `channels`.
inline Video<float> broadcast_mask(const RegionMask& mask,
                                   std::size_t channels) {
  Video<float> out(Shape4{mask.frames(), mask.height(), mask.width(), channels});
  for (std::size_t cell = 0; cell < mask.size(); ++cell) {
    if (!mask[cell]) continue;
    std::fill_n(out.data().begin() + cell * channels, channels, 1.f);
  }
  return out;
}

// mask ? a : b per cell. A binary mask makes this a selection, so each
// output element is bitwise one of its inputs.
template <typename T>
Video<T> masked_blend(const Video<T>& a, const Video<T>& b,
                      const RegionMask& mask) {
  check_same_shape(a.shape(), b.shape());
  check_mask_shape(mask, a.shape());
  const std::size_t c = a.channels();
  Video<T> out = b;
  for (std::size_t cell = 0; cell < mask.size(); ++cell) {
    if (!mask[cell]) continue;
    std::copy_n(a.data().begin() + cell * c, c, out.data().begin() + cell * c);
  }
  return out;
}

}  // namespace vidinsert

#endif  // VIDINSERT_VIDEO_HPP_
