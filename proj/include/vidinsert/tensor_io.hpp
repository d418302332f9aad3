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

// "VLT1" tensor files:
//
//   offset 0   4 bytes  magic "VLT1"
//   offset 4   4 x u32  T, H, W, C (little-endian)
//   offset 20  T*H*W*C  f32 little-endian, channel fastest
//
// Masks are C=1 tensors holding 0.0 / 1.0.

#ifndef VIDINSERT_TENSOR_IO_HPP_
#define VIDINSERT_TENSOR_IO_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "vidinsert/error.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

inline constexpr std::array<char, 4> kTensorMagic = {'V', 'L', 'T', '1'};
inline constexpr std::size_t kTensorHeaderBytes = 20;
// Largest element count accepted on read (4 GiB of payload).
inline constexpr std::uint64_t kMaxTensorElements = 1ULL << 30;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

inline std::vector<unsigned char> encode_tensor(const Video<float>& v) {
  const Shape4& s = v.shape();
  for (std::size_t d : {s.frames, s.height, s.width, s.channels}) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw DimensionError("tensor extent does not fit in u32");
    }
  }
  std::vector<unsigned char> out;
  out.reserve(kTensorHeaderBytes + 4 * v.size());
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(s.frames));
  detail::put_u32(out, static_cast<std::uint32_t>(s.height));
  detail::put_u32(out, static_cast<std::uint32_t>(s.width));
  detail::put_u32(out, static_cast<std::uint32_t>(s.channels));
  for (float x : v.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

inline Video<float> decode_tensor(const std::vector<unsigned char>& bytes,
                                  const std::string& what = "tensor") {
  if (bytes.size() < kTensorHeaderBytes) {
    throw FormatError(what + ": truncated header (" +
                      std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0) {
    throw FormatError(what + ": bad magic, expected VLT1");
  }
  std::array<std::uint64_t, 4> dims{};
  for (int i = 0; i < 4; ++i) dims[i] = detail::get_u32(bytes.data() + 4 + 4 * i);
  std::uint64_t count = 1;
  for (std::uint64_t d : dims) {
    if (d == 0) throw FormatError(what + ": zero extent in header");
    if (count > kMaxTensorElements / d) {
      throw FormatError(what + ": dimension overflow in header");
    }
    count *= d;
  }
  const std::uint64_t need = kTensorHeaderBytes + 4 * count;
  if (bytes.size() < need) {
    throw FormatError(what + ": truncated payload, expected " +
                      std::to_string(count) + " floats");
  }
  if (bytes.size() > need) {
    throw FormatError(what + ": trailing bytes after payload");
  }
  Video<float> v(Shape4{dims[0], dims[1], dims[2], dims[3]});
  const unsigned char* p = bytes.data() + kTensorHeaderBytes;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::bit_cast<float>(detail::get_u32(p + 4 * i));
  }
  return v;
}

inline std::vector<unsigned char> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

inline void write_tensor(const std::filesystem::path& path,
                         const Video<float>& v) {
  write_file_bytes(path, encode_tensor(v));
}

inline Video<float> read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file_bytes(path), path.string());
}

inline RegionMask read_mask(const std::filesystem::path& path,
                            std::size_t frames = 0) {
  return RegionMask::from_video(read_tensor(path), frames);
}

inline void write_mask(const std::filesystem::path& path,
                       const RegionMask& mask) {
  write_tensor(path, mask.to_video());
}

// Binary PPM (P6, maxval 255) of one RGB frame; values map through
// round(255 * clamp(v, 0, 1)).
inline std::vector<unsigned char> encode_ppm(const Video<float>& pixels,
                                             std::size_t frame) {
  detail::check_axis("ppm channels", pixels.channels(), 3);
  if (frame >= pixels.frames()) throw InvalidArgument("frame out of range");
  const std::string header = "P6\n" + std::to_string(pixels.width()) + " " +
                             std::to_string(pixels.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (float v : pixels.frame(frame)) {
    const float c = std::min(1.f, std::max(0.f, std::isnan(v) ? 0.f : v));
    out.push_back(static_cast<unsigned char>(std::lround(255.f * c)));
  }
  return out;
}

inline void write_ppm_frames(const std::filesystem::path& dir,
                             const Video<float>& pixels,
                             const std::string& prefix = "frame") {
  for (std::size_t t = 0; t < pixels.frames(); ++t) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%03zu.ppm", prefix.c_str(), t);
    write_file_bytes(dir / name, encode_ppm(pixels, t));
  }
}

}  // namespace vidinsert

#endif  // VIDINSERT_TENSOR_IO_HPP_
