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

// Synthetic insertion benchmark: a static background clip ("source"), the
// same clip with one moving object ("oracle"), the oracle's first frame as
// the edited frame, and a mask covering the object's motion corridor.
//
// Pixels map to latents by space-to-depth with factor s: latent channel
// (dy * s + dx) * 3 + c holds pixel (s*y + dy, s*x + dx, c).

#ifndef VIDINSERT_SYNTHBENCH_HPP_
#define VIDINSERT_SYNTHBENCH_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidinsert/checkpoint.hpp"
#include "vidinsert/error.hpp"
#include "vidinsert/guidance.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/tensor_io.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

enum class BackgroundKind { kGradient, kChecker, kNoise };
enum class ObjectKind { kNone, kDisc, kSquare };

inline std::string to_string(BackgroundKind k) {
  switch (k) {
    case BackgroundKind::kGradient: return "gradient";
    case BackgroundKind::kChecker: return "checker";
    case BackgroundKind::kNoise: return "noise";
  }
  return "?";
}

inline std::string to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::kNone: return "none";
    case ObjectKind::kDisc: return "disc";
    case ObjectKind::kSquare: return "square";
  }
  return "?";
}

inline BackgroundKind parse_background(const std::string& s) {
  if (s == "gradient") return BackgroundKind::kGradient;
  if (s == "checker") return BackgroundKind::kChecker;
  if (s == "noise") return BackgroundKind::kNoise;
  throw FormatError("unknown background kind '" + s + "'");
}

inline ObjectKind parse_object(const std::string& s) {
  if (s == "none") return ObjectKind::kNone;
  if (s == "disc") return ObjectKind::kDisc;
  if (s == "square") return ObjectKind::kSquare;
  throw FormatError("unknown object kind '" + s + "'");
}

struct NamedColor {
  const char* name;
  std::array<float, 3> rgb;
};

inline constexpr std::array<NamedColor, 6> kPalette = {{
    {"red", {0.9f, 0.1f, 0.1f}},
    {"green", {0.1f, 0.8f, 0.2f}},
    {"blue", {0.15f, 0.2f, 0.9f}},
    {"yellow", {0.95f, 0.9f, 0.1f}},
    {"magenta", {0.85f, 0.1f, 0.8f}},
    {"white", {1.0f, 1.0f, 1.0f}},
}};

// Geometry is in pixels; the object center moves by (vx, vy) per frame.
struct SceneSpec {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t scale = 2;  // space-to-depth factor
  BackgroundKind background = BackgroundKind::kGradient;
  ObjectKind object = ObjectKind::kDisc;
  double x = 10, y = 10;
  double vx = 1, vy = 0;
  double radius = 3;
  std::size_t color = 0;  // index into kPalette
  bool per_frame_mask = false;
  std::uint64_t seed = 0;

  double cx(std::size_t t) const { return x + vx * static_cast<double>(t); }
  double cy(std::size_t t) const { return y + vy * static_cast<double>(t); }

  void validate() const {
    if (frames == 0 || height == 0 || width == 0) {
      throw InvalidArgument("scene extents must be >= 1");
    }
    if (scale == 0 || height % scale != 0 || width % scale != 0) {
      throw DimensionError("canvas " + std::to_string(height) + "x" +
                           std::to_string(width) +
                           " not divisible by scale " + std::to_string(scale));
    }
    if (color >= kPalette.size()) throw InvalidArgument("color index out of range");
    if (object == ObjectKind::kNone) return;
    if (!(radius >= 0)) throw InvalidArgument("object radius must be >= 0");
    for (std::size_t t = 0; t < frames; ++t) {
      if (cx(t) - radius < 0 || cy(t) - radius < 0 ||
          cx(t) + radius > static_cast<double>(width - 1) ||
          cy(t) + radius > static_cast<double>(height - 1)) {
        throw InvalidArgument("object leaves the canvas at frame " + std::to_string(t));
      }
    }
  }
};

inline nlohmann::json to_json(const SceneSpec& s) {
  return {{"frames", s.frames},         {"height", s.height},
          {"width", s.width},           {"scale", s.scale},
          {"background", to_string(s.background)},
          {"object", to_string(s.object)},
          {"x", s.x},                   {"y", s.y},
          {"vx", s.vx},                 {"vy", s.vy},
          {"radius", s.radius},         {"color", kPalette.at(s.color).name},
          {"per_frame_mask", s.per_frame_mask},
          {"seed", s.seed}};
}

// Prompt template "a <color> <object> moving <direction>".
inline std::string scene_prompt(const SceneSpec& s) {
  if (s.object == ObjectKind::kNone) return "an empty scene";
  std::string dir;
  if (s.vy < 0) dir = "up";
  if (s.vy > 0) dir = "down";
  if (s.vx != 0) {
    if (!dir.empty()) dir += "-";
    dir += s.vx < 0 ? "left" : "right";
  }
  if (dir.empty()) dir = "in place";
  return std::string("a ") + kPalette.at(s.color).name + " " + to_string(s.object) +
         " moving " + dir;
}

inline bool object_covers(const SceneSpec& s, std::size_t t, std::size_t py,
                          std::size_t px) {
  const double dx = static_cast<double>(px) - s.cx(t);
  const double dy = static_cast<double>(py) - s.cy(t);
  switch (s.object) {
    case ObjectKind::kNone: return false;
    case ObjectKind::kDisc: return dx * dx + dy * dy <= s.radius * s.radius;
    case ObjectKind::kSquare: return std::max(std::abs(dx), std::abs(dy)) <= s.radius;
  }
  return false;
}

// Static background, identical in every frame.
inline PixelVideo render_background(const SceneSpec& s) {
  s.validate();
  PixelVideo v(Shape4{s.frames, s.height, s.width, 3});
  SeededRng rng(s.seed, "texture");
  std::vector<float> noise(s.height * s.width * 3);
  for (auto& n : noise) n = static_cast<float>(0.2 + 0.6 * rng.uniform());
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        float val = 0.f;
        switch (s.background) {
          case BackgroundKind::kGradient:
            val = static_cast<float>(0.15 + 0.5 * static_cast<double>(x) / s.width +
                                     0.25 * static_cast<double>(y) / s.height +
                                     0.05 * static_cast<double>(c));
            break;
          case BackgroundKind::kChecker:
            val = ((x / 4 + y / 4) % 2 == 0) ? 0.3f + 0.1f * c : 0.7f - 0.1f * c;
            break;
          case BackgroundKind::kNoise:
            val = noise[(y * s.width + x) * 3 + c];
            break;
        }
        for (std::size_t t = 0; t < s.frames; ++t) v.at(t, y, x, c) = val;
      }
    }
  }
  return v;
}

inline PixelVideo render_scene(const SceneSpec& s) {
  PixelVideo v = render_background(s);
  const auto& rgb = kPalette.at(s.color).rgb;
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        if (!object_covers(s, t, y, x)) continue;
        for (std::size_t c = 0; c < 3; ++c) v.at(t, y, x, c) = rgb[c];
      }
    }
  }
  return v;
}

// 3x3 dilation within each frame.
inline RegionMask dilate(const RegionMask& m) {
  RegionMask out(m.frames(), m.height(), m.width());
  for (std::size_t t = 0; t < m.frames(); ++t) {
    for (std::size_t y = 0; y < m.height(); ++y) {
      for (std::size_t x = 0; x < m.width(); ++x) {
        if (!m.at(t, y, x)) continue;
        for (std::size_t yy = y ? y - 1 : 0; yy <= std::min(y + 1, m.height() - 1); ++yy) {
          for (std::size_t xx = x ? x - 1 : 0; xx <= std::min(x + 1, m.width() - 1); ++xx) {
            out.set(t, yy, xx, true);
          }
        }
      }
    }
  }
  return out;
}

// Pixel cells the object may occupy, dilated by one pixel. Static masks take
// the union over all frames; per-frame masks follow the object.
inline RegionMask motion_corridor(const SceneSpec& s) {
  s.validate();
  RegionMask m(s.frames, s.height, s.width);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        if (!object_covers(s, t, y, x)) continue;
        if (s.per_frame_mask) {
          m.set(t, y, x, true);
        } else {
          for (std::size_t u = 0; u < s.frames; ++u) m.set(u, y, x, true);
        }
      }
    }
  }
  return dilate(m);
}

inline void check_scale(std::size_t h, std::size_t w, std::size_t s) {
  if (s == 0 || h % s != 0 || w % s != 0) {
    throw DimensionError(std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by space-to-depth factor " +
                         std::to_string(s));
  }
}

// (T, H, W, 3) pixels -> (T, H/s, W/s, 3 s^2) latent.
inline VideoLatent encode(const PixelVideo& px, std::size_t s = 2) {
  detail::check_axis("pixel channels", px.channels(), 3);
  check_scale(px.height(), px.width(), s);
  VideoLatent z(Shape4{px.frames(), px.height() / s, px.width() / s, 3 * s * s});
  for (std::size_t t = 0; t < px.frames(); ++t) {
    for (std::size_t y = 0; y < px.height(); ++y) {
      for (std::size_t x = 0; x < px.width(); ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          z.at(t, y / s, x / s, ((y % s) * s + x % s) * 3 + c) = px.at(t, y, x, c);
        }
      }
    }
  }
  return z;
}

inline PixelVideo decode(const VideoLatent& z, std::size_t s = 2) {
  if (s == 0 || z.channels() != 3 * s * s) {
    throw DimensionError("latent channels " + std::to_string(z.channels()) +
                         " do not match space-to-depth factor " + std::to_string(s));
  }
  PixelVideo px(Shape4{z.frames(), z.height() * s, z.width() * s, 3});
  for (std::size_t t = 0; t < px.frames(); ++t) {
    for (std::size_t y = 0; y < px.height(); ++y) {
      for (std::size_t x = 0; x < px.width(); ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          px.at(t, y, x, c) = z.at(t, y / s, x / s, ((y % s) * s + x % s) * 3 + c);
        }
      }
    }
  }
  return px;
}

// Latent cell is set when any pixel it covers is set.
inline RegionMask downscale_mask(const RegionMask& px, std::size_t s = 2) {
  check_scale(px.height(), px.width(), s);
  RegionMask out(px.frames(), px.height() / s, px.width() / s);
  for (std::size_t t = 0; t < px.frames(); ++t) {
    for (std::size_t y = 0; y < px.height(); ++y) {
      for (std::size_t x = 0; x < px.width(); ++x) {
        if (px.at(t, y, x)) out.set(t, y / s, x / s, true);
      }
    }
  }
  return out;
}

inline RegionMask upscale_mask(const RegionMask& cells, std::size_t s = 2) {
  if (s == 0) throw InvalidArgument("scale must be >= 1");
  RegionMask out(cells.frames(), cells.height() * s, cells.width() * s);
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t x = 0; x < out.width(); ++x) {
        out.set(t, y, x, cells.at(t, y / s, x / s));
      }
    }
  }
  return out;
}

struct BenchCase {
  std::string id;
  SceneSpec spec;
  PixelVideo source_px;   // background only
  PixelVideo oracle_px;   // with the object
  RegionMask corridor_px; // exact dilated corridor
  RegionMask mask_px;     // corridor snapped to whole latent cells
  RegionMask mask;        // latent cells
  std::string prompt;
};

inline BenchCase gen_case(const SceneSpec& spec, std::string id = "case") {
  spec.validate();
  BenchCase bc;
  bc.id = std::move(id);
  bc.spec = spec;
  bc.source_px = render_background(spec);
  bc.oracle_px = render_scene(spec);
  bc.corridor_px = motion_corridor(spec);
  bc.mask = downscale_mask(bc.corridor_px, spec.scale);
  bc.mask_px = upscale_mask(bc.mask, spec.scale);
  bc.prompt = scene_prompt(spec);
  for (std::size_t cell = 0; cell < bc.corridor_px.size(); ++cell) {
    if (bc.corridor_px[cell]) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      if (bc.source_px[cell * 3 + c] != bc.oracle_px[cell * 3 + c]) {
        throw Error("source and oracle differ outside the mask in " + bc.id);
      }
    }
  }
  return bc;
}

// Writes one case directory and returns the manifest path.
inline std::filesystem::path write_case(const std::filesystem::path& dir,
                                        const BenchCase& bc,
                                        bool dump_frames = false) {
  const std::size_t s = bc.spec.scale;
  const VideoLatent oracle = encode(bc.oracle_px, s);
  VideoLatent first(Shape4{1, oracle.height(), oracle.width(), oracle.channels()});
  std::copy(oracle.frame(0).begin(), oracle.frame(0).end(), first.data().begin());
  write_tensor(dir / "source.vlt", encode(bc.source_px, s));
  write_tensor(dir / "oracle.vlt", oracle);
  write_tensor(dir / "edited_frame.vlt", first);
  write_mask(dir / "mask.vlt", bc.mask);
  write_mask(dir / "mask_px.vlt", bc.mask_px);
  if (dump_frames) {
    write_ppm_frames(dir / "frames", bc.source_px, "source");
    write_ppm_frames(dir / "frames", bc.oracle_px, "oracle");
  }
  const nlohmann::json manifest = {
      {"case", bc.id},           {"source", "source.vlt"},
      {"oracle", "oracle.vlt"},  {"edited_frame", "edited_frame.vlt"},
      {"mask", "mask.vlt"},      {"mask_px", "mask_px.vlt"},
      {"prompt", bc.prompt},     {"spec", to_json(bc.spec)}};
  write_json_file(dir / "manifest.json", manifest);
  return dir / "manifest.json";
}

// Distribution of random scenes produced by synthesize().
struct SynthTemplate {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t scale = 2;
  std::vector<std::string> backgrounds{"gradient", "checker", "noise"};
  std::vector<std::string> objects{"disc", "square"};
  std::size_t radius_min = 2;
  std::size_t radius_max = 4;
  std::size_t speed_max = 1;  // integer pixels per frame on each axis
  bool per_frame_mask = false;
};

inline nlohmann::json to_json(const SynthTemplate& t) {
  return {{"frames", t.frames},         {"height", t.height},
          {"width", t.width},           {"scale", t.scale},
          {"backgrounds", t.backgrounds}, {"objects", t.objects},
          {"radius_min", t.radius_min}, {"radius_max", t.radius_max},
          {"speed_max", t.speed_max},   {"per_frame_mask", t.per_frame_mask}};
}

inline SynthTemplate synth_template_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"frames", "height", "width", "scale", "backgrounds",
                               "objects", "radius_min", "radius_max", "speed_max",
                               "per_frame_mask"},
                              "synth spec");
  SynthTemplate t;
  detail::read_key(j, "frames", t.frames);
  detail::read_key(j, "height", t.height);
  detail::read_key(j, "width", t.width);
  detail::read_key(j, "scale", t.scale);
  detail::read_key(j, "backgrounds", t.backgrounds);
  detail::read_key(j, "objects", t.objects);
  detail::read_key(j, "radius_min", t.radius_min);
  detail::read_key(j, "radius_max", t.radius_max);
  detail::read_key(j, "speed_max", t.speed_max);
  detail::read_key(j, "per_frame_mask", t.per_frame_mask);
  if (t.backgrounds.empty() || t.objects.empty()) {
    throw InvalidArgument("synth spec needs at least one background and object kind");
  }
  if (t.radius_min > t.radius_max) throw InvalidArgument("radius_min > radius_max");
  for (const auto& b : t.backgrounds) parse_background(b);
  for (const auto& o : t.objects) parse_object(o);
  return t;
}

// Scene i of a synthesized set, drawn from the "synth/case/i" stream.
inline SceneSpec draw_scene(const SynthTemplate& tpl, std::uint64_t seed,
                            std::size_t index) {
  SeededRng rng = SeededRng::derive(seed, "synth/case", index, 0);
  SceneSpec s;
  s.frames = tpl.frames;
  s.height = tpl.height;
  s.width = tpl.width;
  s.scale = tpl.scale;
  s.per_frame_mask = tpl.per_frame_mask;
  s.seed = rng.next_u64();
  s.background = parse_background(tpl.backgrounds[rng.below(tpl.backgrounds.size())]);
  s.object = parse_object(tpl.objects[rng.below(tpl.objects.size())]);
  s.color = rng.below(kPalette.size());
  const std::size_t r = tpl.radius_min + rng.below(tpl.radius_max - tpl.radius_min + 1);
  s.radius = static_cast<double>(r);
  const auto span = static_cast<std::int64_t>(tpl.frames - 1);
  auto pick_axis = [&](std::size_t extent, double& pos, double& vel) {
    const auto vmax = static_cast<std::int64_t>(tpl.speed_max);
    auto v = static_cast<std::int64_t>(rng.below(2 * tpl.speed_max + 1)) - vmax;
    const auto ri = static_cast<std::int64_t>(r);
    auto lo = ri - std::min<std::int64_t>(0, v * span);
    auto hi = static_cast<std::int64_t>(extent) - 1 - ri - std::max<std::int64_t>(0, v * span);
    if (lo > hi) {  // too fast for the canvas: hold still
      v = 0;
      lo = ri;
      hi = static_cast<std::int64_t>(extent) - 1 - ri;
    }
    if (lo > hi) throw InvalidArgument("object radius too large for the canvas");
    pos = static_cast<double>(lo + static_cast<std::int64_t>(rng.below(
                                       static_cast<std::uint64_t>(hi - lo + 1))));
    vel = static_cast<double>(v);
  };
  pick_axis(tpl.width, s.x, s.vx);
  pick_axis(tpl.height, s.y, s.vy);
  return s;
}

// Writes `count` cases under `out` plus out/index.json listing them.
inline std::vector<std::filesystem::path> synthesize(const SynthTemplate& tpl,
                                                     std::size_t count,
                                                     std::uint64_t seed,
                                                     const std::filesystem::path& out,
                                                     bool dump_frames = false) {
  std::vector<std::filesystem::path> manifests;
  nlohmann::json index;
  index["seed"] = seed;
  index["count"] = count;
  index["template"] = to_json(tpl);
  index["cases"] = nlohmann::json::array();
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "case_%03zu", i);
    const BenchCase bc = gen_case(draw_scene(tpl, seed, i), name);
    manifests.push_back(write_case(out / name, bc, dump_frames));
    index["cases"].push_back(std::string(name) + "/manifest.json");
  }
  write_json_file(out / "index.json", index);
  return manifests;
}

// Manifest paths listed in a synthesized index.json.
inline std::vector<std::filesystem::path> read_bench_index(
    const std::filesystem::path& index_path) {
  const nlohmann::json j = read_json_file(index_path);
  if (!j.contains("cases") || !j.at("cases").is_array()) {
    throw FormatError("bench index lacks a 'cases' array: " + index_path.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& c : j.at("cases")) {
    if (!c.is_string()) throw FormatError("bench index entries must be strings");
    out.push_back(index_path.parent_path() / c.get<std::string>());
  }
  return out;
}

}  // namespace vidinsert

#endif  // VIDINSERT_SYNTHBENCH_HPP_
