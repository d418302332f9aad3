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

// Background-only quality metrics in pixel space. A pixel counts as
// background where the (T, H, W) pixel mask is 0; every channel of it is
// used. Accumulation is in double regardless of the pixel type.

#ifndef VIDINSERT_METRICS_HPP_
#define VIDINSERT_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidinsert/error.hpp"
#include "vidinsert/video.hpp"

namespace vidinsert {

inline constexpr double kPsnrCapDb = 120.0;
inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct PsnrResult {
  double db = 0.0;
  bool exact = false;  // MSE == 0; db is then the cap
};

namespace detail {

template <typename T>
void check_metric_inputs(const Video<T>& a, const Video<T>& b, const RegionMask& m) {
  check_same_shape(a.shape(), b.shape());
  check_mask_shape(m, a.shape());
}

}  // namespace detail

template <typename T>
PsnrResult masked_psnr(const Video<T>& a, const Video<T>& b, const RegionMask& mask) {
  detail::check_metric_inputs(a, b, mask);
  const std::size_t c = a.channels();
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t cell = 0; cell < mask.size(); ++cell) {
    if (mask[cell]) continue;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = static_cast<double>(a[cell * c + k]) - static_cast<double>(b[cell * c + k]);
      sse += d * d;
    }
    n += c;
  }
  if (n == 0) throw InvalidArgument("masked PSNR: no background pixels");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return {kPsnrCapDb, true};
  return {std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse)), false};
}

// Mean SSIM over all 8x8 stride-1 windows lying entirely in the background
// of their frame, taken per channel. Population (1/N) moments, dynamic
// range 1.
template <typename T>
double masked_ssim(const Video<T>& a, const Video<T>& b, const RegionMask& mask) {
  detail::check_metric_inputs(a, b, mask);
  const std::size_t w = kSsimWindow;
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const std::size_t ch = a.channels();
  if (a.height() < w || a.width() < w) {
    throw InvalidArgument("masked SSIM: frame smaller than the window");
  }
  const double inv_n = 1.0 / static_cast<double>(w * w);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t t = 0; t < a.frames(); ++t) {
    for (std::size_t y0 = 0; y0 + w <= a.height(); ++y0) {
      for (std::size_t x0 = 0; x0 + w <= a.width(); ++x0) {
        bool clear = true;
        for (std::size_t y = y0; y < y0 + w && clear; ++y) {
          for (std::size_t x = x0; x < x0 + w; ++x) {
            if (mask.at(t, y, x)) {
              clear = false;
              break;
            }
          }
        }
        if (!clear) continue;
        for (std::size_t k = 0; k < ch; ++k) {
          double sa = 0.0, sb = 0.0;
          for (std::size_t y = y0; y < y0 + w; ++y) {
            for (std::size_t x = x0; x < x0 + w; ++x) {
              sa += static_cast<double>(a.at(t, y, x, k));
              sb += static_cast<double>(b.at(t, y, x, k));
            }
          }
          const double ma = sa * inv_n;
          const double mb = sb * inv_n;
          double vaa = 0.0, vbb = 0.0, vab = 0.0;
          for (std::size_t y = y0; y < y0 + w; ++y) {
            for (std::size_t x = x0; x < x0 + w; ++x) {
              const double da = static_cast<double>(a.at(t, y, x, k)) - ma;
              const double db = static_cast<double>(b.at(t, y, x, k)) - mb;
              vaa += da * da;
              vbb += db * db;
              vab += da * db;
            }
          }
          vaa *= inv_n;
          vbb *= inv_n;
          vab *= inv_n;
          const double num = (2.0 * ma * mb + c1) * (2.0 * vab + c2);
          const double den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
          total += num / den;
          ++windows;
        }
      }
    }
  }
  if (windows == 0) throw InvalidArgument("masked SSIM: no fully-background window");
  return total / static_cast<double>(windows);
}

// Per-frame mean |video - source| over background pixels. A frame whose
// background is empty reports 0.
template <typename T>
std::vector<double> background_drift(const Video<T>& video, const Video<T>& source,
                                     const RegionMask& mask) {
  detail::check_metric_inputs(video, source, mask);
  if (mask.all()) throw InvalidArgument("background drift: no background pixels");
  const std::size_t c = video.channels();
  const std::size_t per_frame = video.height() * video.width();
  std::vector<double> out(video.frames(), 0.0);
  for (std::size_t t = 0; t < video.frames(); ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < per_frame; ++p) {
      const std::size_t cell = t * per_frame + p;
      if (mask[cell]) continue;
      for (std::size_t k = 0; k < c; ++k) {
        sum += std::abs(static_cast<double>(video[cell * c + k]) -
                        static_cast<double>(source[cell * c + k]));
      }
      n += c;
    }
    out[t] = n ? sum / static_cast<double>(n) : 0.0;
  }
  return out;
}

struct MetricsReport {
  std::string case_id;
  std::string config;
  double psnr_db = 0.0;
  bool psnr_exact = false;
  double ssim = 0.0;
  std::vector<double> drift;
};

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"case", r.case_id}, {"config", r.config},   {"psnr_db", r.psnr_db},
          {"psnr_exact", r.psnr_exact}, {"ssim", r.ssim}, {"drift", r.drift}};
}

template <typename T>
MetricsReport evaluate(const Video<T>& output, const Video<T>& source,
                       const RegionMask& mask_px, std::string case_id,
                       std::string config) {
  MetricsReport r;
  r.case_id = std::move(case_id);
  r.config = std::move(config);
  const PsnrResult p = masked_psnr(output, source, mask_px);
  r.psnr_db = p.db;
  r.psnr_exact = p.exact;
  r.ssim = masked_ssim(output, source, mask_px);
  r.drift = background_drift(output, source, mask_px);
  return r;
}

struct AblationRow {
  std::string config;
  std::size_t cases = 0;
  double psnr_db = 0.0;     // mean over cases
  bool psnr_exact = false;  // every case exact
  double ssim = 0.0;
  double drift = 0.0;        // mean over cases and frames
  double final_drift = 0.0;  // mean last-frame drift
};

struct AblationTable {
  std::vector<AblationRow> rows;  // sorted by config name
  std::vector<MetricsReport> cases;
};

inline AblationTable assemble_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw InvalidArgument("cannot assemble an empty report");
  std::map<std::string, std::vector<const MetricsReport*>> groups;
  for (const auto& r : reports) groups[r.config].push_back(&r);
  AblationTable table;
  table.cases = reports;
  std::sort(table.cases.begin(), table.cases.end(), [](const auto& a, const auto& b) {
    return a.config != b.config ? a.config < b.config : a.case_id < b.case_id;
  });
  for (const auto& [name, rs] : groups) {
    AblationRow row;
    row.config = name;
    row.cases = rs.size();
    row.psnr_exact = true;
    // Sum in case-id order so the means do not depend on input order.
    std::vector<const MetricsReport*> sorted = rs;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->case_id < b->case_id; });
    for (const auto* r : sorted) {
      row.psnr_db += r->psnr_db;
      row.psnr_exact = row.psnr_exact && r->psnr_exact;
      row.ssim += r->ssim;
      double d = 0.0;
      for (double v : r->drift) d += v;
      row.drift += r->drift.empty() ? 0.0 : d / static_cast<double>(r->drift.size());
      row.final_drift += r->drift.empty() ? 0.0 : r->drift.back();
    }
    const double n = static_cast<double>(sorted.size());
    row.psnr_db /= n;
    row.ssim /= n;
    row.drift /= n;
    row.final_drift /= n;
    table.rows.push_back(row);
  }
  return table;
}

inline nlohmann::json to_json(const AblationTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"config", r.config},
                    {"cases", r.cases},
                    {"psnr_db", r.psnr_db},
                    {"psnr_exact", r.psnr_exact},
                    {"ssim", r.ssim},
                    {"drift", r.drift},
                    {"final_drift", r.final_drift}});
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : t.cases) cases.push_back(to_json(c));
  return {{"rows", rows}, {"cases", cases}};
}

inline std::string format_table(const AblationTable& t) {
  std::size_t width = 6;
  for (const auto& r : t.rows) width = std::max(width, r.config.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %5s  %9s  %5s  %7s  %11s  %11s\n",
                static_cast<int>(width), "config", "cases", "PSNR(dB)", "exact",
                "SSIM", "drift", "final_drift");
  out += line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof line, "%-*s  %5zu  %9.4f  %5s  %7.4f  %11.4e  %11.4e\n",
                  static_cast<int>(width), r.config.c_str(), r.cases, r.psnr_db,
                  r.psnr_exact ? "yes" : "no", r.ssim, r.drift, r.final_drift);
    out += line;
  }
  return out;
}

}  // namespace vidinsert

#endif  // VIDINSERT_METRICS_HPP_
