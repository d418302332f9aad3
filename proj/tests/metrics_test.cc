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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "test_util.hpp"
#include "vidinsert.hpp"

namespace vidinsert {
namespace {

using testing::random_mask;

Video<double> random_pixels(const Shape4& s, std::uint64_t seed) {
  Video<double> v(s);
  SeededRng r(seed, "pixels");
  for (auto& x : v.data()) x = r.uniform();
  return v;
}

RegionMask centre_box(std::size_t t, std::size_t h, std::size_t w) {
  RegionMask m(t, h, w);
  for (std::size_t f = 0; f < t; ++f) {
    for (std::size_t y = h / 2 - 2; y < h / 2 + 2; ++y) {
      for (std::size_t x = w / 2 - 2; x < w / 2 + 2; ++x) m.set(f, y, x, true);
    }
  }
  return m;
}

const Shape4 kShape{3, 20, 20, 3};

TEST(MaskedPsnr, IdenticalIsCappedAndExact) {
  const auto a = random_pixels(kShape, 1);
  const PsnrResult r = masked_psnr(a, a, centre_box(3, 20, 20));
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.db, kPsnrCapDb);
}

TEST(MaskedPsnr, UniformTenthIsTwentyDb) {
  const auto a = random_pixels(kShape, 2);
  Video<double> b = a;
  for (auto& x : b.data()) x += 0.1;
  const PsnrResult r = masked_psnr(a, b, centre_box(3, 20, 20));
  EXPECT_FALSE(r.exact);
  EXPECT_NEAR(r.db, 20.0, 1e-9);
}

TEST(MaskedPsnr, FloatTenthNearTwentyDb) {
  Video<float> a(kShape, 0.4f), b(kShape, 0.5f);
  EXPECT_NEAR(masked_psnr(a, b, centre_box(3, 20, 20)).db, 20.0, 1e-5);
}

TEST(MaskedPsnr, MonotoneInNoiseAmplitude) {
  const auto a = random_pixels(kShape, 3);
  const auto noise = random_pixels(kShape, 4);
  const RegionMask m = centre_box(3, 20, 20);
  double prev = kPsnrCapDb + 1;
  for (double amp : {0.001, 0.01, 0.05, 0.2}) {
    Video<double> b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += amp * (noise[i] - 0.5);
    const double db = masked_psnr(a, b, m).db;
    EXPECT_LT(db, prev);
    prev = db;
  }
}

TEST(MaskedPsnr, NoBackgroundThrows) {
  const auto a = random_pixels(kShape, 5);
  EXPECT_THROW(masked_psnr(a, a, RegionMask(3, 20, 20, 1)), InvalidArgument);
  EXPECT_THROW(masked_psnr(a, random_pixels(Shape4{3, 20, 21, 3}, 1), RegionMask(3, 20, 20)),
               DimensionError);
}

TEST(MaskedSsim, IdentityIsExactlyOne) {
  const auto a = random_pixels(kShape, 6);
  EXPECT_EQ(masked_ssim(a, a, centre_box(3, 20, 20)), 1.0);
  const Video<float> f = a.cast<float>();
  EXPECT_EQ(masked_ssim(f, f, centre_box(3, 20, 20)), 1.0);
}

TEST(MaskedSsim, ConstantImagesHandFormula) {
  const Video<double> a(kShape, 0.25), b(kShape, 0.75);
  const double c1 = 0.01 * 0.01;
  const double want = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
  EXPECT_NEAR(masked_ssim(a, b, centre_box(3, 20, 20)), want, 1e-12);
}

TEST(MaskedSsim, InvertedBelowOneAndSymmetric) {
  const auto a = random_pixels(kShape, 7);
  Video<double> b = a;
  for (auto& x : b.data()) x = 1.0 - x;
  const RegionMask m = centre_box(3, 20, 20);
  EXPECT_LT(masked_ssim(a, b, m), 1.0);
  const auto c = random_pixels(kShape, 8);
  EXPECT_NEAR(masked_ssim(a, c, m), masked_ssim(c, a, m), 1e-12);
}

// Window-by-window reference using the textbook formula.
TEST(MaskedSsim, MatchesReferenceOnUnmaskedFrame) {
  const Shape4 s{1, 9, 10, 1};
  const auto a = random_pixels(s, 9), b = random_pixels(s, 10);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  int n = 0;
  for (int y0 = 0; y0 + 8 <= 9; ++y0) {
    for (int x0 = 0; x0 + 8 <= 10; ++x0) {
      std::vector<double> xa, xb;
      for (int y = y0; y < y0 + 8; ++y) {
        for (int x = x0; x < x0 + 8; ++x) {
          xa.push_back(a.at(0, y, x, 0));
          xb.push_back(b.at(0, y, x, 0));
        }
      }
      double ma = 0, mb = 0;
      for (int i = 0; i < 64; ++i) ma += xa[i] / 64, mb += xb[i] / 64;
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < 64; ++i) {
        va += (xa[i] - ma) * (xa[i] - ma) / 64;
        vb += (xb[i] - mb) * (xb[i] - mb) / 64;
        cov += (xa[i] - ma) * (xb[i] - mb) / 64;
      }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  }
  EXPECT_NEAR(masked_ssim(a, b, RegionMask(1, 9, 10)), total / n, 1e-12);
}

TEST(MaskedSsim, NoQualifyingWindowThrows) {
  const auto a = random_pixels(Shape4{1, 12, 12, 3}, 11);
  RegionMask m(1, 12, 12);
  m.set(0, 6, 6, true);
  EXPECT_THROW(masked_ssim(a, a, m), InvalidArgument);
  const auto small = random_pixels(Shape4{1, 6, 6, 3}, 12);
  EXPECT_THROW(masked_ssim(small, small, RegionMask(1, 6, 6)), InvalidArgument);
}

TEST(MaskExclusion, AdversarialEditedRegion) {
  const auto a = random_pixels(kShape, 13);
  const auto b = random_pixels(kShape, 14);
  const RegionMask m = random_mask(Shape4{3, 20, 20, 1}, 15, 0.05);
  Video<double> bad = b;
  const double poison[] = {std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::infinity(), -1e300, 1e9};
  std::size_t k = 0;
  for (std::size_t cell = 0; cell < m.size(); ++cell) {
    if (!m[cell]) continue;
    for (std::size_t c = 0; c < 3; ++c) bad[cell * 3 + c] = poison[k++ % 4];
  }
  EXPECT_EQ(masked_psnr(a, b, m).db, masked_psnr(a, bad, m).db);
  EXPECT_EQ(background_drift(a, b, m), background_drift(a, bad, m));
  const RegionMask box = centre_box(3, 20, 20);
  Video<double> bad_box = b;
  for (std::size_t cell = 0; cell < box.size(); ++cell) {
    if (box[cell]) bad_box[cell * 3] = poison[cell % 4];
  }
  EXPECT_EQ(masked_ssim(a, b, box), masked_ssim(a, bad_box, box));
}

TEST(BackgroundDrift, Examples) {
  const auto a = random_pixels(kShape, 16);
  const RegionMask m = centre_box(3, 20, 20);
  EXPECT_EQ(background_drift(a, a, m), std::vector<double>(3, 0.0));
  Video<double> b = a;
  for (auto& x : b.data()) x += 0.2;
  for (double d : background_drift(b, a, m)) EXPECT_NEAR(d, 0.2, 1e-12);
  Video<double> c = a;
  c.at(1, 0, 0, 0) += 1.0;
  const auto d = background_drift(c, a, m);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_GT(d[1], 0.0);
  EXPECT_EQ(d[2], 0.0);
  EXPECT_THROW(background_drift(a, a, RegionMask(3, 20, 20, 1)), InvalidArgument);
}

MetricsReport fake(const std::string& id, const std::string& cfg, double psnr,
                   bool exact, double ssim, std::vector<double> drift) {
  MetricsReport r;
  r.case_id = id;
  r.config = cfg;
  r.psnr_db = psnr;
  r.psnr_exact = exact;
  r.ssim = ssim;
  r.drift = std::move(drift);
  return r;
}

TEST(AssembleReport, SingleCaseRowEqualsMetrics) {
  const AblationTable t = assemble_report({fake("c", "base", 31.5, false, 0.9, {0.1, 0.3})});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].psnr_db, 31.5);
  EXPECT_EQ(t.rows[0].ssim, 0.9);
  EXPECT_EQ(t.rows[0].drift, 0.2);
  EXPECT_EQ(t.rows[0].final_drift, 0.3);
  EXPECT_FALSE(t.rows[0].psnr_exact);
}

TEST(AssembleReport, OrderInvariantAndSorted) {
  std::vector<MetricsReport> rs = {
      fake("c1", "refresh=on", 120, true, 1.0, {0, 0}),
      fake("c0", "refresh=off", 10.1, false, 0.3, {0.1, 0.7}),
      fake("c0", "refresh=on", 120, true, 1.0, {0, 0}),
      fake("c1", "refresh=off", 12.3, false, 0.4, {0.3, 0.9}),
  };
  const nlohmann::json a = to_json(assemble_report(rs));
  std::reverse(rs.begin(), rs.end());
  const AblationTable t = assemble_report(rs);
  EXPECT_EQ(to_json(t), a);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].config, "refresh=off");
  EXPECT_NEAR(t.rows[0].psnr_db, 11.2, 1e-12);
  EXPECT_NEAR(t.rows[0].final_drift, 0.8, 1e-12);
  EXPECT_TRUE(t.rows[1].psnr_exact);
  EXPECT_NE(format_table(t).find("refresh=on"), std::string::npos);
  EXPECT_THROW(assemble_report({}), InvalidArgument);
}

TEST(Evaluate, ReportFields) {
  const auto a = random_pixels(kShape, 17);
  const MetricsReport r = evaluate(a, a, centre_box(3, 20, 20), "case_000", "base");
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j.at("case"), "case_000");
  EXPECT_EQ(j.at("config"), "base");
  EXPECT_EQ(j.at("psnr_exact"), true);
  EXPECT_EQ(j.at("ssim"), 1.0);
  EXPECT_EQ(j.at("drift").size(), 3u);
}

}  // namespace
}  // namespace vidinsert
