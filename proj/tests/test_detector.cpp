// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "sphiou/detector.hpp"

namespace sphiou {
namespace {

using testing::RectSampler;

TEST(GtOffset, Examples) {
  const ErpImageSpec spec{256, 128};
  const double step = kTwoPi / 256;
  GtCell c = gt_offset(10.5 * step, 1.0, spec);
  EXPECT_EQ(c.x, 10);
  EXPECT_NEAR(c.dtheta, kPi / 256, 1e-15);
  c = gt_offset(12 * step, 32 * kPi / 128, spec);
  EXPECT_EQ(c.x, 12);
  EXPECT_EQ(c.y, 32);
  EXPECT_EQ(c.dtheta, 0.0);
  EXPECT_EQ(c.dphi, 0.0);
  c = gt_offset(0.3, kPi, spec);
  EXPECT_EQ(c.y, 127);
  EXPECT_LT(c.dphi, kPi / 128);
  EXPECT_GE(c.dphi, 0.0);
}

TEST(GtOffset, ReconstructsInput) {
  const ErpImageSpec spec{200, 100};
  RectSampler s(201, 0.1, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const SphericalRect r = s.next();
    const GtCell c = gt_offset(r.theta(), r.phi(), spec);
    EXPECT_NEAR(c.x * kTwoPi / spec.width + c.dtheta, r.theta(), 1e-12);
    EXPECT_NEAR(c.y * kPi / spec.height + c.dphi, r.phi(), 1e-12);
    EXPECT_GE(c.dtheta, 0.0);
    EXPECT_LT(c.dtheta, kTwoPi / spec.width);
    EXPECT_GE(c.dphi, 0.0);
    EXPECT_LT(c.dphi, kPi / spec.height);
  }
}

TEST(Radius, TEqualsOneGivesZero) {
  for (double a : {0.3, kPi / 2, 2.0})
    for (double b : {0.3, 1.0, kPi / 2}) {
      const RadiusBreakdown r = radius(a, b, 1.0);
      EXPECT_NEAR(r.gamma_a, 0.0, 1e-9);
      EXPECT_NEAR(r.gamma_b, 0.0, 1e-9);
      EXPECT_NEAR(r.gamma, 0.0, 1e-9);
    }
}

TEST(Radius, CaseAMatchesBisection) {
  const RadiusBreakdown r = radius(0.5, 0.5, 0.7);
  EXPECT_TRUE(r.valid_a);
  EXPECT_NEAR(r.gamma_a, testing::bisect_grown(0.5, 0.5, 0.7), 1e-6);
  EXPECT_NEAR(iou(SphericalRect(0, kPi / 2, 0.5, 0.5), SphericalRect(0, kPi / 2, 0.5 + 2 * r.gamma_a, 0.5 + 2 * r.gamma_a)),
              0.7, 1e-6);
  EXPECT_NEAR(r.gamma_b, testing::bisect_shrunk(0.5, 0.5, 0.7), 1e-6);
}

TEST(Radius, CaseCAsPrinted) {
  // The closed form is negative for moderate boxes and is then left out.
  const RadiusBreakdown r = radius(0.5, 0.5, 0.7);
  EXPECT_LT(r.gamma_c, 0.0);
  EXPECT_FALSE(r.valid_c);
  EXPECT_NEAR(radius(kPi / 2, kPi / 2, 1.0).gamma_c, -0.82, 0.01);
}

TEST(Radius, FinalIsMinimumOfValid) {
  for (double a = 0.2; a <= 1.5 + 1e-9; a += 0.1)
    for (double b = 0.2; b <= 1.5 + 1e-9; b += 0.1) {
      const RadiusBreakdown r = radius(a, b, 0.7);
      EXPECT_FALSE(r.bisection_fallback);
      if (r.valid_a) EXPECT_LE(r.gamma, r.gamma_a);
      if (r.valid_b) EXPECT_LE(r.gamma, r.gamma_b);
      if (r.valid_c) EXPECT_LE(r.gamma, r.gamma_c);
      EXPECT_GE(r.gamma, 0.0);
      // Every box grown by less than the radius keeps IoU >= t.
      for (double f : {0.25, 0.5, 1.0}) {
        const double g = f * r.gamma;
        EXPECT_GE(iou(SphericalRect(0, kPi / 2, a, b), SphericalRect(0, kPi / 2, a + 2 * g, b + 2 * g)), 0.7 - 1e-9);
      }
    }
}

TEST(Radius, RejectsBadInput) {
  EXPECT_THROW(radius(0.0, 1.0, 0.7), RangeError);
  EXPECT_THROW(radius(1.0, 1.0, 0.0), RangeError);
  EXPECT_THROW(radius(1.0, 1.0, 1.5), RangeError);
}

TEST(HeatmapValue, Examples) {
  EXPECT_EQ(heatmap_value({1.0, 1.0}, {1.0, 1.0}, 0.3), 1.0);
  EXPECT_NEAR(heatmap_value({0.0, kPi / 2}, {kPi, kPi / 2}, 1.0), std::exp(-kPi / 2), 1e-12);
  EXPECT_NEAR(heatmap_value({0.0, kPi / 2}, {kPi, kPi / 2}, 1.0, HeatmapMode::kGaussian), std::exp(-kPi * kPi / 2), 1e-12);
  double prev = 2.0;
  for (double d = 0.0; d < 3.0; d += 0.1) {
    const double v = heatmap_value({0.0, kPi / 2}, {d, kPi / 2}, 0.4);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_THROW(heatmap_value({0, 0}, {0, 0}, 0.0), RangeError);
}

std::size_t count_ones(const HeatmapTensor& t, int c) {
  std::size_t n = 0;
  for (int y = 0; y < t.spec.height; ++y)
    for (int x = 0; x < t.spec.width; ++x) n += t.score(c, x, y) == 1.0;
  return n;
}

TEST(RenderGt, SingleAndDuplicateAnnotations) {
  const ErpImageSpec spec{256, 128};
  const GtAnnotation a{1, SphericalRect(2.0, 1.2, 0.6, 0.4)};
  const HeatmapTensor one = render_gt({a}, spec, 3);
  EXPECT_EQ(count_ones(one, 1), 1u);
  EXPECT_EQ(count_ones(one, 0), 0u);
  const GtCell c = gt_offset(2.0, 1.2, spec);
  EXPECT_EQ(one.score(1, c.x, c.y), 1.0);
  EXPECT_EQ(one.offset(0, c.x, c.y), c.dtheta);
  EXPECT_EQ(one.fov(1, c.x, c.y), 0.4);
  EXPECT_EQ(render_gt({a, a}, spec, 3), one);
  EXPECT_THROW(render_gt({GtAnnotation{3, a.bbox}}, spec, 3), RangeError);
}

TEST(RenderGt, SplatMatchesGeodesicBruteForce) {
  const ErpImageSpec spec{256, 128};
  const SphericalRect b(0.01, 1.3, 1.2, 1.0);
  const HeatmapTensor t = render_gt({GtAnnotation{0, b}}, spec, 1);
  const double gamma = radius(1.2, 1.0, 0.7).gamma;
  const double sigma = gamma / 3;
  const testing::Pt c = testing::to_pt(b.theta(), b.phi());
  const GtCell pos = gt_offset(b.theta(), b.phi(), spec);
  bool touched_last_column = false;
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const testing::Pt p = testing::to_pt(x * kTwoPi / spec.width, y * kPi / spec.height);
      const double d = std::atan2(std::hypot(c.y * p.z - c.z * p.y, c.z * p.x - c.x * p.z, c.x * p.y - c.y * p.x),
                                  c.x * p.x + c.y * p.y + c.z * p.z);
      double expected = d <= gamma ? std::exp(-d / (2 * sigma * sigma)) : 0.0;
      if (x == pos.x && y == pos.y) expected = 1.0;
      EXPECT_NEAR(t.score(0, x, y), expected, 1e-12) << x << "," << y;
      if (x == spec.width - 1 && expected > 0) touched_last_column = true;
    }
  EXPECT_TRUE(touched_last_column);
}

HeatmapTensor roll_columns(const HeatmapTensor& t, int k) {
  HeatmapTensor out = t;
  const int w = t.spec.width;
  for (int c = 0; c < t.num_classes; ++c)
    for (int y = 0; y < t.spec.height; ++y)
      for (int x = 0; x < w; ++x) out.score(c, (x + k) % w, y) = t.score(c, x, y);
  for (int p = 0; p < 2; ++p)
    for (int y = 0; y < t.spec.height; ++y)
      for (int x = 0; x < w; ++x) {
        out.offset(p, (x + k) % w, y) = t.offset(p, x, y);
        out.fov(p, (x + k) % w, y) = t.fov(p, x, y);
      }
  return out;
}

TEST(FocalLoss, PerfectPredictionIsZero) {
  const ErpImageSpec spec{64, 32};
  const HeatmapTensor gt = render_gt({GtAnnotation{0, SphericalRect(1.0, 1.0, 0.5, 0.5)}}, spec, 2);
  EXPECT_NEAR(focal_loss(gt, gt), 0.0, 1e-20);
  HeatmapTensor empty(spec, 2);
  EXPECT_THROW(focal_loss(empty, empty), EmptyGt);
}

TEST(FocalLoss, HandComputedGrid) {
  // 4 x 2 x 1 grid with one positive; each term written out by hand.
  const ErpImageSpec spec{4, 2};
  HeatmapTensor gt(spec, 1), pred(spec, 1);
  const double g[2][4] = {{1.0, 0.5, 0.0, 0.2}, {0.0, 0.9, 0.3, 0.0}};
  const double p[2][4] = {{0.8, 0.3, 0.1, 0.05}, {0.2, 0.6, 0.0, 1.0}};
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) {
      gt.score(0, x, y) = g[y][x];
      pred.score(0, x, y) = p[y][x];
    }
  // Both rows of a 4 x 2 ERP grid weigh pi / 2.
  const double w = kPi / 2;
  double sum = 0.0;
  sum += w * (0.2 * 0.2 * std::log(0.8));
  sum += w * (std::pow(0.5, 4) * 0.09 * std::log(0.7));
  sum += w * (1.0 * 0.01 * std::log(0.9));
  sum += w * (std::pow(0.8, 4) * 0.0025 * std::log(0.95));
  sum += w * (1.0 * 0.04 * std::log(0.8));
  sum += w * (std::pow(0.1, 4) * 0.36 * std::log(0.4));
  sum += w * (std::pow(0.7, 4) * 1e-24 * std::log(1 - 1e-12));
  const double p_hi = 1 - 1e-12;  // clamped 1.0
  sum += w * (1.0 * p_hi * p_hi * std::log(1 - p_hi));
  EXPECT_NEAR(focal_loss(pred, gt), -sum, 1e-12);
}

TEST(FocalLoss, EquatorRowsWeighMore) {
  const ErpImageSpec spec{8, 8};
  HeatmapTensor gt(spec, 1), polar(spec, 1), equator(spec, 1);
  gt.score(0, 0, 4) = 1.0;
  polar.score(0, 0, 4) = 1.0;
  equator.score(0, 0, 4) = 1.0;
  polar.score(0, 3, 0) = 0.5;
  equator.score(0, 3, 3) = 0.5;
  EXPECT_GT(focal_loss(equator, gt), focal_loss(polar, gt));
}

TEST(OffsetLoss, ZeroForExactAndBruteForce) {
  const ErpImageSpec spec{128, 64};
  const std::vector<GtAnnotation> gts{{0, SphericalRect(1.0, 0.4, 0.5, 0.5)}, {0, SphericalRect(4.0, 2.2, 0.3, 0.6)}};
  HeatmapTensor t = render_gt(gts, spec, 1);
  EXPECT_EQ(offset_loss(t, gts), 0.0);
  double expected = 0.0;
  for (const auto& g : gts) {
    const GtCell c = gt_offset(g.bbox.theta(), g.bbox.phi(), spec);
    t.offset(0, c.x, c.y) += 0.01;
    t.offset(1, c.x, c.y) -= 0.02;
    const double ct = c.x * kTwoPi / spec.width, cp = c.y * kPi / spec.height;
    const testing::Pt a = testing::to_pt(ct + c.dtheta + 0.01, cp + c.dphi - 0.02);
    const testing::Pt b = testing::to_pt(g.bbox.theta(), g.bbox.phi());
    const double cr = std::hypot(a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x);
    expected += std::atan2(cr, a.x * b.x + a.y * b.y + a.z * b.z) / 2;
  }
  EXPECT_NEAR(offset_loss(t, gts), expected, 1e-12);
}

TEST(OffsetLoss, ThetaErrorsShrinkNearPoles) {
  const ErpImageSpec spec{128, 64};
  auto loss_at = [&](double phi) {
    const std::vector<GtAnnotation> gts{{0, SphericalRect(1.0, phi, 0.5, 0.5)}};
    HeatmapTensor t = render_gt(gts, spec, 1);
    const GtCell c = gt_offset(1.0, phi, spec);
    t.offset(0, c.x, c.y) += 0.05;
    return offset_loss(t, gts);
  };
  EXPECT_LT(loss_at(0.2), loss_at(kPi / 2));
}

TEST(FovLoss, Examples) {
  const ErpImageSpec spec{64, 32};
  const std::vector<GtAnnotation> gts{{0, SphericalRect(1.0, 1.0, 0.5, 0.4)}};
  HeatmapTensor t = render_gt(gts, spec, 1);
  EXPECT_EQ(fov_loss(t, gts), 0.0);
  const GtCell c = gt_offset(1.0, 1.0, spec);
  t.fov(0, c.x, c.y) += 0.1;
  EXPECT_NEAR(fov_loss(t, gts), 0.1, 1e-15);
  t.fov(0, c.x, c.y) -= 0.1;
  t.fov(1, c.x, c.y) -= 0.1;
  EXPECT_NEAR(fov_loss(t, gts), 0.1, 1e-15);
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(0, 0, 0, {}), 0.0);
  EXPECT_EQ(total_loss(1, 1, 1, {60, 10, 0.7}), 71.0);
  EXPECT_NEAR(total_loss(1, 1, 1, {1, 0.1, 0.7}), 2.1, 1e-15);
}

TEST(Losses, SeamShiftInvariance) {
  const ErpImageSpec spec{128, 64};
  RectSampler s(211, 0.2, 0.8);
  std::vector<GtAnnotation> gts;
  for (int i = 0; i < 4; ++i) gts.push_back({i % 2, s.next()});
  const HeatmapTensor gt = render_gt(gts, spec, 2);
  HeatmapTensor pred = gt;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : pred.scores) v = std::clamp(0.7 * v + 0.2 * u(rng), 0.0, 1.0);
  for (auto& v : pred.offsets) v += 0.01 * (u(rng) - 0.5);
  for (auto& v : pred.fovs) v += 0.05 * (u(rng) - 0.5);
  const double cls = focal_loss(pred, gt), off = offset_loss(pred, gts), fov = fov_loss(pred, gts);
  EXPECT_GT(cls, 0.0);
  EXPECT_GT(off, 0.0);
  EXPECT_GT(fov, 0.0);
  for (int k : {1, 17, 64, 127}) {
    std::vector<GtAnnotation> shifted;
    for (const auto& g : gts)
      shifted.push_back({g.class_id, SphericalRect::wrapped(g.bbox.theta() + k * kTwoPi / spec.width, g.bbox.phi(),
                                                            g.bbox.alpha(), g.bbox.beta())});
    const HeatmapTensor gt2 = roll_columns(gt, k), pred2 = roll_columns(pred, k);
    EXPECT_NEAR(focal_loss(pred2, gt2), cls, 1e-9);
    EXPECT_NEAR(offset_loss(pred2, shifted), off, 1e-9);
    EXPECT_NEAR(fov_loss(pred2, shifted), fov, 1e-9);
  }
}

TEST(Decode, Examples) {
  const ErpImageSpec spec{256, 128};
  HeatmapTensor t(spec, 1);
  EXPECT_TRUE(decode(t).empty());
  t.score(0, 64, 32) = 0.9;
  t.fov(0, 64, 32) = 0.3;
  t.fov(1, 64, 32) = 0.2;
  const auto d = decode(t);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].bbox.theta(), kPi / 2, 1e-15);
  EXPECT_NEAR(d[0].bbox.phi(), kPi / 4, 1e-15);
  EXPECT_EQ(d[0].bbox.alpha(), 0.3);
}

TEST(Decode, WrapsAndKeepsTopK) {
  const ErpImageSpec spec{32, 16};
  HeatmapTensor t(spec, 2);
  t.score(0, 0, 5) = 0.5;
  t.score(0, 31, 5) = 0.6;  // neighbour of column 0 across the seam
  t.score(1, 10, 10) = 0.9;
  t.score(1, 20, 0) = 0.4;  // top row, clipped neighbourhood
  const auto d = decode(t);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].score, 0.9);
  EXPECT_EQ(d[1].x, 31);
  EXPECT_EQ(d[2].y, 0);
  EXPECT_EQ(decode(t, 2).size(), 2u);
}

TEST(Decode, RoundTripsRenderedScenes) {
  const ErpImageSpec spec{256, 128};
  RectSampler s(221, 0.1, 1.2);
  for (int i = 0; i < 50; ++i) {
    const GtAnnotation a{i % 3, s.next()};
    const auto d = decode(render_gt({a}, spec, 3));
    ASSERT_FALSE(d.empty());
    EXPECT_EQ(d[0].class_id, a.class_id);
    EXPECT_EQ(d[0].bbox.alpha(), a.bbox.alpha());
    EXPECT_EQ(d[0].bbox.beta(), a.bbox.beta());
    EXPECT_LE(angle_between(sph_to_vec(d[0].bbox.theta(), d[0].bbox.phi()), sph_to_vec(a.bbox.theta(), a.bbox.phi())),
              kPi / spec.height);
  }
}

TEST(PlanarToSpherical, EquatorCenteredIsExact) {
  const ErpImageSpec spec{2048, 1024};
  const auto c = planar_to_spherical({100, 412, 200, 200}, spec);
  EXPECT_NEAR(c.rect.theta(), 200 * kTwoPi / 2048, 1e-12);
  EXPECT_NEAR(c.rect.phi(), kPi / 2, 1e-12);
  EXPECT_NEAR(c.rect.alpha(), 200 * kTwoPi / 2048, 1e-12);
  EXPECT_NEAR(c.rect.beta(), 200 * kPi / 1024, 1e-12);
  EXPECT_FALSE(c.fov_clamped);
  EXPECT_FALSE(c.pole_touching);
  const PixelRect back = erp_bbox(c.rect, spec);
  EXPECT_NEAR(back.x0, 100, 1e-9);
  EXPECT_NEAR(back.w, 200, 1e-9);
  EXPECT_NEAR(back.y0, 412, 1e-9);
  EXPECT_NEAR(back.h, 200, 1e-9);
}

TEST(PlanarToSpherical, FullWidthAndPoleFlags) {
  const ErpImageSpec spec{2048, 1024};
  const auto band = planar_to_spherical({0, 400, 2048, 200}, spec);
  EXPECT_TRUE(band.fov_clamped);
  EXPECT_EQ(band.rect.alpha(), kPi);
  const auto top = planar_to_spherical({500, 0, 100, 50}, spec);
  EXPECT_TRUE(top.pole_touching);
  EXPECT_THROW(planar_to_spherical({0, 0, 0, 10}, spec), DegenerateRect);
}

TEST(PlanarToSpherical, RoundTripQuality) {
  // Threshold 0.8; measured minimum over this domain is above 0.999.
  const ErpImageSpec spec{2048, 1024};
  RectSampler s(231, 0.05, 1.0);
  double worst = 1.0;
  for (int i = 0; i < 500; ++i) {
    const SphericalRect tmp = s.next();
    const SphericalRect b(tmp.theta(), kPi / 2 + (s.uniform() - 0.5), tmp.alpha(), tmp.beta());
    const PixelRect px = erp_bbox(b, spec);
    const auto c = planar_to_spherical(px, spec);
    worst = std::min(worst, iou(c.rect, b));
    const PixelRect back = erp_bbox(c.rect, spec);
    // erp_bbox of the result covers the input within one pixel.
    EXPECT_LE(back.y0, px.y0 + 1);
    EXPECT_GE(back.y1(), px.y1() - 1);
    EXPECT_GE(back.w, px.w - 2);
  }
  EXPECT_GE(worst, 0.8);
}

TEST(Sphm, RoundTripAndErrors) {
  const ErpImageSpec spec{16, 8};
  HeatmapTensor t = render_gt({GtAnnotation{1, SphericalRect(1.0, 1.0, 0.9, 0.9)}}, spec, 2,
                              {}, {1.0 / 3.0, HeatmapMode::kGaussian});
  std::stringstream ss;
  write_sphm(t, ss);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 20u + 8u * 16 * 8 * (2 + 2 + 2));
  EXPECT_EQ(bytes.substr(0, 4), "SPHM");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 16);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1);
  std::stringstream in(bytes);
  EXPECT_EQ(read_sphm(in), t);
  std::stringstream bad("SPHX");
  EXPECT_THROW(read_sphm(bad), Error);
  std::stringstream truncated(bytes.substr(0, 100));
  EXPECT_THROW(read_sphm(truncated), Error);
}

}  // namespace
}  // namespace sphiou
