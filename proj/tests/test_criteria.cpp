// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sphiou/criteria.hpp"

namespace sphiou {
namespace {

using testing::frustum_contains;
using testing::RectSampler;

TEST(PixelWeight, Examples) {
  EXPECT_NEAR(pixel_weight(0, {4, 2}), kPi / 2, 1e-15);
  const ErpImageSpec spec{512, 256};
  double sum = 0.0;
  for (int y = 0; y < spec.height; ++y) sum += spec.width * pixel_weight(y, spec);
  EXPECT_NEAR(sum, 4 * kPi, 1e-9);
  for (int y = 0; y < spec.height / 2; ++y) {
    EXPECT_NEAR(pixel_weight(y, spec), pixel_weight(spec.height - 1 - y, spec), 1e-15);
    if (y > 0) EXPECT_GT(pixel_weight(y, spec), pixel_weight(y - 1, spec));
  }
}

TEST(ErpBbox, EquatorCenteredIsExact) {
  const ErpImageSpec spec{2048, 1024};
  const SphericalRect r(1.0, kPi / 2, 0.7, 0.4);
  const PixelRect b = erp_bbox(r, spec);
  EXPECT_NEAR(b.w, 0.7 * spec.width / kTwoPi, 1e-9);
  EXPECT_NEAR(b.h, 0.4 * spec.height / kPi, 1e-9);
  EXPECT_NEAR(b.x0, (1.0 - 0.35) * spec.width / kTwoPi, 1e-9);
  EXPECT_NEAR(b.y0, (kPi / 2 - 0.2) * spec.height / kPi, 1e-9);
}

TEST(ErpBbox, PoleInsideSpansFullWidth) {
  const ErpImageSpec spec{2048, 1024};
  const PixelRect b = erp_bbox({0.3, 0.2, 0.8, 0.8}, spec);
  EXPECT_EQ(b.y0, 0.0);
  EXPECT_EQ(b.x0, 0.0);
  EXPECT_EQ(b.w, spec.width);
}

// Occupied rows and the shortest circular column run covering the mask.
struct MaskExtent {
  int y_min = 1 << 30, y_max = -1;
  std::vector<bool> cols;
};

MaskExtent raster_mask(const SphericalRect& r, const ErpImageSpec& spec) {
  MaskExtent m;
  m.cols.assign(spec.width, false);
  for (int y = 0; y < spec.height; ++y) {
    const double phi = (y + 0.5) * kPi / spec.height;
    for (int x = 0; x < spec.width; ++x) {
      const double theta = (x + 0.5) * kTwoPi / spec.width;
      if (frustum_contains(r, testing::to_pt(theta, phi))) {
        m.y_min = std::min(m.y_min, y);
        m.y_max = std::max(m.y_max, y);
        m.cols[x] = true;
      }
    }
  }
  return m;
}

bool column_in(double x0, double x1, int x, int width) {
  // Pixel center inside [x0, x1) taken modulo width.
  const double c = x + 0.5;
  for (int k = -1; k <= 1; ++k) {
    const double cc = c + k * width;
    if (cc >= x0 && cc <= x1) return true;
  }
  return false;
}

TEST(ErpBbox, ContainsRasterMaskTightly) {
  const ErpImageSpec spec{2048, 1024};
  RectSampler s(71, 0.1, 2.5);
  for (int i = 0; i < 40; ++i) {
    const SphericalRect r = s.next();
    const PixelRect b = erp_bbox(r, spec);
    const MaskExtent m = raster_mask(r, spec);
    ASSERT_GE(m.y_max, 0);
    EXPECT_LE(b.y0, m.y_min + 0.5);
    EXPECT_GE(b.y1(), m.y_max + 0.5);
    bool all_in = true, shrunk_misses = false;
    for (int x = 0; x < spec.width; ++x) {
      if (!m.cols[x]) continue;
      all_in = all_in && column_in(b.x0, b.x1(), x, spec.width);
      shrunk_misses = shrunk_misses || !column_in(b.x0 + 2, b.x1() - 2, x, spec.width);
    }
    EXPECT_TRUE(all_in) << i;
    const bool full_width = b.w >= spec.width;
    if (!full_width) EXPECT_TRUE(shrunk_misses) << i;
    // Rows shrunk by 2 px lose some occupied row unless the box touches a pole.
    if (b.y0 > 0) EXPECT_GT(b.y0 + 2, m.y_min + 0.5);
    if (b.y1() < spec.height) EXPECT_LT(b.y1() - 2, m.y_max + 0.5);
  }
}

double planar_oracle(double ax0, double ax1, double ay0, double ay1, double bx0, double bx1, double by0, double by1) {
  const double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = ix * iy;
  return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter);
}

TEST(PlanarRect, IdenticalIsOne) {
  const SphericalRect b(6.2, 0.3, 0.9, 0.6);
  EXPECT_EQ(iou_planar_rect(b, b, {8192, 4096}), 1.0);
}

TEST(PlanarRect, EquatorPairsAreFovRectangles) {
  const ErpImageSpec spec{4096, 2048};
  const double sx = spec.width / kTwoPi, sy = spec.height / kPi;
  const SphericalRect a(1.0, kPi / 2, 0.6, 0.5), b(1.3, kPi / 2, 0.8, 0.3);
  auto px = [&](const SphericalRect& r, double* x0, double* x1, double* y0, double* y1) {
    *x0 = std::floor((r.theta() - r.alpha() / 2) * sx);
    *x1 = std::ceil((r.theta() + r.alpha() / 2) * sx);
    *y0 = std::floor((r.phi() - r.beta() / 2) * sy);
    *y1 = std::ceil((r.phi() + r.beta() / 2) * sy);
  };
  double a0, a1, a2, a3, b0, b1, b2, b3;
  px(a, &a0, &a1, &a2, &a3);
  px(b, &b0, &b1, &b2, &b3);
  EXPECT_NEAR(iou_planar_rect(a, b, spec), planar_oracle(a0, a1, a2, a3, b0, b1, b2, b3), 1e-12);
}

TEST(PlanarRect, SeamCrossingPairOverlaps) {
  const SphericalRect a(0.05, kPi / 2, 0.6, 0.5), b(kTwoPi - 0.05, kPi / 2, 0.6, 0.5);
  EXPECT_GT(iou_planar_rect(a, b, {4096, 2048}), 0.6);
  EXPECT_NEAR(iou_planar_rect(a, b, {4096, 2048}), iou_planar_rect(b, a, {4096, 2048}), 0.0);
}

TEST(PlanarRect, BiasedNearPole) {
  const SphericalRect a(0.0, 0.25, 0.6, 0.6), b(0.5, 0.3, 0.6, 0.6);
  EXPECT_GT(std::abs(iou_planar_rect(a, b, {8192, 4096}) - iou(a, b)), 0.05);
}

TEST(Circle, IdenticalAndSwappedAspect) {
  const ErpImageSpec spec{4096, 2048};
  const SphericalRect b(2.0, 0.9, 0.7, 0.4);
  EXPECT_EQ(iou_circle(b, b, spec), 1.0);
  // Center on a pixel corner and fovs that are whole pixel counts keep the
  // snapped boxes exactly w x h and h x w.
  const double px = kTwoPi / spec.width;
  const SphericalRect p(1024 * px, kPi / 2, 200 * px, 120 * px), q(1024 * px, kPi / 2, 120 * px, 200 * px);
  EXPECT_NEAR(iou_circle(p, q, spec), 1.0, 1e-12);
}

TEST(Circle, ConcentricSameAspect) {
  const ErpImageSpec spec{8192, 4096};
  const double px = kTwoPi / spec.width;
  // Whole-pixel fovs on a pixel-corner center: the snapped boxes are exact,
  // so the circle IoU is the squared diagonal ratio, which equals the
  // planar area ratio of two boxes with the same aspect.
  const SphericalRect a(2048 * px, kPi / 2, 120 * px, 80 * px), b(2048 * px, kPi / 2, 90 * px, 60 * px);
  EXPECT_NEAR(iou_circle(a, b, spec), 0.5625, 1e-12);
  EXPECT_NEAR(iou_circle(a, b, spec), iou_planar_rect(a, b, spec), 1e-12);
  EXPECT_NEAR(iou_circle(a, b, spec), iou(a, b), 0.01);
}

TEST(Circle, MatchesRasterizedCircles) {
  const ErpImageSpec spec{4096, 2048};
  RectSampler s(81, 0.2, 0.8);
  for (int i = 0; i < 5; ++i) {
    const SphericalRect a = s.next();
    const SphericalRect b = SphericalRect::wrapped(a.theta() + 0.3 * (s.uniform() - 0.5), std::clamp(a.phi() + 0.3 * (s.uniform() - 0.5), 0.0, kPi),
                                                   0.2 + 0.6 * s.uniform(), 0.2 + 0.6 * s.uniform());
    auto circle = [&](const SphericalRect& r) {
      const PixelRect bb = snap_outward(erp_bbox(r, spec));
      return std::array<double, 3>{r.theta() * spec.width / kTwoPi, r.phi() * spec.height / kPi, 0.5 * std::hypot(bb.w, bb.h)};
    };
    const auto ca = circle(a), cb = circle(b);
    // Put b's center at the copy closest to a's.
    double bx = cb[0];
    while (bx - ca[0] > spec.width / 2.0) bx -= spec.width;
    while (ca[0] - bx > spec.width / 2.0) bx += spec.width;
    const double step = 0.25;
    const double x_lo = std::min(ca[0] - ca[2], bx - cb[2]), x_hi = std::max(ca[0] + ca[2], bx + cb[2]);
    const double y_lo = std::min(ca[1] - ca[2], cb[1] - cb[2]), y_hi = std::max(ca[1] + ca[2], cb[1] + cb[2]);
    std::uint64_t both = 0, either = 0;
    for (double y = y_lo + step / 2; y < y_hi; y += step)
      for (double x = x_lo + step / 2; x < x_hi; x += step) {
        const bool ia = std::hypot(x - ca[0], y - ca[1]) <= ca[2];
        const bool ib = std::hypot(x - bx, y - cb[1]) <= cb[2];
        both += ia && ib;
        either += ia || ib;
      }
    EXPECT_NEAR(iou_circle(a, b, spec), static_cast<double>(both) / either, 1e-3);
  }
}

TEST(PolygonSampled, IdenticalIsOne) {
  const SphericalRect b(1.0, 0.3, 1.2, 0.8);
  EXPECT_EQ(iou_polygon_sampled(b, b, 64), 1.0);
  const SphericalRect seam(0.01, 1.5, 0.9, 0.8);
  EXPECT_EQ(iou_polygon_sampled(seam, seam, 64), 1.0);
  const SphericalRect pole(0.5, 0.1, 0.9, 0.8);
  EXPECT_EQ(iou_polygon_sampled(pole, pole, 64), 1.0);
}

TEST(PolygonSampled, ConvergesAsSamplesDouble) {
  const SphericalRect a(1.0, kPi / 2 + 0.1, 1.0, 0.8), b(1.4, kPi / 2 - 0.2, 0.9, 1.1);
  const double ref = iou_polygon_sampled(a, b, 4096);
  double prev_err = 1e9;
  for (int n = 16; n <= 256; n *= 2) {
    const double err = std::abs(iou_polygon_sampled(a, b, n) - ref);
    EXPECT_LT(err, prev_err) << n;
    prev_err = err;
  }
}

TEST(PolygonSampled, BiasedNearPole) {
  const SphericalRect a(0.0, 0.35, 0.8, 0.8), b(0.6, 0.4, 0.8, 0.8);
  EXPECT_GT(std::abs(iou_polygon_sampled(a, b, 64) - iou(a, b)), 0.03);
}

TEST(PolygonSampled, OverflowAndArguments) {
  const SphericalRect wide(0, 1, kPi, 0.5), b(0, 1, 0.5, 0.5);
  EXPECT_THROW(iou_polygon_sampled(wide, b, 64), ProjectionOverflow);
  EXPECT_TRUE(std::isnan(evaluate_criterion(PolygonSampled{64}, wide, b)));
  EXPECT_THROW(iou_polygon_sampled(b, b, 6), RangeError);
}

TEST(SphZone, IdenticalAndSmallBoxLimit) {
  const SphericalRect b(0.2, 2.0, 0.5, 0.7);
  EXPECT_EQ(iou_sph_zone(b, b), 1.0);
  // Shrinking beta alone leaves the sin(alpha/2) vs alpha mismatch in place,
  // so both fovs shrink together here.
  double prev = 1e9;
  for (double s : {0.8, 0.4, 0.2, 0.1, 0.05, 0.02}) {
    const SphericalRect p(1.0, kPi / 2, s, 0.5 * s), q(1.0, kPi / 2, 0.6 * s, 0.5 * s);
    const double gap = std::abs(iou_sph_zone(p, q) - iou(p, q));
    EXPECT_LE(gap, prev + 1e-12);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(SphZone, WrapsTheta) {
  const SphericalRect a(0.1, 1.0, 0.6, 0.5), b(kTwoPi - 0.1, 1.0, 0.6, 0.5);
  const double expected = 0.4 / 0.8;
  EXPECT_NEAR(iou_sph_zone(a, b), expected, 1e-12);
}

TEST(MonteCarlo, IdentityHemisphereAndDeterminism) {
  const SphericalRect b(0.4, 1.0, 0.9, 0.6);
  EXPECT_EQ(iou_monte_carlo(b, b, 1'000'000, 3).estimate, 1.0);
  const auto half = area_fraction_monte_carlo({0, 1.1, kPi, kPi}, 1'000'000, 4);
  EXPECT_LE(std::abs(half.estimate - 0.5), 3 * half.std_error);
  const SphericalRect c(0.7, 1.2, 0.8, 0.5);
  const auto r1 = iou_monte_carlo(b, c, 200'000, 42);
  const auto r2 = iou_monte_carlo(b, c, 200'000, 42);
  EXPECT_EQ(r1.estimate, r2.estimate);
  EXPECT_EQ(r1.n_both, r2.n_both);
  EXPECT_NE(iou_monte_carlo(b, c, 200'000, 43).n_both, r1.n_both);
}

TEST(MonteCarlo, AgreesWithAnalytical) {
  RectSampler s(91, 0.3, 2.0);
  int within = 0;
  for (int i = 0; i < 20; ++i) {
    const SphericalRect a = s.next();
    const SphericalRect b = SphericalRect::wrapped(a.theta() + 0.6 * (s.uniform() - 0.5), std::clamp(a.phi() + 0.6 * (s.uniform() - 0.5), 0.0, kPi),
                                                   0.3 + 1.7 * s.uniform(), 0.3 + 1.7 * s.uniform());
    const auto mc = iou_monte_carlo(a, b, 1'000'000, i);
    within += std::abs(mc.estimate - iou(a, b)) <= 3 * mc.std_error + 1e-12;
  }
  EXPECT_GE(within, 19);
}

TEST(MonteCarlo, ZeroUnion) {
  const SphericalRect tiny(0.1, 1.0, 1e-5, 1e-5);
  EXPECT_THROW(iou_monte_carlo(tiny, tiny, 1000, 0), ZeroUnion);
  EXPECT_TRUE(std::isnan(evaluate_criterion(MonteCarlo{1000, 0}, tiny, tiny)));
}

TEST(PixelIntegral, IdentityAndConvergence) {
  const SphericalRect b(0.4, 1.0, 0.9, 0.6);
  EXPECT_EQ(iou_pixel_integral(b, b, {1024, 512}), 1.0);
  const SphericalRect a(2.0, 1.1, 1.1, 0.7), c(2.3, 1.3, 0.8, 0.9);
  const double exact = iou(a, c);
  const double at8 = iou_pixel_integral(a, c, {8192, 4096});
  EXPECT_NEAR(at8, exact, 2e-3);
  const double at12 = iou_pixel_integral(a, c, {12288, 6144});
  EXPECT_NEAR(at12, exact, 2e-3);
}

TEST(PixelIntegral, SeamAndPoleBoxes) {
  const ErpImageSpec spec{4096, 2048};
  for (const auto& [a, b] : std::vector<std::pair<SphericalRect, SphericalRect>>{
           {{0.05, 1.5, 0.8, 0.6}, {6.1, 1.6, 0.7, 0.9}},
           {{0.3, 0.1, 1.0, 0.9}, {2.0, 0.2, 1.2, 0.8}},
           {{1.0, kPi, 2.0, 1.5}, {1.5, 2.9, 1.0, 1.0}}}) {
    EXPECT_NEAR(iou_pixel_integral(a, b, spec), iou(a, b), 3e-3);
  }
}

TEST(Criteria, RangeSymmetryIdentity) {
  RectSampler s(101, 0.1, 1.5);
  const std::vector<CriterionId> all{UnbiasedSpherical{}, PlanarRect{{2048, 1024}}, Circle{{2048, 1024}},
                                     PolygonSampled{32}, SphZone{}, PixelIntegral{{1024, 512}}};
  for (int i = 0; i < 30; ++i) {
    const SphericalRect a = s.next();
    const SphericalRect b = SphericalRect::wrapped(a.theta() + 0.8 * (s.uniform() - 0.5), std::clamp(a.phi() + 0.8 * (s.uniform() - 0.5), 0.0, kPi),
                                                   0.1 + 1.4 * s.uniform(), 0.1 + 1.4 * s.uniform());
    for (const auto& c : all) {
      const double ab = evaluate_criterion(c, a, b), ba = evaluate_criterion(c, b, a);
      if (std::isnan(ab)) continue;
      EXPECT_GE(ab, 0.0) << criterion_name(c);
      EXPECT_LE(ab, 1.0) << criterion_name(c);
      EXPECT_NEAR(ab, ba, 1e-9) << criterion_name(c);
      const double aa = evaluate_criterion(c, a, a);
      if (std::holds_alternative<PolygonSampled>(c))
        EXPECT_NEAR(aa, 1.0, 1e-6);
      else
        EXPECT_EQ(aa, 1.0) << criterion_name(c);
    }
  }
}

TEST(Criteria, AgreeNearEquatorDisagreeNearPole) {
  RectSampler s(102, 0.1, 0.5);
  const ErpImageSpec spec{8192, 4096};
  // Circle is left out: a circle keeps only the box diagonal, so it departs
  // from every area-based IoU whenever the aspect ratios differ. It is
  // checked on concentric boxes of equal aspect in Circle.ConcentricSameAspect.
  const std::vector<CriterionId> all{PlanarRect{spec}, PolygonSampled{64}, SphZone{}};
  std::vector<double> polar_gap(2, 0.0);
  constexpr int kPairs = 50;
  for (int i = 0; i < kPairs; ++i) {
    const double phi = kPi / 2 + 0.4 * (s.uniform() - 0.5);
    const SphericalRect a(wrap_theta(kTwoPi * s.uniform()), phi, 0.1 + 0.3 * s.uniform(), 0.1 + 0.3 * s.uniform());
    const SphericalRect b = SphericalRect::wrapped(a.theta() + 0.1 * (s.uniform() - 0.5), std::clamp(phi + 0.1 * (s.uniform() - 0.5), kPi / 2 - 0.2, kPi / 2 + 0.2),
                                                   a.alpha() * (0.8 + 0.4 * s.uniform()), a.beta() * (0.8 + 0.4 * s.uniform()));
    const double ref = iou(a, b);
    for (const auto& c : all) EXPECT_NEAR(evaluate_criterion(c, a, b), ref, 0.05) << criterion_name(c) << " pair " << i;

    const double pphi = 0.3 * s.uniform();
    const SphericalRect p(wrap_theta(kTwoPi * s.uniform()), pphi, 0.3 + 0.5 * s.uniform(), 0.3 + 0.5 * s.uniform());
    const SphericalRect q = SphericalRect::wrapped(p.theta() + 0.5 * (s.uniform() - 0.5), std::clamp(pphi + 0.2 * (s.uniform() - 0.5), 0.0, kPi),
                                                   p.alpha() * (0.8 + 0.4 * s.uniform()), p.beta() * (0.8 + 0.4 * s.uniform()));
    const double pref = iou(p, q);
    polar_gap[0] += std::abs(iou_planar_rect(p, q, spec) - pref) / kPairs;
    polar_gap[1] += std::abs(iou_sph_zone(p, q) - pref) / kPairs;
  }
  EXPECT_GT(polar_gap[0], 0.05);
  EXPECT_GT(polar_gap[1], 0.05);
}

TEST(Criteria, ParseAndNames) {
  EXPECT_TRUE(std::holds_alternative<UnbiasedSpherical>(*parse_criterion("ours")));
  EXPECT_TRUE(std::holds_alternative<UnbiasedSpherical>(*parse_criterion("unbiased")));
  const auto planar = parse_criterion("planar:1024x512");
  ASSERT_TRUE(planar);
  EXPECT_EQ(std::get<PlanarRect>(*planar).spec, (ErpImageSpec{1024, 512}));
  EXPECT_EQ(std::get<PolygonSampled>(*parse_criterion("polygon:128")).n_points, 128);
  const auto mc = std::get<MonteCarlo>(*parse_criterion("MonteCarlo:5000:9"));
  EXPECT_EQ(mc.n_samples, 5000u);
  EXPECT_EQ(mc.seed, 9u);
  EXPECT_FALSE(parse_criterion("polygon:6"));
  EXPECT_FALSE(parse_criterion("planar:12"));
  EXPECT_FALSE(parse_criterion("bogus"));
  EXPECT_EQ(criterion_name(SphZone{}), "SphIoU");
  EXPECT_TRUE(is_resolution_dependent(PixelIntegral{}));
  EXPECT_FALSE(is_resolution_dependent(SphZone{}));
  EXPECT_EQ(std::get<Circle>(with_resolution(Circle{}, {100, 50})).spec, (ErpImageSpec{100, 50}));
}

}  // namespace
}  // namespace sphiou
