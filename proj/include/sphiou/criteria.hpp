// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0
//
// Alternative IoU criteria for spherical boxes: the biased constructions used
// by earlier spherical detectors (ERP rectangles, circles, sampled tangent
// polygons, latitude/longitude zones) and two brute-force reference oracles
// (Monte Carlo sampling and per-pixel solid-angle integration).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "sphiou/sphere.hpp"

namespace sphiou {

/// Size of an equirectangular (ERP) raster: x covers theta in [0, 2pi),
/// y covers phi in [0, pi].
struct ErpImageSpec {
  int width = 0;
  int height = 0;

  /// Throws RangeError unless width, height >= 2.
  void validate() const;
  /// W == 2H, the usual panorama aspect.
  bool is_standard_aspect() const { return width == 2 * height; }
  bool operator==(const ErpImageSpec&) const = default;
};

/// Axis-aligned rectangle in continuous ERP pixel coordinates. The x-range is
/// [x0, x0 + w) taken modulo the image width, so it may wrap past the seam.
struct PixelRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x1() const { return x0 + w; }
  double y1() const { return y0 + h; }
  bool wraps(const ErpImageSpec& spec) const { return x1() > spec.width; }
  double area() const { return w * h; }
};

/// Solid angle of one pixel in row y: (cos(y pi/H) - cos((y+1) pi/H)) 2pi/W.
double pixel_weight(int y, const ErpImageSpec& spec);

/// Tight ERP bounding box of a spherical box in continuous pixel coordinates.
/// Boxes containing a pole span the full width and touch row 0 (or H).
PixelRect erp_bbox(const SphericalRect& rect, const ErpImageSpec& spec);

/// Smallest integer-aligned rectangle containing `r`.
PixelRect snap_outward(const PixelRect& r);

double iou_planar_rect(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec);
double iou_circle(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec);

/// Throws ProjectionOverflow when a tangent-plane sample is 90 degrees or more
/// away from the tangent point (alpha or beta equal to pi).
double iou_polygon_sampled(const SphericalRect& b1, const SphericalRect& b2, int n_points);

double iou_sph_zone(const SphericalRect& b1, const SphericalRect& b2);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n_both = 0;
  std::uint64_t n_either = 0;
};

/// Uniform sphere sampling (z ~ U[-1, 1], theta ~ U[0, 2pi)) driven by a
/// counter-based SplitMix64 stream, so a seed always reproduces the same
/// estimate. Throws ZeroUnion if no sample lands in either box.
MonteCarloEstimate iou_monte_carlo(const SphericalRect& b1, const SphericalRect& b2, std::uint64_t n_samples,
                                   std::uint64_t seed);

/// Fraction of the area of a single box estimated with the same sampler.
MonteCarloEstimate area_fraction_monte_carlo(const SphericalRect& b, std::uint64_t n_samples, std::uint64_t seed);

/// Pixel-center rasterization of both boxes on a W x H grid, each pixel
/// weighted by its solid angle.
double iou_pixel_integral(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec);

// Criterion selection ------------------------------------------------------

struct UnbiasedSpherical {};
struct PlanarRect {
  ErpImageSpec spec{8192, 4096};
};
struct Circle {
  ErpImageSpec spec{8192, 4096};
};
struct PolygonSampled {
  int n_points = 64;
};
struct SphZone {};
struct MonteCarlo {
  std::uint64_t n_samples = 1'000'000;
  std::uint64_t seed = 0;
};
struct PixelIntegral {
  ErpImageSpec spec{8192, 4096};
};

using CriterionId = std::variant<UnbiasedSpherical, PlanarRect, Circle, PolygonSampled, SphZone, MonteCarlo, PixelIntegral>;

/// Display name used in tables: Ours, Rectangle, Circle, Polygon, SphIoU, MonteCarlo, PixelIntegral.
std::string criterion_name(const CriterionId& id);

/// Parses "unbiased|ours", "planar|rectangle[:WxH]", "circle[:WxH]",
/// "polygon[:N]", "sphzone|sphiou", "montecarlo[:N[:SEED]]" and
/// "integral[:WxH]". Returns nullopt for unknown names.
std::optional<CriterionId> parse_criterion(const std::string& text);

/// True when the value changes with the raster resolution.
bool is_resolution_dependent(const CriterionId& id);

/// Same criterion with its raster resolution replaced by `spec` (no-op for
/// resolution-free criteria).
CriterionId with_resolution(const CriterionId& id, const ErpImageSpec& spec);

/// Evaluates a criterion. Failures that make a criterion undefined for the
/// input (ProjectionOverflow, ZeroUnion) yield NaN.
double evaluate_criterion(const CriterionId& id, const SphericalRect& b1, const SphericalRect& b2);

}  // namespace sphiou
