// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0
//
// Supervision and decoding math for a center-point detector on ERP heatmaps:
// ground-truth offsets and radii, heatmap rendering, losses, peak decoding
// and conversion of ERP pixel boxes to spherical boxes.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "sphiou/criteria.hpp"
#include "sphiou/sphere.hpp"

namespace sphiou {

/// How heatmap_value turns a geodesic distance d into a score.
enum class HeatmapMode : std::uint32_t {
  kLinearExponent = 0,  // exp(-d / (2 sigma^2))
  kGaussian = 1,        // exp(-d^2 / (2 sigma^2))
};

/// Dense W x H x C score grid plus 2-channel offset and fov grids.
///
/// Storage is planar: scores[(c * H + y) * W + x], and likewise for the two
/// offset planes (dtheta, dphi) and the two fov planes (alpha, beta). Cell
/// (x, y) stands for the direction (2 pi x / W, pi y / H).
struct HeatmapTensor {
  ErpImageSpec spec;
  int num_classes = 0;
  HeatmapMode mode = HeatmapMode::kLinearExponent;
  std::vector<double> scores;
  std::vector<double> offsets;
  std::vector<double> fovs;

  HeatmapTensor() = default;
  HeatmapTensor(const ErpImageSpec& spec, int num_classes);

  std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * spec.height + y) * spec.width + x;
  }
  double& score(int c, int x, int y) { return scores[index(c, x, y)]; }
  double score(int c, int x, int y) const { return scores[index(c, x, y)]; }
  double& offset(int k, int x, int y) { return offsets[index(k, x, y)]; }
  double offset(int k, int x, int y) const { return offsets[index(k, x, y)]; }
  double& fov(int k, int x, int y) { return fovs[index(k, x, y)]; }
  double fov(int k, int x, int y) const { return fovs[index(k, x, y)]; }

  /// Throws RangeError when plane sizes disagree with spec and num_classes.
  void validate() const;
  bool operator==(const HeatmapTensor&) const = default;
};

struct GtAnnotation {
  int class_id = 0;
  SphericalRect bbox{0, kPi / 2, 1, 1};
};

struct LossWeights {
  double lambda_off = 60.0;
  double lambda_fov = 10.0;
  /// IoU a shifted box must keep with the ground truth when choosing the radius.
  double iou_threshold = 0.7;
};

struct GtCell {
  int x = 0;
  int y = 0;
  double dtheta = 0.0;
  double dphi = 0.0;
};

/// Heatmap cell holding the center and the residual angle to it:
/// x = floor(theta W / 2pi), y = floor(phi H / pi). phi = pi lands on the
/// last row with dphi just below pi / H.
GtCell gt_offset(double theta, double phi, const ErpImageSpec& spec);

struct RadiusBreakdown {
  /// Raw closed-form values; NaN when the formula has no real value.
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double gamma_c = 0.0;
  bool valid_a = false;
  bool valid_b = false;
  bool valid_c = false;
  /// Final radius, max(0, min of the valid candidates).
  double gamma = 0.0;
  /// Set when no candidate was valid and gamma came from bisection.
  bool bisection_fallback = false;
};

/// Heatmap radius for a ground-truth box with fovs (alpha, beta).
///
/// Case a grows both fovs by 2 gamma, case b shrinks them by 2 gamma; each is
/// checked by recomputing the IoU of the concentric pair with iou(), within
/// 1e-6 of t. Case c has no checkable relation and is accepted when it is
/// finite and non-negative.
RadiusBreakdown radius(double alpha, double beta, double t);

/// Heatmap score at `loc` for an object centered at `center`.
double heatmap_value(std::pair<double, double> center, std::pair<double, double> loc, double sigma,
                     HeatmapMode mode = HeatmapMode::kLinearExponent);

struct RenderOptions {
  /// sigma = gamma * sigma_scale.
  double sigma_scale = 1.0 / 3.0;
  HeatmapMode mode = HeatmapMode::kLinearExponent;
};

/// Ground-truth tensor: score 1 at each object's cell, heatmap_value splats
/// within the radius (combined by max), offsets and fovs at the object cells.
HeatmapTensor render_gt(const std::vector<GtAnnotation>& annotations, const ErpImageSpec& spec, int num_classes,
                        const LossWeights& weights = {}, const RenderOptions& options = {});

/// Pixel-weighted focal loss between predicted and ground-truth scores.
/// Throws EmptyGt when no ground-truth score equals 1.
double focal_loss(const HeatmapTensor& pred, const HeatmapTensor& gt);

/// Mean angle between the predicted and true centers at each object's cell.
double offset_loss(const HeatmapTensor& pred, const std::vector<GtAnnotation>& gts);

/// Mean L1 fov error at each object's cell.
double fov_loss(const HeatmapTensor& pred, const std::vector<GtAnnotation>& gts);

double total_loss(double cls, double off, double fov, const LossWeights& weights);

struct Detection {
  int class_id = 0;
  double score = 0.0;
  SphericalRect bbox{0, kPi / 2, 1, 1};
  int x = 0;
  int y = 0;
};

/// Cells strictly greater than their 8 neighbours (theta wraps, rows clip),
/// best `top_k` across classes, highest score first.
std::vector<Detection> decode(const HeatmapTensor& tensor, std::size_t top_k = 100);

struct PlanarConversion {
  SphericalRect rect{0, kPi / 2, 1, 1};
  /// The horizontal fov hit the pi cap.
  bool fov_clamped = false;
  /// The box touched row 0 or row H and was pulled in by half a pixel.
  bool pole_touching = false;
};

/// Spherical box whose corners reproduce an ERP pixel box: the top (or bottom)
/// side is tangent to the box's extreme latitude at its midpoint, the corners
/// sit at the box's left and right columns, and the far side's corners are
/// placed at the same angular separation. Throws DegenerateRect for zero size.
PlanarConversion planar_to_spherical(const PixelRect& rect, const ErpImageSpec& spec);

/// Binary heatmap container: "SPHM", u32 W, H, C, flags (bit 0: Gaussian
/// mode), then float64 scores, offsets and fovs planes, all little-endian.
void write_sphm(const HeatmapTensor& tensor, std::ostream& out);
HeatmapTensor read_sphm(std::istream& in);

}  // namespace sphiou
