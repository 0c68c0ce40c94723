// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact geometry of spherical rectangles on the unit sphere.
//
// A spherical rectangle (theta, phi, alpha, beta) is the region cut from the
// unit sphere by the four side planes of a viewing frustum whose apex is the
// sphere center. theta is the azimuth of the box center, phi its polar angle
// (0 = north pole) and alpha / beta the horizontal / vertical field of view.
//
// Everything below works on 3D unit vectors. Azimuth wrapping only happens at
// parameter input and output, so boxes crossing the theta = 0 seam need no
// special handling.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "sphiou/error.hpp"

namespace sphiou {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Closed-region tolerance on plane dot products (contains_point).
inline constexpr double kContainEps = 1e-10;
/// Candidate points closer than this angle (radians) are the same vertex.
inline constexpr double kDedupAngle = 1e-9;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// Angle between two (not necessarily unit) vectors, accurate near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

/// A direction on the unit sphere. Only constructible through normalization.
class UnitVec3 {
 public:
  constexpr UnitVec3() : v_{0.0, 0.0, 1.0} {}

  /// Normalizes `v`; throws DegenerateRect for a (near) zero vector.
  static UnitVec3 normalize(const Vec3& v);
  /// Wraps components already known to be unit length (e.g. closed-form trig).
  static constexpr UnitVec3 from_unit(const Vec3& v) { return UnitVec3(v); }

  constexpr double x() const { return v_.x; }
  constexpr double y() const { return v_.y; }
  constexpr double z() const { return v_.z; }
  constexpr const Vec3& vec() const { return v_; }
  constexpr operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)
  constexpr UnitVec3 operator-() const { return UnitVec3(-v_); }
  constexpr bool operator==(const UnitVec3&) const = default;

 private:
  constexpr explicit UnitVec3(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

/// Wraps an azimuth into [0, 2*pi).
double wrap_theta(double theta);

class SphericalRect {
 public:
  /// Throws InvalidRect unless 0 <= theta < 2pi, 0 <= phi <= pi,
  /// 0 < alpha <= pi and 0 < beta <= pi (all finite).
  SphericalRect(double theta, double phi, double alpha, double beta);

  /// Same as the constructor but wraps theta into [0, 2pi) first.
  static SphericalRect wrapped(double theta, double phi, double alpha, double beta);

  double theta() const { return theta_; }
  double phi() const { return phi_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// True when the box is a full hemisphere (alpha = beta = pi).
  bool is_hemisphere() const { return alpha_ == kPi && beta_ == kPi; }
  /// True when the box lies strictly inside an open hemisphere (alpha, beta < pi).
  bool is_proper() const { return alpha_ < kPi && beta_ < kPi; }

  bool operator==(const SphericalRect&) const = default;

 private:
  double theta_;
  double phi_;
  double alpha_;
  double beta_;
};

struct Frame {
  UnitVec3 look;
  UnitVec3 right;
  UnitVec3 up;
};

enum class Edge : int { kLeft = 0, kTop = 1, kRight = 2, kBottom = 3 };

/// Inward side-plane normals. A point p is inside iff dot(p, n) >= 0 for all four.
struct BoundaryPlanes {
  UnitVec3 left;
  UnitVec3 top;
  UnitVec3 right;
  UnitVec3 bottom;

  const UnitVec3& operator[](Edge e) const;
  std::array<UnitVec3, 4> as_array() const { return {left, top, right, bottom}; }
};

/// Ordered vertices plus, for each i, the inward normal of the great circle
/// carrying the arc vertices[i] -> vertices[i + 1].
struct SphericalPolygon {
  std::vector<UnitVec3> vertices;
  std::vector<UnitVec3> edge_planes;
};

/// (sin phi cos theta, sin phi sin theta, cos phi).
UnitVec3 sph_to_vec(double theta, double phi);
/// Inverse of sph_to_vec; theta in [0, 2pi), phi in [0, pi].
std::pair<double, double> vec_to_sph(const Vec3& v);

/// Local look/right/up frame at (theta, phi). At the poles the frame is still
/// given by the same closed forms, so `right` and `up` depend on theta there.
Frame local_frame(double theta, double phi);

BoundaryPlanes boundary_normals(const SphericalRect& rect);

/// Solid angle of the box in steradians, 4 arccos(-sin(a/2) sin(b/2)) - 2pi.
double rect_area(const SphericalRect& rect);

/// Corners in the order top-left, top-right, bottom-right, bottom-left, where
/// top-left = left x top etc. Throws DegenerateRect for the full hemisphere,
/// whose four side planes coincide.
std::array<UnitVec3, 4> rect_vertices(const SphericalRect& rect);

bool contains_point(const SphericalRect& rect, const Vec3& p);
bool contains_point(const BoundaryPlanes& planes, const Vec3& p);

struct EdgeCrossing {
  UnitVec3 point;
  Edge edge1;  // side of the first box
  Edge edge2;  // side of the second box
};

/// Points where a side of b1 meets a side of b2 and which lie inside both boxes.
std::vector<EdgeCrossing> edge_intersections(const SphericalRect& b1, const SphericalRect& b2);

/// Spherical excess sum(omega_i) - (n - 2) pi with omega_i the angle between the
/// planes of the two edges meeting at vertex i. Throws MalformedPolygon if there
/// are fewer than 3 vertices or a vertex is off one of its adjacent planes.
double polygon_excess_area(const SphericalPolygon& poly);

enum class IntersectionPath {
  kDisjoint,    // no crossings and no corner of either box inside the other
  kContained,   // one box inside the other
  kPolygon,     // general case, area from the intersection polygon
  kLune,        // both boxes are lunes / hemispheres sharing an axis
  kTangential,  // only 1-2 points survive, or all survivors on one great circle
};

struct IntersectionResult {
  double area = 0.0;
  IntersectionPath path = IntersectionPath::kDisjoint;
  /// Ordered boundary of the intersection for kPolygon, counterclockwise
  /// seen from outside the sphere.
  std::vector<UnitVec3> polygon;
  /// Set when the overlap has measure zero (tangential contact).
  bool degenerate = false;
};

/// Area of b1 and b2's intersection with diagnostics. Symmetric in its arguments.
IntersectionResult intersect(const SphericalRect& b1, const SphericalRect& b2);
double intersection_area(const SphericalRect& b1, const SphericalRect& b2);

/// Unbiased spherical IoU. Symmetric bit-for-bit: iou(a, b) == iou(b, a).
double iou(const SphericalRect& b1, const SphericalRect& b2);

/// Row-major |as| x |bs| matrix of iou values; entry (i, j) equals iou(as[i], bs[j]).
std::vector<double> iou_matrix(std::span<const SphericalRect> as, std::span<const SphericalRect> bs);

}  // namespace sphiou
