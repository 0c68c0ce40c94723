// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include "sphiou/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

namespace sphiou {

namespace {

constexpr double kParallelEps = 1e-12;
constexpr double kOnPlaneEps = 1e-9;

bool same_direction(const Vec3& a, const Vec3& b) { return norm(a - b) < kDedupAngle; }

void push_unique(std::vector<UnitVec3>& pts, const UnitVec3& p) {
  for (const auto& q : pts) {
    if (same_direction(q, p)) return;
  }
  pts.push_back(p);
}

// Orders two boxes canonically so that every pairwise routine is exactly
// symmetric in its arguments.
std::pair<const SphericalRect*, const SphericalRect*> canonical(const SphericalRect& a,
                                                                const SphericalRect& b) {
  auto key = [](const SphericalRect& r) { return std::tuple(r.theta(), r.phi(), r.alpha(), r.beta()); };
  if (key(b) < key(a)) return {&b, &a};
  return {&a, &b};
}

// Corners of a box, empty for the full hemisphere.
std::vector<UnitVec3> corners_or_empty(const SphericalRect& r) {
  if (r.is_hemisphere()) return {};
  auto v = rect_vertices(r);
  return {v.begin(), v.end()};
}

// Area of the region {p : n.p >= 0 for all n} when every normal is
// perpendicular to the common axis q: a lune whose dihedral angle is pi minus
// the angular spread of the normals around q.
double lune_area(const Vec3& q, std::span<const UnitVec3> normals) {
  const Vec3 axis = q * (1.0 / norm(q));
  Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 e1 = cross(axis, helper) * (1.0 / norm(cross(axis, helper)));
  const Vec3 e2 = cross(axis, e1);
  std::vector<double> ang;
  ang.reserve(normals.size());
  for (const auto& n : normals) ang.push_back(std::atan2(dot(n, e2), dot(n, e1)));
  std::sort(ang.begin(), ang.end());
  double largest_gap = ang.front() + kTwoPi - ang.back();
  for (std::size_t i = 1; i < ang.size(); ++i) largest_gap = std::max(largest_gap, ang[i] - ang[i - 1]);
  const double spread = kTwoPi - largest_gap;
  return std::max(0.0, 2.0 * (kPi - spread));
}

}  // namespace

UnitVec3 UnitVec3::normalize(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateRect("cannot normalize a zero vector");
  return UnitVec3(v * (1.0 / n));
}

double wrap_theta(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

SphericalRect::SphericalRect(double theta, double phi, double alpha, double beta)
    : theta_(theta), phi_(phi), alpha_(alpha), beta_(beta) {
  if (!std::isfinite(theta) || theta < 0.0 || theta >= kTwoPi)
    throw InvalidRect("theta out of [0, 2pi): " + std::to_string(theta));
  if (!std::isfinite(phi) || phi < 0.0 || phi > kPi)
    throw InvalidRect("phi out of [0, pi]: " + std::to_string(phi));
  if (!std::isfinite(alpha) || alpha <= 0.0 || alpha > kPi)
    throw InvalidRect("alpha out of (0, pi]: " + std::to_string(alpha));
  if (!std::isfinite(beta) || beta <= 0.0 || beta > kPi)
    throw InvalidRect("beta out of (0, pi]: " + std::to_string(beta));
}

SphericalRect SphericalRect::wrapped(double theta, double phi, double alpha, double beta) {
  if (!std::isfinite(theta)) throw InvalidRect("theta is not finite");
  return SphericalRect(wrap_theta(theta), phi, alpha, beta);
}

const UnitVec3& BoundaryPlanes::operator[](Edge e) const {
  switch (e) {
    case Edge::kLeft:
      return left;
    case Edge::kTop:
      return top;
    case Edge::kRight:
      return right;
    case Edge::kBottom:
      break;
  }
  return bottom;
}

UnitVec3 sph_to_vec(double theta, double phi) {
  const double sp = std::sin(phi);
  return UnitVec3::from_unit({sp * std::cos(theta), sp * std::sin(theta), std::cos(phi)});
}

std::pair<double, double> vec_to_sph(const Vec3& v) {
  const double theta = wrap_theta(std::atan2(v.y, v.x));
  const double phi = std::atan2(std::hypot(v.x, v.y), v.z);
  return {theta, phi};
}

Frame local_frame(double theta, double phi) {
  const double st = std::sin(theta), ct = std::cos(theta);
  const double sp = std::sin(phi), cp = std::cos(phi);
  return Frame{
      UnitVec3::from_unit({sp * ct, sp * st, cp}),
      UnitVec3::from_unit({-st, ct, 0.0}),
      UnitVec3::from_unit({-cp * ct, -cp * st, sp}),
  };
}

BoundaryPlanes boundary_normals(const SphericalRect& rect) {
  const Frame f = local_frame(rect.theta(), rect.phi());
  const double sa = std::sin(rect.alpha() / 2), ca = std::cos(rect.alpha() / 2);
  const double sb = std::sin(rect.beta() / 2), cb = std::cos(rect.beta() / 2);
  // sin^2 + cos^2 = 1 and look, right, up are orthonormal, so these are unit.
  return BoundaryPlanes{
      UnitVec3::from_unit(sa * f.look.vec() - ca * f.right.vec()),
      UnitVec3::from_unit(sb * f.look.vec() - cb * f.up.vec()),
      UnitVec3::from_unit(sa * f.look.vec() + ca * f.right.vec()),
      UnitVec3::from_unit(sb * f.look.vec() + cb * f.up.vec()),
  };
}

double rect_area(const SphericalRect& rect) {
  const double s = std::sin(rect.alpha() / 2) * std::sin(rect.beta() / 2);
  // 4 arccos(-s) - 2pi rewritten as 4 arcsin(s), which keeps full relative
  // precision for small boxes.
  return 4.0 * std::asin(std::min(1.0, s));
}

std::array<UnitVec3, 4> rect_vertices(const SphericalRect& rect) {
  if (rect.is_hemisphere()) throw DegenerateRect("hemisphere box has no corners");
  const BoundaryPlanes n = boundary_normals(rect);
  const UnitVec3 look = sph_to_vec(rect.theta(), rect.phi());
  auto corner = [&](const UnitVec3& a, const UnitVec3& b, const UnitVec3& other1, const UnitVec3& other2) {
    const Vec3 c = cross(a, b);
    if (norm(c) < kParallelEps) throw DegenerateRect("adjacent side planes are parallel");
    UnitVec3 v = UnitVec3::normalize(c);
    // The corner is the candidate on the inner side of the two other planes.
    // For lunes both candidates touch those planes; pick the one facing up/right.
    const double score = dot(v, other1) + dot(v, other2);
    if (score < 0.0 || (score == 0.0 && dot(v, look) < 0.0)) v = -v;
    return v;
  };
  return {
      corner(n.left, n.top, n.right, n.bottom),
      corner(n.top, n.right, n.left, n.bottom),
      corner(n.right, n.bottom, n.left, n.top),
      corner(n.bottom, n.left, n.right, n.top),
  };
}

bool contains_point(const BoundaryPlanes& planes, const Vec3& p) {
  return dot(p, planes.left) >= -kContainEps && dot(p, planes.top) >= -kContainEps &&
         dot(p, planes.right) >= -kContainEps && dot(p, planes.bottom) >= -kContainEps;
}

bool contains_point(const SphericalRect& rect, const Vec3& p) {
  return contains_point(boundary_normals(rect), p);
}

std::vector<EdgeCrossing> edge_intersections(const SphericalRect& b1, const SphericalRect& b2) {
  const BoundaryPlanes n1 = boundary_normals(b1);
  const BoundaryPlanes n2 = boundary_normals(b2);
  std::vector<EdgeCrossing> out;
  for (int i = 0; i < 4; ++i) {
    const Edge e1 = static_cast<Edge>(i);
    for (int j = 0; j < 4; ++j) {
      const Edge e2 = static_cast<Edge>(j);
      const Vec3 c = cross(n1[e1], n2[e2]);
      if (norm(c) < kParallelEps) continue;
      const UnitVec3 p = UnitVec3::normalize(c);
      for (const UnitVec3& cand : {p, -p}) {
        if (contains_point(n1, cand) && contains_point(n2, cand)) out.push_back({cand, e1, e2});
      }
    }
  }
  return out;
}

double polygon_excess_area(const SphericalPolygon& poly) {
  const std::size_t n = poly.vertices.size();
  if (n < 3) throw MalformedPolygon("polygon needs at least 3 vertices, got " + std::to_string(n));
  if (poly.edge_planes.size() != n) throw MalformedPolygon("edge plane count differs from vertex count");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const UnitVec3& prev = poly.edge_planes[(i + n - 1) % n];
    const UnitVec3& next = poly.edge_planes[i];
    const UnitVec3& v = poly.vertices[i];
    if (std::abs(dot(v, prev)) > kOnPlaneEps || std::abs(dot(v, next)) > kOnPlaneEps)
      throw MalformedPolygon("vertex " + std::to_string(i) + " is off an adjacent edge plane");
    sum += kPi - angle_between(prev, next);
  }
  return sum - static_cast<double>(n - 2) * kPi;
}

IntersectionResult intersect(const SphericalRect& first, const SphericalRect& second) {
  const auto [pa, pb] = canonical(first, second);
  const SphericalRect& b1 = *pa;
  const SphericalRect& b2 = *pb;
  const BoundaryPlanes n1 = boundary_normals(b1);
  const BoundaryPlanes n2 = boundary_normals(b2);
  const double area1 = rect_area(b1);
  const double area2 = rect_area(b2);
  IntersectionResult res;

  if (b1.is_hemisphere() && b2.is_hemisphere() && same_direction(n1.left, n2.left)) {
    res.area = area1;
    res.path = IntersectionPath::kContained;
    return res;
  }

  const std::vector<UnitVec3> v1 = corners_or_empty(b1);
  const std::vector<UnitVec3> v2 = corners_or_empty(b2);
  const std::vector<EdgeCrossing> crossings = edge_intersections(b1, b2);

  std::size_t v1_in = 0, v2_in = 0;
  for (const auto& v : v1) v1_in += contains_point(n2, v) ? 1 : 0;
  for (const auto& v : v2) v2_in += contains_point(n1, v) ? 1 : 0;

  if (crossings.empty() && v1_in == 0 && v2_in == 0) {
    res.path = IntersectionPath::kDisjoint;
    return res;
  }
  // A proper box is the convex hull of its corners, so all four corners
  // inside the other (convex) box means the whole box is inside.
  if (b1.is_proper() && v1_in == v1.size()) {
    res.area = area1;
    res.path = IntersectionPath::kContained;
    return res;
  }
  if (b2.is_proper() && v2_in == v2.size()) {
    res.area = area2;
    res.path = IntersectionPath::kContained;
    return res;
  }

  std::vector<UnitVec3> pts;
  for (const auto& c : crossings) push_unique(pts, c.point);
  for (const auto& v : v1)
    if (contains_point(n2, v)) push_unique(pts, v);
  for (const auto& v : v2)
    if (contains_point(n1, v)) push_unique(pts, v);

  std::array<UnitVec3, 8> planes{n1.left, n1.top, n1.right, n1.bottom, n2.left, n2.top, n2.right, n2.bottom};

  if (pts.size() == 2 && dot(pts[0], pts[1]) < -1.0 + 1e-12) {
    // Only two wide boxes (alpha or beta = pi) can share an antipodal pair;
    // their intersection is then a lune through that pair.
    res.area = std::min({lune_area(pts[0], planes), area1, area2});
    res.path = IntersectionPath::kLune;
    return res;
  }
  if (pts.size() < 3) {
    res.path = IntersectionPath::kTangential;
    res.degenerate = true;
    return res;
  }
  for (const auto& n : planes) {
    const bool all_on = std::all_of(pts.begin(), pts.end(), [&](const UnitVec3& p) {
      return std::abs(dot(p, n)) < kOnPlaneEps;
    });
    if (all_on) {
      res.path = IntersectionPath::kTangential;
      res.degenerate = true;
      return res;
    }
  }

  // Order the points counterclockwise around their centroid direction. The
  // intersection of two convex boxes is convex, so this is the boundary order.
  Vec3 centroid;
  for (const auto& p : pts) centroid += p.vec();
  const UnitVec3 c = UnitVec3::normalize(centroid);
  const Vec3 helper = std::abs(c.x()) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  const Vec3 e1 = UnitVec3::normalize(cross(c, helper));
  const Vec3 e2 = cross(c, e1);
  std::vector<std::pair<double, UnitVec3>> ordered;
  ordered.reserve(pts.size());
  for (const auto& p : pts) ordered.emplace_back(std::atan2(dot(p, e2), dot(p, e1)), p);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  SphericalPolygon poly;
  poly.vertices.reserve(ordered.size());
  for (const auto& [ang, p] : ordered) poly.vertices.push_back(p);

  const std::size_t n = poly.vertices.size();
  poly.edge_planes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const UnitVec3& a = poly.vertices[i];
    const UnitVec3& b = poly.vertices[(i + 1) % n];
    const Vec3 ab = cross(a, b);
    const UnitVec3* best = nullptr;
    double best_score = 0.0;
    for (const auto& pl : planes) {
      if (std::abs(dot(a, pl)) >= kOnPlaneEps || std::abs(dot(b, pl)) >= kOnPlaneEps) continue;
      const double score = dot(pl, ab);
      if (score > best_score) {
        best_score = score;
        best = &pl;
      }
    }
    poly.edge_planes.push_back(best ? *best : UnitVec3::normalize(ab));
  }

  res.area = std::clamp(polygon_excess_area(poly), 0.0, std::min(area1, area2));
  res.path = IntersectionPath::kPolygon;
  res.polygon = std::move(poly.vertices);
  return res;
}

double intersection_area(const SphericalRect& b1, const SphericalRect& b2) { return intersect(b1, b2).area; }

double iou(const SphericalRect& b1, const SphericalRect& b2) {
  const auto [pa, pb] = canonical(b1, b2);
  const double inter = intersection_area(*pa, *pb);
  if (inter <= 0.0) return 0.0;
  const double uni = rect_area(*pa) + rect_area(*pb) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<double> iou_matrix(std::span<const SphericalRect> as, std::span<const SphericalRect> bs) {
  std::vector<double> out(as.size() * bs.size());
  for (std::size_t i = 0; i < as.size(); ++i) {
    for (std::size_t j = 0; j < bs.size(); ++j) out[i * bs.size() + j] = iou(as[i], bs[j]);
  }
  return out;
}

}  // namespace sphiou
