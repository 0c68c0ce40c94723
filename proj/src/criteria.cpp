// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include "sphiou/criteria.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

namespace sphiou {

namespace {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Wraps an angle difference into (-pi, pi].
double wrap_pm(double d) {
  d = std::fmod(d, kTwoPi);
  if (d <= -kPi) d += kTwoPi;
  if (d > kPi) d -= kTwoPi;
  return d;
}

double planar_iou(double inter, double a1, double a2) {
  const double uni = a1 + a2 - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// --- Circle-circle intersection ---------------------------------------------

double circle_overlap(double d, double r1, double r2) {
  if (d >= r1 + r2) return 0.0;
  if (d <= std::abs(r1 - r2)) {
    const double r = std::min(r1, r2);
    return kPi * r * r;
  }
  const double c1 = std::clamp((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1), -1.0, 1.0);
  const double c2 = std::clamp((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2), -1.0, 1.0);
  const double k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
  return r1 * r1 * std::acos(c1) + r2 * r2 * std::acos(c2) - 0.5 * std::sqrt(std::max(0.0, k));
}

// --- Sampled tangent-plane polygons ----------------------------------------

BgPolygon sampled_polygon(const SphericalRect& r, int n_points) {
  if (!(r.alpha() < kPi && r.beta() < kPi))
    throw ProjectionOverflow("tangent-plane rectangle reaches 90 degrees from its tangent point");
  const Frame f = local_frame(r.theta(), r.phi());
  const double tu = std::tan(r.alpha() / 2);
  const double tv = std::tan(r.beta() / 2);
  const int per_side = n_points / 4;

  // Corners in tangent coordinates (u along right, v along up), walked in order.
  const std::array<std::array<double, 2>, 4> corners{{{-tu, tv}, {tu, tv}, {tu, -tv}, {-tu, -tv}}};
  std::vector<std::array<double, 2>> uv;
  uv.reserve(static_cast<std::size_t>(n_points));
  for (int side = 0; side < 4; ++side) {
    const auto& a = corners[side];
    const auto& b = corners[(side + 1) % 4];
    for (int i = 0; i < per_side; ++i) {
      const double t = static_cast<double>(i) / per_side;
      uv.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }

  BgPolygon poly;
  auto& ring = poly.outer();
  double x = 0.0, prev_theta = 0.0, first_x = 0.0;
  double first_theta = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const Vec3 p = f.look.vec() + uv[i][0] * f.right.vec() + uv[i][1] * f.up.vec();
    const auto [theta, phi] = vec_to_sph(p);
    if (i == 0) {
      x = r.theta() + wrap_pm(theta - r.theta());
      first_x = x;
      first_theta = theta;
    } else {
      x += wrap_pm(theta - prev_theta);
    }
    prev_theta = theta;
    ring.emplace_back(x, phi);
  }
  // A ring that winds once around the axis encloses a pole: close it along
  // the pole row, which is how such a region looks in ERP.
  const double closing_x = x + wrap_pm(first_theta - prev_theta);
  if (std::abs(closing_x - first_x) > kPi) {
    const double pole_y = contains_point(r, Vec3{0, 0, 1}) ? 0.0 : kPi;
    ring.emplace_back(closing_x, ring.front().y());
    ring.emplace_back(closing_x, pole_y);
    ring.emplace_back(first_x, pole_y);
  }
  bg::correct(poly);
  return poly;
}

BgPolygon shifted(const BgPolygon& poly, double dx) {
  BgPolygon out;
  for (const auto& p : poly.outer()) out.outer().emplace_back(p.x() + dx, p.y());
  return out;
}

// --- Sampling / rasterization kernels ---------------------------------------

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

double to_unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Runs fn(begin, end) over [0, n) in fixed-size chunks spread across threads.
// Callers only accumulate integer counts per chunk, so the result does not
// depend on the thread count.
template <typename Fn>
void for_chunks(std::size_t n, std::size_t chunk, Fn&& fn) {
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, n_chunks);
  auto run = [&](std::size_t w) {
    for (std::size_t c = w; c < n_chunks; c += workers) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
}

struct SampleCounts {
  std::uint64_t in1 = 0, in2 = 0, both = 0, either = 0;
};

SampleCounts sample_counts(const BoundaryPlanes& p1, const BoundaryPlanes* p2, std::uint64_t n, std::uint64_t seed) {
  constexpr std::size_t kChunk = 1u << 16;
  const std::uint64_t key = splitmix64(seed + kGolden);
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<SampleCounts> per_chunk(n_chunks);
  for_chunks(n, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    SampleCounts s;
    for (std::size_t i = begin; i < end; ++i) {
      const double z = 2.0 * to_unit_interval(splitmix64(key + (2 * i + 1) * kGolden)) - 1.0;
      const double theta = kTwoPi * to_unit_interval(splitmix64(key + (2 * i + 2) * kGolden));
      const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 p{rxy * std::cos(theta), rxy * std::sin(theta), z};
      const bool a = contains_point(p1, p);
      const bool b = p2 != nullptr && contains_point(*p2, p);
      s.in1 += a;
      s.in2 += b;
      s.both += a && b;
      s.either += a || b;
    }
    per_chunk[c] = s;
  });
  SampleCounts total;
  for (const auto& s : per_chunk) {
    total.in1 += s.in1;
    total.in2 += s.in2;
    total.both += s.both;
    total.either += s.either;
  }
  return total;
}

bool parse_size(std::string_view text, ErpImageSpec& out) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) return false;
  int w = 0, h = 0;
  auto r1 = std::from_chars(text.data(), text.data() + x, w);
  auto r2 = std::from_chars(text.data() + x + 1, text.data() + text.size(), h);
  if (r1.ec != std::errc{} || r1.ptr != text.data() + x) return false;
  if (r2.ec != std::errc{} || r2.ptr != text.data() + text.size()) return false;
  if (w < 2 || h < 2) return false;
  out = {w, h};
  return true;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto r = std::from_chars(text.data(), text.data() + text.size(), out);
  return r.ec == std::errc{} && r.ptr == text.data() + text.size();
}

std::vector<std::string_view> split_colon(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(':', start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

void ErpImageSpec::validate() const {
  if (width < 2) throw RangeError("width", "must be >= 2");
  if (height < 2) throw RangeError("height", "must be >= 2");
}

double pixel_weight(int y, const ErpImageSpec& spec) {
  const double h = spec.height;
  return (std::cos(y * kPi / h) - std::cos((y + 1) * kPi / h)) * kTwoPi / spec.width;
}

PixelRect erp_bbox(const SphericalRect& rect, const ErpImageSpec& spec) {
  const BoundaryPlanes planes = boundary_normals(rect);
  const bool north = contains_point(planes, Vec3{0, 0, 1});
  const bool south = contains_point(planes, Vec3{0, 0, -1});

  std::vector<UnitVec3> corners;
  if (!rect.is_hemisphere()) {
    const auto v = rect_vertices(rect);
    corners.assign(v.begin(), v.end());
  }

  // z extremes: corners, interior extrema of each side arc, or a pole.
  double zmax = -1.0, zmin = 1.0;
  for (const auto& v : corners) {
    zmax = std::max(zmax, v.z());
    zmin = std::min(zmin, v.z());
  }
  for (const auto& n : planes.as_array()) {
    const Vec3 d = Vec3{0, 0, 1} - n.z() * n.vec();
    if (norm(d) < 1e-15) continue;
    const UnitVec3 top = UnitVec3::normalize(d);
    if (contains_point(planes, top)) zmax = std::max(zmax, top.z());
    if (contains_point(planes, -top)) zmin = std::min(zmin, -top.z());
  }
  if (north) zmax = 1.0;
  if (south) zmin = -1.0;
  const double phi0 = std::acos(std::clamp(zmax, -1.0, 1.0));
  const double phi1 = std::acos(std::clamp(zmin, -1.0, 1.0));

  PixelRect out;
  out.y0 = phi0 * spec.height / kPi;
  out.h = (phi1 - phi0) * spec.height / kPi;
  if (north || south || corners.empty()) {
    out.x0 = 0.0;
    out.w = spec.width;
    return out;
  }
  // Without a pole inside, azimuth is monotone along every side, so the
  // azimuth range is spanned by the corners.
  double dmin = 0.0, dmax = 0.0;
  for (const auto& v : corners) {
    const double d = wrap_pm(vec_to_sph(v).first - rect.theta());
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  out.x0 = wrap_theta(rect.theta() + dmin) * spec.width / kTwoPi;
  out.w = (dmax - dmin) * spec.width / kTwoPi;
  return out;
}

PixelRect snap_outward(const PixelRect& r) {
  // Edges within rounding noise of a pixel boundary stay on that boundary.
  constexpr double kSnapSlack = 1e-9;
  const double x0 = std::floor(r.x0 + kSnapSlack), y0 = std::floor(r.y0 + kSnapSlack);
  return {x0, y0, std::ceil(r.x1() - kSnapSlack) - x0, std::ceil(r.y1() - kSnapSlack) - y0};
}

double iou_planar_rect(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec) {
  const PixelRect r1 = snap_outward(erp_bbox(b1, spec));
  const PixelRect r2 = snap_outward(erp_bbox(b2, spec));
  double best = 0.0;
  for (const double shift : {-1.0, 0.0, 1.0}) {
    const double dx = shift * spec.width;
    const double ox = interval_overlap(r1.x0, r1.x1(), r2.x0 + dx, r2.x1() + dx);
    const double oy = interval_overlap(r1.y0, r1.y1(), r2.y0, r2.y1());
    best = std::max(best, ox * oy);
  }
  return planar_iou(best, r1.area(), r2.area());
}

double iou_circle(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec) {
  const PixelRect r1 = snap_outward(erp_bbox(b1, spec));
  const PixelRect r2 = snap_outward(erp_bbox(b2, spec));
  const double rad1 = 0.5 * std::hypot(r1.w, r1.h);
  const double rad2 = 0.5 * std::hypot(r2.w, r2.h);
  const double cx1 = b1.theta() * spec.width / kTwoPi, cy1 = b1.phi() * spec.height / kPi;
  const double cx2 = b2.theta() * spec.width / kTwoPi, cy2 = b2.phi() * spec.height / kPi;
  double best = 0.0;
  for (const double shift : {-1.0, 0.0, 1.0}) {
    const double d = std::hypot(cx2 + shift * spec.width - cx1, cy2 - cy1);
    best = std::max(best, circle_overlap(d, rad1, rad2));
  }
  return planar_iou(best, kPi * rad1 * rad1, kPi * rad2 * rad2);
}

double iou_polygon_sampled(const SphericalRect& b1, const SphericalRect& b2, int n_points) {
  if (n_points < 4 || n_points % 4 != 0) throw RangeError("n_points", "must be a positive multiple of 4");
  const BgPolygon p1 = sampled_polygon(b1, n_points);
  const BgPolygon p2 = sampled_polygon(b2, n_points);
  const double a1 = bg::area(p1);
  const double a2 = bg::area(p2);
  double best = 0.0, best_shift = 0.0;
  for (const double shift : {-kTwoPi, 0.0, kTwoPi}) {
    BgMultiPolygon out;
    bg::intersection(p1, shifted(p2, shift), out);
    const double a = bg::area(out);
    if (a > best) {
      best = a;
      best_shift = shift;
    }
  }
  if (best <= 0.0) return planar_iou(0.0, a1, a2);
  // Take the union from the same clipper so that coincident outlines give
  // identical ring areas for both terms.
  BgMultiPolygon uni;
  bg::union_(p1, shifted(p2, best_shift), uni);
  const double u = bg::area(uni);
  if (!(u > 0.0)) throw ZeroUnion("sampled polygons have zero union area");
  return std::clamp(best / u, 0.0, 1.0);
}

double iou_sph_zone(const SphericalRect& b1, const SphericalRect& b2) {
  auto lat_range = [](const SphericalRect& b) {
    return std::pair(std::max(0.0, b.phi() - b.beta() / 2), std::min(kPi, b.phi() + b.beta() / 2));
  };
  auto zone_area = [](double dtheta, double lo, double hi) { return dtheta * (std::cos(lo) - std::cos(hi)); };
  const auto [lo1, hi1] = lat_range(b1);
  const auto [lo2, hi2] = lat_range(b2);
  const double a1 = zone_area(b1.alpha(), lo1, hi1);
  const double a2 = zone_area(b2.alpha(), lo2, hi2);

  const double d = std::abs(wrap_pm(b1.theta() - b2.theta()));
  const double half = (b1.alpha() + b2.alpha()) / 2;
  const double cap = std::min(b1.alpha(), b2.alpha());
  const double dtheta =
      std::min(cap, std::clamp(half - d, 0.0, cap) + std::clamp(half - (kTwoPi - d), 0.0, cap));
  const double lo = std::max(lo1, lo2), hi = std::min(hi1, hi2);
  const double inter = (dtheta > 0.0 && hi > lo) ? zone_area(dtheta, lo, hi) : 0.0;
  return planar_iou(inter, a1, a2);
}

MonteCarloEstimate iou_monte_carlo(const SphericalRect& b1, const SphericalRect& b2, std::uint64_t n_samples,
                                   std::uint64_t seed) {
  const BoundaryPlanes p1 = boundary_normals(b1);
  const BoundaryPlanes p2 = boundary_normals(b2);
  const SampleCounts c = sample_counts(p1, &p2, n_samples, seed);
  if (c.either == 0) throw ZeroUnion("no sample fell inside either box; increase n_samples");
  MonteCarloEstimate est;
  est.n_both = c.both;
  est.n_either = c.either;
  est.estimate = static_cast<double>(c.both) / static_cast<double>(c.either);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(c.either));
  return est;
}

MonteCarloEstimate area_fraction_monte_carlo(const SphericalRect& b, std::uint64_t n_samples, std::uint64_t seed) {
  const BoundaryPlanes p = boundary_normals(b);
  const SampleCounts c = sample_counts(p, nullptr, n_samples, seed);
  MonteCarloEstimate est;
  est.n_both = c.in1;
  est.n_either = n_samples;
  est.estimate = static_cast<double>(c.in1) / static_cast<double>(n_samples);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(n_samples));
  return est;
}

double iou_pixel_integral(const SphericalRect& b1, const SphericalRect& b2, const ErpImageSpec& spec) {
  spec.validate();
  const std::size_t w = static_cast<std::size_t>(spec.width);
  const std::size_t h = static_cast<std::size_t>(spec.height);
  std::vector<double> cos_t(w), sin_t(w);
  for (std::size_t x = 0; x < w; ++x) {
    const double theta = (static_cast<double>(x) + 0.5) * kTwoPi / spec.width;
    cos_t[x] = std::cos(theta);
    sin_t[x] = std::sin(theta);
  }
  const auto n1 = boundary_normals(b1).as_array();
  const auto n2 = boundary_normals(b2).as_array();

  struct RowCount {
    std::uint64_t both = 0, either = 0;
  };
  std::vector<RowCount> rows(h);
  for_chunks(h, 16, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t y = begin; y < end; ++y) {
      const double phi = (static_cast<double>(y) + 0.5) * kPi / spec.height;
      const double sp = std::sin(phi), cp = std::cos(phi);
      // dot(n, p) = a cos(theta) + b sin(theta) + c along this row.
      double a[8], b[8], c[8];
      bool reach1 = true, reach2 = true;
      for (int k = 0; k < 4; ++k) {
        a[k] = n1[k].x() * sp, b[k] = n1[k].y() * sp, c[k] = n1[k].z() * cp;
        a[k + 4] = n2[k].x() * sp, b[k + 4] = n2[k].y() * sp, c[k + 4] = n2[k].z() * cp;
        reach1 = reach1 && std::hypot(a[k], b[k]) + c[k] >= -kContainEps;
        reach2 = reach2 && std::hypot(a[k + 4], b[k + 4]) + c[k + 4] >= -kContainEps;
      }
      if (!reach1 && !reach2) continue;
      std::uint64_t both = 0, either = 0;
      for (std::size_t x = 0; x < w; ++x) {
        const double ct = cos_t[x], st = sin_t[x];
        const bool in1 = (a[0] * ct + b[0] * st + c[0] >= -kContainEps) &
                         (a[1] * ct + b[1] * st + c[1] >= -kContainEps) &
                         (a[2] * ct + b[2] * st + c[2] >= -kContainEps) &
                         (a[3] * ct + b[3] * st + c[3] >= -kContainEps);
        const bool in2 = (a[4] * ct + b[4] * st + c[4] >= -kContainEps) &
                         (a[5] * ct + b[5] * st + c[5] >= -kContainEps) &
                         (a[6] * ct + b[6] * st + c[6] >= -kContainEps) &
                         (a[7] * ct + b[7] * st + c[7] >= -kContainEps);
        both += in1 & in2;
        either += in1 | in2;
      }
      rows[y] = {both, either};
    }
  });
  double inter = 0.0, uni = 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    if (rows[y].either == 0) continue;
    const double wy = pixel_weight(static_cast<int>(y), spec);
    inter += wy * static_cast<double>(rows[y].both);
    uni += wy * static_cast<double>(rows[y].either);
  }
  return uni > 0.0 ? inter / uni : 0.0;
}

std::string criterion_name(const CriterionId& id) {
  struct Visitor {
    std::string operator()(const UnbiasedSpherical&) const { return "Ours"; }
    std::string operator()(const PlanarRect&) const { return "Rectangle"; }
    std::string operator()(const Circle&) const { return "Circle"; }
    std::string operator()(const PolygonSampled&) const { return "Polygon"; }
    std::string operator()(const SphZone&) const { return "SphIoU"; }
    std::string operator()(const MonteCarlo&) const { return "MonteCarlo"; }
    std::string operator()(const PixelIntegral&) const { return "PixelIntegral"; }
  };
  return std::visit(Visitor{}, id);
}

std::optional<CriterionId> parse_criterion(const std::string& text) {
  std::string lower;
  for (char ch : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  const auto parts = split_colon(lower);
  const std::string_view name = parts.front();
  const std::size_t extra = parts.size() - 1;

  auto raster = [&](ErpImageSpec fallback) -> std::optional<ErpImageSpec> {
    if (extra == 0) return fallback;
    ErpImageSpec s;
    if (extra == 1 && parse_size(parts[1], s)) return s;
    return std::nullopt;
  };

  if ((name == "unbiased" || name == "ours") && extra == 0) return UnbiasedSpherical{};
  if ((name == "sphzone" || name == "sphiou") && extra == 0) return SphZone{};
  if (name == "planar" || name == "rectangle") {
    if (auto s = raster(PlanarRect{}.spec)) return PlanarRect{*s};
    return std::nullopt;
  }
  if (name == "circle") {
    if (auto s = raster(Circle{}.spec)) return Circle{*s};
    return std::nullopt;
  }
  if (name == "integral" || name == "pixelintegral") {
    if (auto s = raster(PixelIntegral{}.spec)) return PixelIntegral{*s};
    return std::nullopt;
  }
  if (name == "polygon") {
    PolygonSampled p;
    if (extra > 1) return std::nullopt;
    if (extra == 1 && !parse_number(parts[1], p.n_points)) return std::nullopt;
    if (p.n_points < 4 || p.n_points % 4 != 0) return std::nullopt;
    return p;
  }
  if (name == "montecarlo" || name == "mc") {
    MonteCarlo m;
    if (extra > 2) return std::nullopt;
    if (extra >= 1 && !parse_number(parts[1], m.n_samples)) return std::nullopt;
    if (extra == 2 && !parse_number(parts[2], m.seed)) return std::nullopt;
    if (m.n_samples < 1) return std::nullopt;
    return m;
  }
  return std::nullopt;
}

bool is_resolution_dependent(const CriterionId& id) {
  return std::holds_alternative<PlanarRect>(id) || std::holds_alternative<Circle>(id) ||
         std::holds_alternative<PixelIntegral>(id);
}

CriterionId with_resolution(const CriterionId& id, const ErpImageSpec& spec) {
  if (std::holds_alternative<PlanarRect>(id)) return PlanarRect{spec};
  if (std::holds_alternative<Circle>(id)) return Circle{spec};
  if (std::holds_alternative<PixelIntegral>(id)) return PixelIntegral{spec};
  return id;
}

double evaluate_criterion(const CriterionId& id, const SphericalRect& b1, const SphericalRect& b2) {
  struct Visitor {
    const SphericalRect& b1;
    const SphericalRect& b2;
    double operator()(const UnbiasedSpherical&) const { return iou(b1, b2); }
    double operator()(const PlanarRect& c) const { return iou_planar_rect(b1, b2, c.spec); }
    double operator()(const Circle& c) const { return iou_circle(b1, b2, c.spec); }
    double operator()(const PolygonSampled& c) const { return iou_polygon_sampled(b1, b2, c.n_points); }
    double operator()(const SphZone&) const { return iou_sph_zone(b1, b2); }
    double operator()(const MonteCarlo& c) const { return iou_monte_carlo(b1, b2, c.n_samples, c.seed).estimate; }
    double operator()(const PixelIntegral& c) const { return iou_pixel_integral(b1, b2, c.spec); }
  };
  try {
    return std::visit(Visitor{b1, b2}, id);
  } catch (const ProjectionOverflow&) {
    return kNaN;
  } catch (const ZeroUnion&) {
    return kNaN;
  }
}

}  // namespace sphiou
