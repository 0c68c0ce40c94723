// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include "sphiou/detector.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>

namespace sphiou {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRadiusCheckTol = 1e-6;
constexpr double kNegativeSlack = 1e-9;
constexpr double kMinFov = 1e-6;

// Pairwise summation keeps the reduction order fixed and the error small.
double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

double concentric_iou(double alpha, double beta, double alpha2, double beta2) {
  return iou(SphericalRect(0.0, kPi / 2, alpha, beta), SphericalRect(0.0, kPi / 2, alpha2, beta2));
}

// A candidate within kNegativeSlack below zero is a rounding artefact of a
// zero radius.
double snap_zero(double g) { return (g < 0.0 && g >= -kNegativeSlack) ? 0.0 : g; }

bool grown_box_matches(double alpha, double beta, double g, double t) {
  if (!std::isfinite(g) || g < 0.0) return false;
  const double a2 = alpha + 2 * g, b2 = beta + 2 * g;
  if (a2 > kPi || b2 > kPi) return false;
  return std::abs(concentric_iou(alpha, beta, a2, b2) - t) <= kRadiusCheckTol;
}

bool shrunk_box_matches(double alpha, double beta, double g, double t) {
  if (!std::isfinite(g) || g < 0.0) return false;
  const double a2 = alpha - 2 * g, b2 = beta - 2 * g;
  if (a2 <= 0.0 || b2 <= 0.0) {
    return false;
  }
  return std::abs(concentric_iou(alpha, beta, a2, b2) - t) <= kRadiusCheckTol;
}

void check_tensor_pair(const HeatmapTensor& a, const HeatmapTensor& b) {
  a.validate();
  b.validate();
  if (!(a.spec == b.spec) || a.num_classes != b.num_classes)
    throw RangeError("tensor", "prediction and ground truth shapes differ");
}

UnitVec3 cell_direction(double theta, double phi) { return sph_to_vec(theta, phi); }

// --- little-endian helpers --------------------------------------------------

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("SPHM: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void get_plane(std::istream& in, std::vector<double>& plane) {
  std::vector<unsigned char> buf(plane.size() * 8);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw Error("SPHM: truncated data");
  for (std::size_t i = 0; i < plane.size(); ++i) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(buf[8 * i + k]) << (8 * k);
    plane[i] = std::bit_cast<double>(v);
  }
}

}  // namespace

HeatmapTensor::HeatmapTensor(const ErpImageSpec& s, int c) : spec(s), num_classes(c) {
  spec.validate();
  if (c < 1) throw RangeError("num_classes", "must be >= 1");
  const std::size_t plane = static_cast<std::size_t>(s.width) * s.height;
  scores.assign(plane * c, 0.0);
  offsets.assign(plane * 2, 0.0);
  fovs.assign(plane * 2, 0.0);
}

void HeatmapTensor::validate() const {
  spec.validate();
  if (num_classes < 1) throw RangeError("num_classes", "must be >= 1");
  const std::size_t plane = static_cast<std::size_t>(spec.width) * spec.height;
  if (scores.size() != plane * num_classes) throw RangeError("scores", "size does not match W x H x C");
  if (offsets.size() != plane * 2) throw RangeError("offsets", "size does not match W x H x 2");
  if (fovs.size() != plane * 2) throw RangeError("fovs", "size does not match W x H x 2");
}

GtCell gt_offset(double theta, double phi, const ErpImageSpec& spec) {
  spec.validate();
  const double step_t = kTwoPi / spec.width;
  const double step_p = kPi / spec.height;
  GtCell cell;
  cell.x = std::clamp(static_cast<int>(std::floor(theta * spec.width / kTwoPi)), 0, spec.width - 1);
  cell.y = std::clamp(static_cast<int>(std::floor(phi * spec.height / kPi)), 0, spec.height - 1);
  cell.dtheta = theta - cell.x * step_t;
  cell.dphi = phi - cell.y * step_p;
  // phi = pi sits on the closing edge of the last row.
  cell.dphi = std::min(cell.dphi, std::nextafter(step_p, 0.0));
  return cell;
}

RadiusBreakdown radius(double alpha, double beta, double t) {
  if (!(alpha > 0.0 && alpha <= kPi)) throw RangeError("alpha", "must be in (0, pi]");
  if (!(beta > 0.0 && beta <= kPi)) throw RangeError("beta", "must be in (0, pi]");
  if (!(t > 0.0 && t <= 1.0)) throw RangeError("t", "must be in (0, 1]");

  const double s = std::sin(alpha / 2) * std::sin(beta / 2);
  const double cdiff = std::cos((alpha - beta) / 2);
  const double half_sum = (alpha + beta) / 2;
  RadiusBreakdown r;

  const double arg_a = std::asin(s) / t;
  r.gamma_a = arg_a <= kPi / 2 ? 0.5 * std::acos(-2 * std::sin(arg_a) + cdiff) - half_sum / 2 : kNaN;
  r.gamma_b = -0.5 * std::acos(-2 * std::sin(t * std::asin(s)) + cdiff) + half_sum / 2;
  r.gamma_c = -std::acos(-2 * std::sin(2 * t * (std::acos(-s) - 2 * kPi) / (1 + t)) + cdiff) + half_sum;

  const double ga = snap_zero(r.gamma_a), gb = snap_zero(r.gamma_b), gc = snap_zero(r.gamma_c);
  r.valid_a = grown_box_matches(alpha, beta, ga, t);
  r.valid_b = shrunk_box_matches(alpha, beta, gb, t) || (t == 1.0 && gb == 0.0);
  r.valid_c = std::isfinite(gc) && gc >= 0.0;

  double best = std::numeric_limits<double>::infinity();
  if (r.valid_a) best = std::min(best, ga);
  if (r.valid_b) best = std::min(best, gb);
  if (r.valid_c) best = std::min(best, gc);
  if (std::isfinite(best)) {
    r.gamma = std::max(0.0, best);
    return r;
  }

  // Nothing usable: solve the grown-box relation numerically. IoU falls
  // monotonically as the box grows.
  r.bisection_fallback = true;
  double lo = 0.0, hi = (kPi - std::max(alpha, beta)) / 2;
  if (concentric_iou(alpha, beta, alpha + 2 * hi, beta + 2 * hi) >= t) {
    r.gamma = hi;
    return r;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (concentric_iou(alpha, beta, alpha + 2 * mid, beta + 2 * mid) > t)
      lo = mid;
    else
      hi = mid;
  }
  r.gamma = 0.5 * (lo + hi);
  return r;
}

double heatmap_value(std::pair<double, double> center, std::pair<double, double> loc, double sigma,
                     HeatmapMode mode) {
  if (!(sigma > 0.0)) throw RangeError("sigma", "must be > 0");
  const double d = std::acos(std::clamp(
      dot(cell_direction(center.first, center.second), cell_direction(loc.first, loc.second)), -1.0, 1.0));
  const double e = mode == HeatmapMode::kGaussian ? d * d : d;
  return std::exp(-e / (2 * sigma * sigma));
}

HeatmapTensor render_gt(const std::vector<GtAnnotation>& annotations, const ErpImageSpec& spec, int num_classes,
                        const LossWeights& weights, const RenderOptions& options) {
  HeatmapTensor out(spec, num_classes);
  out.mode = options.mode;
  const double step_t = kTwoPi / spec.width, step_p = kPi / spec.height;
  for (const auto& a : annotations) {
    if (a.class_id < 0 || a.class_id >= num_classes) throw RangeError("class_id", "outside [0, C)");
    const SphericalRect& b = a.bbox;
    const GtCell cell = gt_offset(b.theta(), b.phi(), spec);
    const double gamma = radius(b.alpha(), b.beta(), weights.iou_threshold).gamma;
    const double sigma = gamma * options.sigma_scale;
    if (gamma > 0.0 && sigma > 0.0) {
      const UnitVec3 c = sph_to_vec(b.theta(), b.phi());
      const int y_lo = std::max(0, static_cast<int>(std::floor((b.phi() - gamma) / step_p)));
      const int y_hi = std::min(spec.height - 1, static_cast<int>(std::ceil((b.phi() + gamma) / step_p)));
      const double cos_gamma = std::cos(gamma);
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const UnitVec3 p = sph_to_vec(x * step_t, y * step_p);
          if (dot(c, p) < cos_gamma) continue;
          const double v = heatmap_value({b.theta(), b.phi()}, {x * step_t, y * step_p}, sigma, options.mode);
          double& cur = out.score(a.class_id, x, y);
          cur = std::max(cur, v);
        }
      }
    }
    out.score(a.class_id, cell.x, cell.y) = 1.0;
    out.offset(0, cell.x, cell.y) = cell.dtheta;
    out.offset(1, cell.x, cell.y) = cell.dphi;
    out.fov(0, cell.x, cell.y) = b.alpha();
    out.fov(1, cell.x, cell.y) = b.beta();
  }
  return out;
}

double focal_loss(const HeatmapTensor& pred, const HeatmapTensor& gt) {
  check_tensor_pair(pred, gt);
  constexpr double kClamp = 1e-12;
  const ErpImageSpec& spec = gt.spec;
  std::size_t n_pos = 0;
  std::vector<double> row_terms;
  row_terms.reserve(static_cast<std::size_t>(gt.num_classes) * spec.height);
  std::vector<double> cells(spec.width);
  for (int c = 0; c < gt.num_classes; ++c) {
    for (int y = 0; y < spec.height; ++y) {
      const double w = pixel_weight(y, spec);
      for (int x = 0; x < spec.width; ++x) {
        const double p = std::clamp(pred.score(c, x, y), kClamp, 1.0 - kClamp);
        const double g = gt.score(c, x, y);
        if (g == 1.0) {
          ++n_pos;
          cells[x] = (1 - p) * (1 - p) * std::log(p);
        } else {
          const double q = 1 - g;
          cells[x] = q * q * q * q * p * p * std::log(1 - p);
        }
      }
      row_terms.push_back(w * pairwise_sum(cells));
    }
  }
  if (n_pos == 0) throw EmptyGt("ground truth has no positive cell");
  return -pairwise_sum(row_terms) / static_cast<double>(n_pos);
}

double offset_loss(const HeatmapTensor& pred, const std::vector<GtAnnotation>& gts) {
  pred.validate();
  if (gts.empty()) throw EmptyGt("offset loss needs at least one object");
  const ErpImageSpec& spec = pred.spec;
  std::vector<double> terms;
  terms.reserve(gts.size());
  for (const auto& g : gts) {
    const GtCell cell = gt_offset(g.bbox.theta(), g.bbox.phi(), spec);
    const double ct = cell.x * kTwoPi / spec.width, cp = cell.y * kPi / spec.height;
    const UnitVec3 predicted = sph_to_vec(ct + pred.offset(0, cell.x, cell.y), cp + pred.offset(1, cell.x, cell.y));
    const UnitVec3 truth = sph_to_vec(ct + cell.dtheta, cp + cell.dphi);
    terms.push_back(angle_between(predicted, truth));
  }
  return pairwise_sum(terms) / static_cast<double>(gts.size());
}

double fov_loss(const HeatmapTensor& pred, const std::vector<GtAnnotation>& gts) {
  pred.validate();
  if (gts.empty()) throw EmptyGt("fov loss needs at least one object");
  std::vector<double> terms;
  terms.reserve(gts.size());
  for (const auto& g : gts) {
    const GtCell cell = gt_offset(g.bbox.theta(), g.bbox.phi(), pred.spec);
    terms.push_back(std::abs(pred.fov(0, cell.x, cell.y) - g.bbox.alpha()) +
                    std::abs(pred.fov(1, cell.x, cell.y) - g.bbox.beta()));
  }
  return pairwise_sum(terms) / static_cast<double>(gts.size());
}

double total_loss(double cls, double off, double fov, const LossWeights& weights) {
  return cls + weights.lambda_off * off + weights.lambda_fov * fov;
}

std::vector<Detection> decode(const HeatmapTensor& tensor, std::size_t top_k) {
  tensor.validate();
  const int w = tensor.spec.width, h = tensor.spec.height;
  std::vector<Detection> peaks;
  for (int c = 0; c < tensor.num_classes; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = tensor.score(c, x, y);
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy) {
          const int ny = y + dy;
          if (ny < 0 || ny >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = (x + dx + w) % w;
            if (nx == x && ny == y) continue;
            if (tensor.score(c, nx, ny) >= v) {
              peak = false;
              break;
            }
          }
        }
        if (!peak) continue;
        Detection d;
        d.class_id = c;
        d.score = v;
        d.x = x;
        d.y = y;
        peaks.push_back(d);
      }
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (peaks.size() > top_k) peaks.resize(top_k);
  for (auto& d : peaks) {
    const double theta = d.x * kTwoPi / w + tensor.offset(0, d.x, d.y);
    const double phi = std::clamp(d.y * kPi / h + tensor.offset(1, d.x, d.y), 0.0, kPi);
    const double a = std::clamp(tensor.fov(0, d.x, d.y), kMinFov, kPi);
    const double b = std::clamp(tensor.fov(1, d.x, d.y), kMinFov, kPi);
    d.bbox = SphericalRect::wrapped(theta, phi, a, b);
  }
  return peaks;
}

PlanarConversion planar_to_spherical(const PixelRect& rect, const ErpImageSpec& spec) {
  spec.validate();
  if (!(rect.w > 0.0) || !(rect.h > 0.0)) throw DegenerateRect("pixel box has zero width or height");
  PlanarConversion out;
  const double theta_c = (rect.x0 + rect.w / 2) * kTwoPi / spec.width;
  double half_w = (rect.w / 2) * kTwoPi / spec.width;
  double phi0 = rect.y0 * kPi / spec.height;
  double phi1 = rect.y1() * kPi / spec.height;
  const double half_px = 0.5 * kPi / spec.height;
  if (phi0 < half_px) {
    phi0 = half_px;
    out.pole_touching = true;
  }
  if (phi1 > kPi - half_px) {
    phi1 = kPi - half_px;
    out.pole_touching = true;
  }
  if (!(phi1 > phi0)) throw DegenerateRect("pixel box collapses after pole clamping");
  constexpr double kMaxHalfWidth = kPi / 2 - 1e-6;
  if (half_w >= kMaxHalfWidth) {
    half_w = kMaxHalfWidth;
    out.fov_clamped = true;
  }

  // Work at azimuth 0; the result is rotated back by theta_c at the end.
  const Vec3 east{0, 1, 0};
  auto along_tangent = [&](double phi, double s) {
    const Vec3 o = sph_to_vec(0.0, phi);
    return std::pair(o * std::cos(s) - east * std::sin(s), o * std::cos(s) + east * std::sin(s));
  };
  // Two points at colatitude phi, symmetric about azimuth 0, separated by 2s.
  auto on_latitude = [&](double phi, double s) {
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double c2d = std::clamp((std::cos(2 * s) - cp * cp) / (sp * sp), -1.0, 1.0);
    const double d = 0.5 * std::acos(c2d);
    return std::pair(sph_to_vec(-d, phi).vec(), sph_to_vec(d, phi).vec());
  };

  Vec3 tl, tr, br, bl;
  if (phi1 <= kPi / 2 || phi0 >= kPi / 2) {
    const bool south = phi0 >= kPi / 2;
    // Mirror a southern box to the north, build it there and flip back.
    const double near = south ? kPi - phi1 : phi0;
    const double far = south ? kPi - phi0 : phi1;
    const double s = std::atan(std::tan(half_w) * std::sin(near));
    auto [a, b] = along_tangent(near, s);
    auto [d, c] = on_latitude(far, s);
    if (south) {
      auto flip = [](const Vec3& v) { return Vec3{v.x, v.y, -v.z}; };
      tl = flip(d), tr = flip(c), br = flip(b), bl = flip(a);
    } else {
      tl = a, tr = b, br = c, bl = d;
    }
  } else {
    // Straddling the equator: the side farther from it is wider in ERP and
    // fixes the arc length for both sides.
    const double s = std::atan(std::tan(half_w) * std::min(std::sin(phi0), std::sin(phi1)));
    std::tie(tl, tr) = along_tangent(phi0, s);
    std::tie(bl, br) = along_tangent(phi1, s);
  }

  const UnitVec3 look = UnitVec3::normalize(tl + tr + br + bl);
  auto inward = [&](const Vec3& p, const Vec3& q) {
    const UnitVec3 n = UnitVec3::normalize(cross(p, q));
    return dot(n, look) >= 0.0 ? n : -n;
  };
  const UnitVec3 n_left = inward(tl, bl), n_right = inward(tr, br);
  const UnitVec3 n_top = inward(tl, tr), n_bottom = inward(bl, br);
  double alpha = kPi - angle_between(n_left, n_right);
  double beta = kPi - angle_between(n_top, n_bottom);
  if (out.fov_clamped) alpha = kPi;
  alpha = std::clamp(alpha, kMinFov, kPi);
  beta = std::clamp(beta, kMinFov, kPi);
  const auto [dtheta, phi] = vec_to_sph(look);
  out.rect = SphericalRect::wrapped(theta_c + dtheta, phi, alpha, beta);
  return out;
}

void write_sphm(const HeatmapTensor& tensor, std::ostream& out) {
  tensor.validate();
  out.write("SPHM", 4);
  put_u32(out, static_cast<std::uint32_t>(tensor.spec.width));
  put_u32(out, static_cast<std::uint32_t>(tensor.spec.height));
  put_u32(out, static_cast<std::uint32_t>(tensor.num_classes));
  put_u32(out, tensor.mode == HeatmapMode::kGaussian ? 1u : 0u);
  for (const auto* plane : {&tensor.scores, &tensor.offsets, &tensor.fovs})
    for (double d : *plane) put_f64(out, d);
  if (!out) throw Error("SPHM: write failed");
}

HeatmapTensor read_sphm(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "SPHM") throw Error("SPHM: bad magic");
  const std::uint32_t w = get_u32(in), h = get_u32(in), c = get_u32(in), flags = get_u32(in);
  constexpr std::uint32_t kMaxDim = 1u << 16;
  if (w < 2 || h < 2 || c < 1 || w > kMaxDim || h > kMaxDim || c > kMaxDim) throw Error("SPHM: bad dimensions");
  HeatmapTensor t({static_cast<int>(w), static_cast<int>(h)}, static_cast<int>(c));
  t.mode = (flags & 1u) ? HeatmapMode::kGaussian : HeatmapMode::kLinearExponent;
  get_plane(in, t.scores);
  get_plane(in, t.offsets);
  get_plane(in, t.fovs);
  return t;
}

}  // namespace sphiou
