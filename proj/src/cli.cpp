// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include "sphiou/cli.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sphiou/detector.hpp"
#include "sphiou/eval.hpp"

namespace sphiou {

namespace {

using nlohmann::json;

// Output file could not be written; exit code 4.
struct OutputError : Error {
  using Error::Error;
};

enum class Format { kText, kJson, kCsv };

struct Common {
  std::string angle_unit = "radians";
  std::string format = "text";
  std::string output;

  AngleUnit unit() const { return angle_unit == "degrees" ? AngleUnit::kDegrees : AngleUnit::kRadians; }
  Format fmt() const { return format == "json" ? Format::kJson : format == "csv" ? Format::kCsv : Format::kText; }
};

double parse_double(const std::string& text, const std::string& field) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v))
    throw RangeError(field, "not a finite number: '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t k = s.find(sep, start);
    parts.push_back(s.substr(start, k - start));
    if (k == std::string::npos) break;
    start = k + 1;
  }
  return parts;
}

SphericalRect parse_box(const std::string& text, const std::string& flag, AngleUnit unit) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw RangeError(flag, "expected theta,phi,alpha,beta but got '" + text + "'");
  static const char* names[4] = {"theta", "phi", "alpha", "beta"};
  double v[4];
  for (int k = 0; k < 4; ++k) v[k] = to_radians(parse_double(parts[k], flag + " " + names[k]), unit);
  try {
    return SphericalRect::wrapped(v[0], v[1], v[2], v[3]);
  } catch (const InvalidRect& e) {
    throw RangeError(flag, e.what());
  }
}

ErpImageSpec parse_size(const std::string& text, const std::string& flag) {
  const auto parts = split(text, 'x');
  if (parts.size() != 2) throw RangeError(flag, "expected WxH but got '" + text + "'");
  ErpImageSpec spec;
  for (int k = 0; k < 2; ++k) {
    int v = 0;
    const auto& p = parts[k];
    const auto res = std::from_chars(p.data(), p.data() + p.size(), v);
    if (res.ec != std::errc() || res.ptr != p.data() + p.size()) throw RangeError(flag, "bad size '" + text + "'");
    (k == 0 ? spec.width : spec.height) = v;
  }
  try {
    spec.validate();
  } catch (const RangeError& e) {
    throw RangeError(flag, e.what());
  }
  return spec;
}

CriterionId parse_criterion_flag(const std::string& text) {
  const auto c = parse_criterion(text);
  if (!c) throw RangeError("--criterion", "unknown criterion '" + text + "'");
  return *c;
}

std::vector<CriterionId> parse_criteria_list(const std::string& text) {
  std::vector<CriterionId> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_criterion_flag(p));
  return out;
}

std::vector<CriterionId> all_criteria() {
  auto c = table_criteria();
  c.push_back(MonteCarlo{});
  return c;
}

void emit(const Common& common, const std::string& text, std::ostream& out) {
  if (common.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(common.output, std::ios::binary);
  if (!f) throw OutputError("cannot open '" + common.output + "' for writing");
  f << text;
  f.flush();
  if (!f) throw OutputError("failed writing '" + common.output + "'");
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// iou -------------------------------------------------------------------------

struct IouArgs {
  std::string b1, b2, pairs, criterion = "ours";
  bool all = false;
};

std::string cmd_iou(const IouArgs& a, const Common& common) {
  std::vector<RectPair> pairs;
  if (!a.pairs.empty()) {
    if (!a.b1.empty() || !a.b2.empty()) throw RangeError("--pairs", "cannot be combined with --b1/--b2");
    pairs = load_pairs(a.pairs, common.unit());
  } else {
    if (a.b1.empty() || a.b2.empty()) throw RangeError("--b1", "--b1 and --b2 are required without --pairs");
    pairs.emplace_back(parse_box(a.b1, "--b1", common.unit()), parse_box(a.b2, "--b2", common.unit()));
  }
  const std::vector<CriterionId> criteria = a.all ? all_criteria() : std::vector{parse_criterion_flag(a.criterion)};
  const bool single = pairs.size() == 1;

  std::ostringstream text, csv;
  json results = json::array();
  csv << "pair,criterion,iou\n";
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (const auto& c : criteria) {
      const double v = evaluate_criterion(c, pairs[p].first, pairs[p].second);
      const std::string name = criterion_name(c);
      if (!single) text << p << ' ';
      if (a.all) text << name << ' ';
      text << format_number(v) << '\n';
      csv << p << ',' << name << ',' << format_number(v) << '\n';
      results.push_back({{"pair", p}, {"criterion", name}, {"iou", number_json(v)}});
    }
  }
  switch (common.fmt()) {
    case Format::kJson:
      return json{{"results", results}}.dump(2) + "\n";
    case Format::kCsv:
      return csv.str();
    default:
      return text.str();
  }
}

// compare ---------------------------------------------------------------------

struct CompareArgs {
  std::string pairs, resolutions = "8192x4096,10240x5120,12288x6144", criteria;
  std::size_t random = 3;
  std::uint64_t seed = 0;
};

std::string cmd_compare(const CompareArgs& a, const Common& common) {
  std::vector<ErpImageSpec> res;
  for (const auto& r : split(a.resolutions, ',')) res.push_back(parse_size(r, "--resolutions"));
  const auto criteria = a.criteria.empty() ? table_criteria() : parse_criteria_list(a.criteria);
  const auto pairs = a.pairs.empty() ? random_overlapping_pairs(a.random, a.seed) : load_pairs(a.pairs, common.unit());
  if (pairs.empty()) throw RangeError("--pairs", "no pairs in file");
  const ComparisonTable table = compare_criteria(pairs, criteria, res);
  switch (common.fmt()) {
    case Format::kCsv:
      return comparison_to_csv(table);
    case Format::kJson: {
      json rows = json::array();
      for (const auto& row : table.rows) {
        json vals = json::array();
        for (const double v : row.values) vals.push_back(number_json(v));
        rows.push_back({{"pair", row.pair_index}, {"criterion", row.criterion}, {"values", vals}});
      }
      json resj = json::array();
      for (const auto& r : res) resj.push_back(std::to_string(r.width) + "x" + std::to_string(r.height));
      return json{{"resolutions", resj}, {"rows", rows}}.dump(2) + "\n";
    }
    default:
      return comparison_to_text(table);
  }
}

// eval ------------------------------------------------------------------------

struct EvalArgs {
  std::string gt, det, criterion = "ours", thresholds;
  std::size_t max_dets = 100;
  bool matches = false;
  bool allow_mismatch = false;
};

struct EvalOutcome {
  std::string text;
  bool mismatch = false;
};

EvalOutcome cmd_eval(const EvalArgs& a, const Common& common, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto gts = load_annotations(a.gt, &warnings, common.unit());
  const auto dets = load_detections(a.det, &warnings, common.unit());
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  EvalConfig cfg;
  cfg.criterion = parse_criterion_flag(a.criterion);
  if (!a.thresholds.empty()) {
    cfg.iou_thresholds.clear();
    for (const auto& t : split(a.thresholds, ',')) cfg.iou_thresholds.push_back(parse_double(t, "--iou-thresholds"));
  }
  cfg.max_dets_per_image = a.max_dets;
  const EvalReport report = evaluate(dets, gts, cfg);
  EvalOutcome o;
  if (!report.excluded_classes.empty()) {
    o.mismatch = !a.allow_mismatch;
    err << (a.allow_mismatch ? "warning" : "error") << ": detection classes absent from ground truth:";
    for (const int c : report.excluded_classes) err << ' ' << c;
    err << '\n';
  }
  if (common.fmt() == Format::kCsv) throw RangeError("--format", "eval supports text or json");
  o.text = common.fmt() == Format::kJson ? report_to_json(report, a.matches) : report_to_text(report);
  return o;
}

// radius ----------------------------------------------------------------------

struct RadiusArgs {
  double alpha = 0, beta = 0, t = 0.7;
};

std::string cmd_radius(const RadiusArgs& a, const Common& common) {
  const AngleUnit u = common.unit();
  const RadiusBreakdown r = radius(to_radians(a.alpha, u), to_radians(a.beta, u), a.t);
  auto out = [&](double v) { return from_radians(v, u); };
  if (common.fmt() == Format::kJson) {
    return json{{"gamma_a", number_json(out(r.gamma_a))}, {"valid_a", r.valid_a},
                {"gamma_b", number_json(out(r.gamma_b))}, {"valid_b", r.valid_b},
                {"gamma_c", number_json(out(r.gamma_c))}, {"valid_c", r.valid_c},
                {"gamma", out(r.gamma)},                  {"bisection_fallback", r.bisection_fallback}}
               .dump(2) +
           "\n";
  }
  if (common.fmt() == Format::kCsv) throw RangeError("--format", "radius supports text or json");
  std::ostringstream s;
  auto row = [&](const char* name, double v, bool valid) {
    s << name << ' ' << format_number(out(v)) << ' ' << (valid ? "valid" : "invalid") << '\n';
  };
  row("gamma_a", r.gamma_a, r.valid_a);
  row("gamma_b", r.gamma_b, r.valid_b);
  row("gamma_c", r.gamma_c, r.valid_c);
  s << "gamma " << format_number(out(r.gamma)) << '\n';
  if (r.bisection_fallback) s << "note: no closed form was valid, gamma found by bisection\n";
  return s.str();
}

// bench -----------------------------------------------------------------------

struct BenchArgs {
  std::size_t pairs = 100;
  std::uint64_t seed = 0;
  std::string criteria;
};

std::string cmd_bench(const BenchArgs& a, const Common& common, bool& passed) {
  const auto criteria = a.criteria.empty() ? table_criteria() : parse_criteria_list(a.criteria);
  const BenchReport r = bench(criteria, a.pairs, a.seed);
  passed = r.passed;
  if (common.fmt() == Format::kCsv) throw RangeError("--format", "bench supports text or json");
  return common.fmt() == Format::kJson ? bench_to_json(r) : bench_to_text(r);
}

// render ----------------------------------------------------------------------

struct RenderArgs {
  std::string gt, image_size = "1024x512", out, image_id, format;
  int samples = 128;
};

struct Rgb {
  unsigned char r, g, b;
};

const Rgb kPalette[] = {{230, 25, 75},  {60, 180, 75},  {0, 130, 200}, {245, 130, 48},
                        {145, 30, 180}, {70, 240, 240}, {240, 50, 230}, {128, 128, 0}};

Rgb class_color(int c) { return kPalette[static_cast<std::size_t>(c) % std::size(kPalette)]; }

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string render_svg(const std::vector<std::pair<int, std::vector<Polyline>>>& shapes, const ErpImageSpec& spec) {
  std::ostringstream s;
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << spec.width << "\" height=\"" << spec.height
    << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
  s << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  s << "<line x1=\"0\" y1=\"" << spec.height / 2.0 << "\" x2=\"" << spec.width << "\" y2=\"" << spec.height / 2.0
    << R"(" stroke="#cccccc" stroke-width="1"/>)" << '\n';
  for (const auto& [cls, lines] : shapes) {
    for (const auto& line : lines) {
      s << "<polyline fill=\"none\" stroke=\"" << hex(class_color(cls)) << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < line.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s%.3f,%.3f", i ? " " : "", line[i].first, line[i].second);
        s << buf;
      }
      s << "\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void write_png(const std::string& path, const std::vector<unsigned char>& rgb, const ErpImageSpec& spec) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw OutputError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw OutputError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw OutputError("failed writing '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, spec.width, spec.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < spec.height; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * spec.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<unsigned char> rasterize(const std::vector<std::pair<int, std::vector<Polyline>>>& shapes,
                                     const ErpImageSpec& spec) {
  std::vector<unsigned char> rgb(static_cast<std::size_t>(spec.width) * spec.height * 3, 255);
  auto put = [&](double x, double y, const Rgb& c) {
    const int xi = std::clamp(static_cast<int>(std::floor(x)), 0, spec.width - 1);
    const int yi = std::clamp(static_cast<int>(std::floor(y)), 0, spec.height - 1);
    unsigned char* p = &rgb[(static_cast<std::size_t>(yi) * spec.width + xi) * 3];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  };
  for (int x = 0; x < spec.width; ++x) put(x, spec.height / 2.0, {204, 204, 204});
  for (const auto& [cls, lines] : shapes) {
    const Rgb c = class_color(cls);
    for (const auto& line : lines) {
      for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const auto [x0, y0] = line[i];
        const auto [x1, y1] = line[i + 1];
        const int steps = 1 + static_cast<int>(2 * std::max(std::abs(x1 - x0), std::abs(y1 - y0)));
        for (int k = 0; k <= steps; ++k) {
          const double s = static_cast<double>(k) / steps;
          put(x0 + s * (x1 - x0), y0 + s * (y1 - y0), c);
        }
      }
    }
  }
  return rgb;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(), [](char a, char b) { return std::tolower(a) == b; });
}

std::string cmd_render(const RenderArgs& a, const Common& common) {
  const ErpImageSpec spec = parse_size(a.image_size, "--image-size");
  if (a.samples < 2) throw RangeError("--samples", "must be >= 2");
  std::vector<std::string> warnings;
  auto records = load_annotations(a.gt, &warnings, common.unit());
  std::vector<std::pair<int, std::vector<Polyline>>> shapes;
  for (const auto& r : records) {
    if (!a.image_id.empty() && r.image_id != a.image_id) continue;
    shapes.emplace_back(r.class_id, boundary_polylines(r.bbox, spec, a.samples));
  }
  std::string kind = a.format;
  if (kind.empty()) kind = ends_with(a.out, ".png") ? "png" : "svg";
  if (kind == "png") {
    write_png(a.out, rasterize(shapes, spec), spec);
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw OutputError("cannot open '" + a.out + "' for writing");
    f << render_svg(shapes, spec);
    f.flush();
    if (!f) throw OutputError("failed writing '" + a.out + "'");
  }
  std::ostringstream s;
  s << "wrote " << shapes.size() << " boxes to " << a.out << " (" << kind << ")\n";
  return s.str();
}

// gt --------------------------------------------------------------------------

struct GtArgs {
  std::string gt, image_size = "256x128", out, image_id, mode = "linear";
  int classes = 0;
  double t = 0.7, sigma_scale = 1.0 / 3.0;
};

std::string cmd_gt(const GtArgs& a, const Common& common) {
  const ErpImageSpec spec = parse_size(a.image_size, "--image-size");
  std::vector<std::string> warnings;
  const auto records = load_annotations(a.gt, &warnings, common.unit());
  std::set<std::string> images;
  for (const auto& r : records)
    if (a.image_id.empty() || r.image_id == a.image_id) images.insert(r.image_id);
  if (images.size() > 1) throw RangeError("--image-id", "the file holds several images; pick one");
  std::vector<GtAnnotation> anns;
  int max_class = -1;
  for (const auto& r : records) {
    if (!a.image_id.empty() && r.image_id != a.image_id) continue;
    anns.push_back({r.class_id, r.bbox});
    max_class = std::max(max_class, r.class_id);
  }
  const int classes = a.classes > 0 ? a.classes : std::max(1, max_class + 1);
  if (max_class >= classes) throw RangeError("--classes", "smaller than the largest class id + 1");
  LossWeights w;
  w.iou_threshold = a.t;
  RenderOptions opt;
  opt.sigma_scale = a.sigma_scale;
  opt.mode = a.mode == "gaussian" ? HeatmapMode::kGaussian : HeatmapMode::kLinearExponent;
  const HeatmapTensor tensor = render_gt(anns, spec, classes, w, opt);
  {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw OutputError("cannot open '" + a.out + "' for writing");
    write_sphm(tensor, f);
    f.flush();
    if (!f) throw OutputError("failed writing '" + a.out + "'");
  }
  std::ostringstream s;
  s << "wrote " << spec.width << 'x' << spec.height << 'x' << classes << " heatmap with " << anns.size()
    << " objects to " << a.out << '\n';
  return s.str();
}

void add_common(CLI::App& app, Common& common) {
  app.add_option("--angle-unit", common.angle_unit, "Unit of input and output angles")
      ->check(CLI::IsMember({"radians", "degrees"}));
  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--output", common.output, "Write the result here instead of stdout");
}

}  // namespace

std::vector<Polyline> boundary_polylines(const SphericalRect& rect, const ErpImageSpec& spec, int samples_per_side) {
  spec.validate();
  std::vector<Vec3> pts;
  if (rect.is_hemisphere()) {
    const Frame f = local_frame(rect.theta(), rect.phi());
    const int n = 4 * samples_per_side;
    for (int k = 0; k <= n; ++k) {
      const double a = kTwoPi * k / n;
      pts.push_back(std::cos(a) * f.right.vec() + std::sin(a) * f.up.vec());
    }
  } else {
    const auto v = rect_vertices(rect);
    for (int side = 0; side < 4; ++side) {
      const Vec3 p = v[side].vec(), q = v[(side + 1) % 4].vec();
      const double omega = angle_between(p, q);
      for (int k = 0; k < samples_per_side; ++k) {
        const double s = static_cast<double>(k) / samples_per_side;
        if (omega < 1e-12) {
          pts.push_back(p);
          continue;
        }
        const double sw = std::sin(omega);
        pts.push_back(std::sin((1 - s) * omega) / sw * p + std::sin(s * omega) / sw * q);
      }
    }
    pts.push_back(v[0].vec());
  }

  const double w = spec.width, h = spec.height;
  auto to_px = [&](const Vec3& p) {
    const auto [theta, phi] = vec_to_sph(p);
    return std::pair{theta / kTwoPi * w, phi / kPi * h};
  };
  std::vector<Polyline> lines(1);
  auto prev = to_px(pts[0]);
  lines.back().push_back(prev);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auto cur = to_px(pts[i]);
    const double dx = cur.first - prev.first;
    if (std::abs(dx) > w / 2) {
      // Crossing the seam: unwrap, then cut at the image border.
      const double cur_unwrapped = cur.first + (dx > 0 ? -w : w);
      const double edge = dx > 0 ? 0.0 : w;
      const double s = (edge - prev.first) / (cur_unwrapped - prev.first);
      const double y = prev.second + s * (cur.second - prev.second);
      lines.back().emplace_back(edge, y);
      lines.emplace_back();
      lines.back().emplace_back(w - edge, y);
    }
    lines.back().push_back(cur);
    prev = cur;
  }
  return lines;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spherical rectangle IoU, evaluation and detector utilities", "sphiou"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  add_common(app, common);

  IouArgs iou_a;
  auto* iou_cmd = app.add_subcommand("iou", "IoU of one pair or of every pair in a file");
  iou_cmd->add_option("--b1", iou_a.b1, "First box as theta,phi,alpha,beta");
  iou_cmd->add_option("--b2", iou_a.b2, "Second box as theta,phi,alpha,beta");
  iou_cmd->add_option("--pairs", iou_a.pairs, "JSON-lines file of pairs");
  iou_cmd->add_option("--criterion", iou_a.criterion, "Criterion name, e.g. ours, planar, circle, polygon:64");
  iou_cmd->add_flag("--all", iou_a.all, "Evaluate every criterion");

  CompareArgs cmp_a;
  auto* cmp_cmd = app.add_subcommand("compare", "Criteria comparison table");
  cmp_cmd->add_option("--pairs", cmp_a.pairs, "JSON-lines file of pairs (random pairs otherwise)");
  cmp_cmd->add_option("--resolutions", cmp_a.resolutions, "Comma-separated WxH list");
  cmp_cmd->add_option("--criteria", cmp_a.criteria, "Comma-separated criteria");
  cmp_cmd->add_option("--random", cmp_a.random, "Number of random pairs without --pairs");
  cmp_cmd->add_option("--seed", cmp_a.seed, "Seed for random pairs");

  EvalArgs ev_a;
  auto* ev_cmd = app.add_subcommand("eval", "AP of detections against ground truth");
  ev_cmd->add_option("--gt", ev_a.gt, "Ground-truth JSON-lines file")->required();
  ev_cmd->add_option("--det", ev_a.det, "Detection JSON-lines file")->required();
  ev_cmd->add_option("--criterion", ev_a.criterion, "IoU criterion used for matching");
  ev_cmd->add_option("--iou-thresholds", ev_a.thresholds, "Comma-separated thresholds");
  ev_cmd->add_option("--max-dets", ev_a.max_dets, "Detections kept per image");
  ev_cmd->add_flag("--matches", ev_a.matches, "Include the match log in JSON output");
  ev_cmd->add_flag("--allow-class-mismatch", ev_a.allow_mismatch,
                   "Only warn when detections use classes missing from the ground truth");

  RadiusArgs rad_a;
  auto* rad_cmd = app.add_subcommand("radius", "Heatmap radius for a box size");
  rad_cmd->add_option("--alpha", rad_a.alpha, "Horizontal fov")->required();
  rad_cmd->add_option("--beta", rad_a.beta, "Vertical fov")->required();
  rad_cmd->add_option("--t", rad_a.t, "IoU threshold");

  BenchArgs bench_a;
  auto* bench_cmd = app.add_subcommand("bench", "Median time per IoU call");
  bench_cmd->add_option("--pairs", bench_a.pairs, "Number of random pairs");
  bench_cmd->add_option("--seed", bench_a.seed, "Seed for random pairs");
  bench_cmd->add_option("--criteria", bench_a.criteria, "Comma-separated criteria");

  RenderArgs ren_a;
  auto* ren_cmd = app.add_subcommand("render", "Draw box outlines on an equirectangular canvas");
  ren_cmd->add_option("--gt", ren_a.gt, "JSON-lines file of boxes")->required();
  ren_cmd->add_option("--image-size", ren_a.image_size, "Canvas size WxH");
  ren_cmd->add_option("--out", ren_a.out, "Output .svg or .png")->required();
  ren_cmd->add_option("--image-id", ren_a.image_id, "Only draw this image's boxes");
  ren_cmd->add_option("--image-format", ren_a.format, "svg or png (default from --out)")
      ->check(CLI::IsMember({"svg", "png"}));
  ren_cmd->add_option("--samples", ren_a.samples, "Samples per box side");

  GtArgs gt_a;
  auto* gt_cmd = app.add_subcommand("gt", "Write a ground-truth heatmap tensor (SPHM)");
  gt_cmd->add_option("--gt", gt_a.gt, "JSON-lines annotation file")->required();
  gt_cmd->add_option("--image-size", gt_a.image_size, "Heatmap size WxH");
  gt_cmd->add_option("--out", gt_a.out, "Output .sphm file")->required();
  gt_cmd->add_option("--image-id", gt_a.image_id, "Image to render when the file holds several");
  gt_cmd->add_option("--classes", gt_a.classes, "Number of classes (default max id + 1)");
  gt_cmd->add_option("--t", gt_a.t, "IoU threshold for the radius");
  gt_cmd->add_option("--sigma-scale", gt_a.sigma_scale, "sigma = radius * scale");
  gt_cmd->add_option("--mode", gt_a.mode, "Heatmap falloff")->check(CLI::IsMember({"linear", "gaussian"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    int code = kExitOk;
    std::string text;
    if (iou_cmd->parsed()) {
      text = cmd_iou(iou_a, common);
    } else if (cmp_cmd->parsed()) {
      text = cmd_compare(cmp_a, common);
    } else if (ev_cmd->parsed()) {
      const EvalOutcome o = cmd_eval(ev_a, common, err);
      text = o.text;
      if (o.mismatch) code = kExitCheck;
    } else if (rad_cmd->parsed()) {
      text = cmd_radius(rad_a, common);
    } else if (bench_cmd->parsed()) {
      bool passed = false;
      text = cmd_bench(bench_a, common, passed);
      if (!passed) {
        err << "error: speedup below 10\n";
        code = kExitCheck;
      }
    } else if (ren_cmd->parsed()) {
      text = cmd_render(ren_a, common);
    } else if (gt_cmd->parsed()) {
      text = cmd_gt(gt_a, common);
    }
    emit(common, text, out);
    return code;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace sphiou
