// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0

#include "sphiou/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sphiou {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDeg = kPi / 180.0;

struct RawRecord {
  std::string image_id;
  int class_id = 0;
  double theta = 0, phi = 0, alpha = 0, beta = 0;
  std::optional<double> score;
  SphericalRect bbox{0, kPi / 2, 1, 1};
};

double number_field(const json& j, const char* name, std::size_t line) {
  const auto it = j.find(name);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + name + "'");
  if (!it->is_number()) throw ParseError(line, std::string("field '") + name + "' is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw RangeError(name, "line " + std::to_string(line) + ": not finite");
  return v;
}

RangeError range_error(const char* field, std::size_t line, const std::string& what) {
  return RangeError(field, "line " + std::to_string(line) + ": " + what);
}

// Applies the shared range rules and builds the box.
SphericalRect checked_rect(const RawRecord& r, std::size_t line, std::vector<std::string>* warnings) {
  const double theta = wrap_theta(r.theta);
  if (r.phi < 0.0 || r.phi > kPi) throw range_error("phi", line, "must be in [0, pi]");
  double fov[2] = {r.alpha, r.beta};
  const char* names[2] = {"alpha", "beta"};
  for (int k = 0; k < 2; ++k) {
    if (fov[k] < 0.0) throw range_error(names[k], line, "must be non-negative");
    if (fov[k] > kPi) throw range_error(names[k], line, "must be <= pi");
    if (fov[k] < kMinRecordFov) {
      if (warnings)
        warnings->push_back("line " + std::to_string(line) + ": " + names[k] + " " + format_number(fov[k]) +
                            " raised to " + format_number(kMinRecordFov));
      fov[k] = kMinRecordFov;
    }
  }
  return SphericalRect(theta, r.phi, fov[0], fov[1]);
}

bool is_blank(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

// Calls fn(object, line, scale) for every record line. An optional leading
// {"angle_unit": ...} line overrides the caller's unit.
template <typename Fn>
void for_each_object(std::istream& in, AngleUnit unit, Fn fn) {
  std::string text;
  std::size_t line = 0;
  double scale = to_radians(1.0, unit);
  bool first_content = true;
  while (std::getline(in, text)) {
    ++line;
    if (is_blank(text)) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    if (first_content && j.contains("angle_unit")) {
      first_content = false;
      const auto& u = j["angle_unit"];
      if (!u.is_string()) throw ParseError(line, "angle_unit must be a string");
      if (u == "degrees")
        scale = kDeg;
      else if (u == "radians")
        scale = 1.0;
      else
        throw ParseError(line, "angle_unit must be 'radians' or 'degrees'");
      continue;
    }
    first_content = false;
    fn(j, line, scale);
  }
  if (in.bad()) throw Error("read failure");
}

std::vector<RawRecord> read_raw(std::istream& in, bool want_score, std::vector<std::string>* warnings,
                                AngleUnit unit) {
  std::vector<RawRecord> out;
  for_each_object(in, unit, [&](const json& j, std::size_t line, double scale) {
    RawRecord r;
    const auto id = j.find("image_id");
    if (id == j.end()) throw ParseError(line, "missing field 'image_id'");
    if (id->is_string())
      r.image_id = id->get<std::string>();
    else if (id->is_number_integer())
      r.image_id = id->dump();
    else
      throw ParseError(line, "image_id must be a string or an integer");
    const auto cls = j.find("class_id");
    if (cls == j.end()) throw ParseError(line, "missing field 'class_id'");
    if (!cls->is_number_integer()) throw ParseError(line, "class_id must be an integer");
    const auto c = cls->get<std::int64_t>();
    if (c < 0 || c > std::numeric_limits<int>::max()) throw range_error("class_id", line, "must be a non-negative int");
    r.class_id = static_cast<int>(c);
    r.theta = number_field(j, "theta", line) * scale;
    r.phi = number_field(j, "phi", line) * scale;
    r.alpha = number_field(j, "alpha", line) * scale;
    r.beta = number_field(j, "beta", line) * scale;
    if (want_score) {
      const double s = number_field(j, "score", line);
      if (s < 0.0 || s > 1.0) throw range_error("score", line, "must be in [0, 1]");
      r.score = s;
    }
    r.bbox = checked_rect(r, line, warnings);
    out.push_back(std::move(r));
  });
  return out;
}

SphericalRect pair_member(const json& j, const char* name, std::size_t line, double scale) {
  const auto it = j.find(name);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + name + "'");
  if (!it->is_array() || it->size() != 4 || !std::all_of(it->begin(), it->end(), [](const json& v) {
        return v.is_number();
      }))
    throw ParseError(line, std::string("field '") + name + "' must be an array of 4 numbers");
  double v[4];
  for (int k = 0; k < 4; ++k) v[k] = (*it)[k].get<double>() * scale;
  try {
    return SphericalRect::wrapped(v[0], v[1], v[2], v[3]);
  } catch (const InvalidRect& e) {
    throw range_error(name, line, e.what());
  }
}

template <typename Out, typename Build>
std::vector<Out> read_records(std::istream& in, bool want_score, std::vector<std::string>* warnings, AngleUnit unit,
                              Build build) {
  std::vector<Out> out;
  for (const RawRecord& r : read_raw(in, want_score, warnings, unit)) out.push_back(build(r));
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return f;
}

json rect_json(const std::string& image_id, int class_id, const SphericalRect& b, AngleUnit unit) {
  json j;
  j["image_id"] = image_id;
  j["class_id"] = class_id;
  j["theta"] = from_radians(b.theta(), unit);
  j["phi"] = from_radians(b.phi(), unit);
  j["alpha"] = from_radians(b.alpha(), unit);
  j["beta"] = from_radians(b.beta(), unit);
  return j;
}

void write_header(std::ostream& out, AngleUnit unit) {
  if (unit == AngleUnit::kDegrees) out << R"({"angle_unit":"degrees"})" << '\n';
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string spec_label(const ErpImageSpec& s) { return std::to_string(s.width) + "x" + std::to_string(s.height); }

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string pad(const std::string& s, std::size_t width, bool left_align = false) {
  if (s.size() >= width) return s;
  return left_align ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string rect_label(const SphericalRect& r) {
  return "(" + format_number(r.theta()) + ", " + format_number(r.phi()) + ", " + format_number(r.alpha()) + ", " +
         format_number(r.beta()) + ")";
}

std::string cell_text(double v) { return std::isnan(v) ? "n/a" : format_number(v); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

double to_radians(double v, AngleUnit unit) { return unit == AngleUnit::kDegrees ? v * kDeg : v; }
double from_radians(double v, AngleUnit unit) { return unit == AngleUnit::kDegrees ? v / kDeg : v; }

std::vector<AnnotationRecord> read_annotations(std::istream& in, std::vector<std::string>* warnings, AngleUnit unit) {
  return read_records<AnnotationRecord>(in, false, warnings, unit, [](const RawRecord& r) {
    return AnnotationRecord{r.image_id, r.class_id, r.bbox};
  });
}

std::vector<DetectionRecord> read_detections(std::istream& in, std::vector<std::string>* warnings, AngleUnit unit) {
  return read_records<DetectionRecord>(in, true, warnings, unit, [](const RawRecord& r) {
    return DetectionRecord{r.image_id, r.class_id, *r.score, r.bbox};
  });
}

std::vector<AnnotationRecord> load_annotations(const std::string& path, std::vector<std::string>* warnings,
                                               AngleUnit unit) {
  auto f = open_input(path);
  return read_annotations(f, warnings, unit);
}

std::vector<DetectionRecord> load_detections(const std::string& path, std::vector<std::string>* warnings,
                                             AngleUnit unit) {
  auto f = open_input(path);
  return read_detections(f, warnings, unit);
}

std::vector<RectPair> read_pairs(std::istream& in, AngleUnit unit) {
  std::vector<RectPair> out;
  for_each_object(in, unit, [&](const json& j, std::size_t line, double scale) {
    out.emplace_back(pair_member(j, "b1", line, scale), pair_member(j, "b2", line, scale));
  });
  return out;
}

std::vector<RectPair> load_pairs(const std::string& path, AngleUnit unit) {
  auto f = open_input(path);
  return read_pairs(f, unit);
}

void write_pairs(const std::vector<RectPair>& pairs, std::ostream& out, AngleUnit unit) {
  write_header(out, unit);
  auto arr = [&](const SphericalRect& r) {
    return json::array({from_radians(r.theta(), unit), from_radians(r.phi(), unit), from_radians(r.alpha(), unit),
                        from_radians(r.beta(), unit)});
  };
  for (const auto& [a, b] : pairs) out << json{{"b1", arr(a)}, {"b2", arr(b)}}.dump() << '\n';
}

void write_annotations(const std::vector<AnnotationRecord>& records, std::ostream& out, AngleUnit unit) {
  write_header(out, unit);
  for (const auto& r : records) out << rect_json(r.image_id, r.class_id, r.bbox, unit).dump() << '\n';
}

void write_detections(const std::vector<DetectionRecord>& records, std::ostream& out, AngleUnit unit) {
  write_header(out, unit);
  for (const auto& r : records) {
    json j = rect_json(r.image_id, r.class_id, r.bbox, unit);
    j["score"] = r.score;
    out << j.dump() << '\n';
  }
}

MatchResult match_from_ious(const std::vector<double>& scores, const std::vector<double>& ious, std::size_t n_gt,
                            double threshold) {
  const std::size_t n_det = scores.size();
  MatchResult m;
  m.det_to_gt.assign(n_det, -1);
  m.det_iou.assign(n_det, 0.0);
  std::vector<std::size_t> order(n_det);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> taken(n_gt, false);
  for (const std::size_t d : order) {
    int best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (taken[g]) continue;
      const double v = ious[d * n_gt + g];
      if (std::isnan(v)) continue;
      if (v > best_iou || (best < 0 && v >= best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      m.det_to_gt[d] = best;
      m.det_iou[d] = best_iou;
    }
  }
  return m;
}

MatchResult match_detections(const std::vector<DetectionRecord>& dets, const std::vector<AnnotationRecord>& gts,
                             const CriterionId& criterion, double threshold) {
  std::vector<double> scores, ious;
  scores.reserve(dets.size());
  ious.reserve(dets.size() * gts.size());
  for (const auto& d : dets) {
    scores.push_back(d.score);
    for (const auto& g : gts) ious.push_back(evaluate_criterion(criterion, d.bbox, g.bbox));
  }
  return match_from_ious(scores, ious, gts.size(), threshold);
}

std::optional<double> average_precision(std::vector<std::pair<double, bool>> decisions, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  std::stable_sort(decisions.begin(), decisions.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t n = decisions.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += decisions[i].second ? 1 : 0;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::vector<double> EvalConfig::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw RangeError("iou_thresholds", "must not be empty");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw RangeError("iou_thresholds", "values must be in (0, 1)");
    if (i > 0 && !(t > iou_thresholds[i - 1])) throw RangeError("iou_thresholds", "must be strictly increasing");
  }
  if (max_dets_per_image == 0) throw RangeError("max_dets_per_image", "must be >= 1");
}

EvalReport evaluate(const std::vector<DetectionRecord>& dets, const std::vector<AnnotationRecord>& gts,
                    const EvalConfig& config) {
  config.validate();
  EvalReport report;
  report.criterion = criterion_name(config.criterion);
  report.thresholds = config.iou_thresholds;

  using Key = std::pair<std::string, int>;
  std::map<Key, std::vector<std::size_t>> gt_groups;
  std::map<int, std::size_t> gt_per_class;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gt_groups[{gts[i].image_id, gts[i].class_id}].push_back(i);
    ++gt_per_class[gts[i].class_id];
  }

  // Per image, keep the highest-scoring detections.
  std::map<std::string, std::vector<std::size_t>> per_image;
  for (std::size_t i = 0; i < dets.size(); ++i) per_image[dets[i].image_id].push_back(i);
  std::map<Key, std::vector<std::size_t>> det_groups;
  std::set<int> det_classes;
  for (auto& [image, idx] : per_image) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    if (idx.size() > config.max_dets_per_image) idx.resize(config.max_dets_per_image);
    std::sort(idx.begin(), idx.end());
    for (const std::size_t i : idx) {
      det_groups[{image, dets[i].class_id}].push_back(i);
      det_classes.insert(dets[i].class_id);
    }
  }
  for (const int c : det_classes)
    if (!gt_per_class.count(c)) report.excluded_classes.push_back(c);

  struct GroupIous {
    const std::vector<std::size_t>* det_idx;
    const std::vector<std::size_t>* gt_idx;
    std::vector<double> scores;
    std::vector<double> ious;
  };
  static const std::vector<std::size_t> kNone;
  std::map<Key, GroupIous> groups;
  for (const auto& [key, didx] : det_groups) {
    if (!gt_per_class.count(key.second)) continue;
    const auto git = gt_groups.find(key);
    const auto& gidx = git == gt_groups.end() ? kNone : git->second;
    GroupIous g{&didx, &gidx, {}, {}};
    for (const std::size_t d : didx) {
      g.scores.push_back(dets[d].score);
      for (const std::size_t k : gidx) g.ious.push_back(evaluate_criterion(config.criterion, dets[d].bbox, gts[k].bbox));
    }
    groups.emplace(key, std::move(g));
  }

  const std::size_t n_thr = config.iou_thresholds.size();
  for (const auto& [cls, n_gt] : gt_per_class) {
    ClassResult cr;
    cr.class_id = cls;
    cr.n_gt = n_gt;
    std::vector<std::vector<std::tuple<std::size_t, double, bool>>> decisions(n_thr);
    for (const auto& [key, g] : groups) {
      if (key.second != cls) continue;
      cr.n_det += g.det_idx->size();
      for (std::size_t t = 0; t < n_thr; ++t) {
        const double thr = config.iou_thresholds[t];
        const MatchResult m = match_from_ious(g.scores, g.ious, g.gt_idx->size(), thr);
        for (std::size_t i = 0; i < g.det_idx->size(); ++i) {
          const std::size_t d = (*g.det_idx)[i];
          const int gi = m.det_to_gt[i];
          decisions[t].emplace_back(d, dets[d].score, gi >= 0);
          report.matches.push_back({thr, key.first, cls, d, dets[d].score,
                                    gi >= 0 ? static_cast<int>((*g.gt_idx)[gi]) : -1, m.det_iou[i]});
        }
      }
    }
    for (std::size_t t = 0; t < n_thr; ++t) {
      // Rank ties follow the detection input order, independent of grouping.
      std::sort(decisions[t].begin(), decisions[t].end());
      std::vector<std::pair<double, bool>> ranked;
      ranked.reserve(decisions[t].size());
      for (const auto& [d, s, tp] : decisions[t]) ranked.emplace_back(s, tp);
      cr.ap.push_back(*average_precision(std::move(ranked), n_gt));
    }
    cr.ap_mean = std::accumulate(cr.ap.begin(), cr.ap.end(), 0.0) / static_cast<double>(n_thr);
    report.classes.push_back(std::move(cr));
  }

  auto class_mean = [&](auto value_of) {
    if (report.classes.empty()) return kNaN;
    double s = 0.0;
    for (const auto& c : report.classes) s += value_of(c);
    return s / static_cast<double>(report.classes.size());
  };
  auto threshold_index = [&](double t) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < n_thr; ++i)
      if (std::abs(config.iou_thresholds[i] - t) < 1e-9) return i;
    return std::nullopt;
  };
  report.ap = class_mean([](const ClassResult& c) { return c.ap_mean; });
  const auto i50 = threshold_index(0.5), i75 = threshold_index(0.75);
  report.ap50 = i50 ? class_mean([&](const ClassResult& c) { return c.ap[*i50]; }) : kNaN;
  report.ap75 = i75 ? class_mean([&](const ClassResult& c) { return c.ap[*i75]; }) : kNaN;
  return report;
}

std::string report_to_json(const EvalReport& report, bool include_matches) {
  json j;
  j["criterion"] = report.criterion;
  j["thresholds"] = report.thresholds;
  j["AP"] = number_or_null(report.ap);
  j["AP50"] = number_or_null(report.ap50);
  j["AP75"] = number_or_null(report.ap75);
  json classes = json::array();
  for (const auto& c : report.classes) {
    json cj;
    cj["class_id"] = c.class_id;
    cj["n_gt"] = c.n_gt;
    cj["n_det"] = c.n_det;
    cj["AP"] = c.ap_mean;
    cj["ap_per_threshold"] = c.ap;
    classes.push_back(std::move(cj));
  }
  j["classes"] = std::move(classes);
  j["excluded_classes"] = report.excluded_classes;
  if (include_matches) {
    json m = json::array();
    for (const auto& e : report.matches) {
      m.push_back({{"threshold", e.threshold},
                   {"image_id", e.image_id},
                   {"class_id", e.class_id},
                   {"det_index", e.det_index},
                   {"score", e.score},
                   {"gt_index", e.gt_index},
                   {"iou", e.iou}});
    }
    j["matches"] = std::move(m);
  }
  return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
  auto threshold_value = [&](const ClassResult& c, double t) {
    for (std::size_t i = 0; i < report.thresholds.size(); ++i)
      if (std::abs(report.thresholds[i] - t) < 1e-9) return c.ap[i];
    return kNaN;
  };
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"class", "n_gt", "n_det", "AP", "AP50", "AP75"});
  for (const auto& c : report.classes)
    rows.push_back({std::to_string(c.class_id), std::to_string(c.n_gt), std::to_string(c.n_det),
                    format_number(c.ap_mean), cell_text(threshold_value(c, 0.5)), cell_text(threshold_value(c, 0.75))});
  rows.push_back({"all", "", "", cell_text(report.ap), cell_text(report.ap50), cell_text(report.ap75)});
  std::vector<std::size_t> width(6, 0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
  std::ostringstream out;
  out << "criterion: " << report.criterion << '\n';
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "  " : "") << pad(r[k], width[k], k == 0);
    out << '\n';
  }
  if (!report.excluded_classes.empty()) {
    out << "classes without ground truth (excluded):";
    for (const int c : report.excluded_classes) out << ' ' << c;
    out << '\n';
  }
  return out.str();
}

std::vector<RectPair> random_overlapping_pairs(std::size_t n, std::uint64_t seed, double fov_lo, double fov_hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RectPair> pairs;
  pairs.reserve(n);
  while (pairs.size() < n) {
    const double theta = wrap_theta(kTwoPi * u(rng));
    const double phi = std::acos(std::clamp(2 * u(rng) - 1, -1.0, 1.0));
    const double a = fov_lo + (fov_hi - fov_lo) * u(rng);
    const double b = fov_lo + (fov_hi - fov_lo) * u(rng);
    const SphericalRect first(theta, phi, a, b);
    // Move the center inside the first box's own frame so the pair overlaps.
    const Frame f = local_frame(theta, phi);
    const double du = std::tan(0.4 * a * (2 * u(rng) - 1));
    const double dv = std::tan(0.4 * b * (2 * u(rng) - 1));
    const UnitVec3 c = UnitVec3::normalize(f.look.vec() + du * f.right.vec() + dv * f.up.vec());
    const auto [t2, p2] = vec_to_sph(c);
    const double a2 = std::min(kPi, a * (0.7 + 0.6 * u(rng)));
    const double b2 = std::min(kPi, b * (0.7 + 0.6 * u(rng)));
    pairs.emplace_back(first, SphericalRect(t2, p2, a2, b2));
  }
  return pairs;
}

std::vector<CriterionId> table_criteria() {
  return {PlanarRect{}, PolygonSampled{}, Circle{}, SphZone{}, PixelIntegral{}, UnbiasedSpherical{}};
}

std::vector<ErpImageSpec> table_resolutions() { return {{8192, 4096}, {10240, 5120}, {12288, 6144}}; }

ComparisonTable compare_criteria(const std::vector<RectPair>& pairs, const std::vector<CriterionId>& criteria,
                                 const std::vector<ErpImageSpec>& resolutions) {
  if (pairs.empty()) throw RangeError("pairs", "must not be empty");
  if (criteria.empty()) throw RangeError("criteria", "must not be empty");
  if (resolutions.empty()) throw RangeError("resolutions", "must not be empty");
  for (const auto& r : resolutions) r.validate();
  ComparisonTable table{pairs, resolutions, {}};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (const auto& c : criteria) {
      ComparisonRow row{p, criterion_name(c), {}};
      if (is_resolution_dependent(c)) {
        for (const auto& r : resolutions)
          row.values.push_back(evaluate_criterion(with_resolution(c, r), pairs[p].first, pairs[p].second));
      } else {
        row.values.assign(resolutions.size(), evaluate_criterion(c, pairs[p].first, pairs[p].second));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string comparison_to_csv(const ComparisonTable& table) {
  std::ostringstream out;
  out << "pair,criterion";
  for (const auto& r : table.resolutions) out << ',' << spec_label(r);
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.pair_index << ',' << row.criterion;
    for (const double v : row.values) out << ',' << cell_text(v);
    out << '\n';
  }
  return out.str();
}

std::string comparison_to_text(const ComparisonTable& table) {
  std::size_t name_w = std::string("criterion").size();
  std::size_t val_w = 0;
  for (const auto& r : table.resolutions) val_w = std::max(val_w, spec_label(r).size());
  for (const auto& row : table.rows) {
    name_w = std::max(name_w, row.criterion.size());
    for (const double v : row.values) val_w = std::max(val_w, cell_text(v).size());
  }
  std::ostringstream out;
  std::size_t current = static_cast<std::size_t>(-1);
  for (const auto& row : table.rows) {
    if (row.pair_index != current) {
      current = row.pair_index;
      if (current != 0) out << '\n';
      const auto& pr = table.pairs[current];
      out << "pair " << current << ": b1 = " << rect_label(pr.first) << ", b2 = " << rect_label(pr.second) << '\n';
      out << pad("criterion", name_w, true);
      for (const auto& r : table.resolutions) out << "  " << pad(spec_label(r), val_w);
      out << '\n';
    }
    out << pad(row.criterion, name_w, true);
    for (const double v : row.values) out << "  " << pad(cell_text(v), val_w);
    out << '\n';
  }
  return out.str();
}

BenchReport bench(const std::vector<CriterionId>& criteria, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw RangeError("n_pairs", "must be >= 1");
  std::vector<CriterionId> all = criteria;
  auto has = [&](auto pred) { return std::any_of(all.begin(), all.end(), pred); };
  const ErpImageSpec reference{8192, 4096};
  if (!has([](const CriterionId& c) { return std::holds_alternative<UnbiasedSpherical>(c); }))
    all.insert(all.begin(), UnbiasedSpherical{});
  if (!has([&](const CriterionId& c) {
        return std::holds_alternative<PixelIntegral>(c) && std::get<PixelIntegral>(c).spec == reference;
      }))
    all.push_back(PixelIntegral{reference});

  const auto pairs = random_overlapping_pairs(n_pairs, seed);
  BenchReport report;
  double ours = kNaN, integral = kNaN;
  volatile double sink = 0.0;
  for (const auto& c : all) {
    std::vector<double> ms;
    ms.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      const auto t0 = std::chrono::steady_clock::now();
      sink = sink + evaluate_criterion(c, a, b);
      const auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    BenchEntry e;
    e.criterion = criterion_name(c);
    e.resolution = "-";
    if (std::holds_alternative<PlanarRect>(c)) e.resolution = spec_label(std::get<PlanarRect>(c).spec);
    if (std::holds_alternative<Circle>(c)) e.resolution = spec_label(std::get<Circle>(c).spec);
    if (std::holds_alternative<PixelIntegral>(c)) e.resolution = spec_label(std::get<PixelIntegral>(c).spec);
    e.median_ms = median(ms);
    e.n_pairs = pairs.size();
    if (std::holds_alternative<UnbiasedSpherical>(c)) ours = e.median_ms;
    if (std::holds_alternative<PixelIntegral>(c) && std::get<PixelIntegral>(c).spec == reference) integral = e.median_ms;
    report.entries.push_back(std::move(e));
  }
  report.speedup = integral / ours;
  report.passed = report.speedup >= 10.0;
  return report;
}

std::string bench_to_text(const BenchReport& report) {
  std::size_t name_w = std::string("criterion").size(), res_w = std::string("resolution").size();
  for (const auto& e : report.entries) {
    name_w = std::max(name_w, e.criterion.size());
    res_w = std::max(res_w, e.resolution.size());
  }
  std::ostringstream out;
  out << pad("criterion", name_w, true) << "  " << pad("resolution", res_w, true) << "  median_ms  n_pairs\n";
  for (const auto& e : report.entries)
    out << pad(e.criterion, name_w, true) << "  " << pad(e.resolution, res_w, true) << "  "
        << format_number(e.median_ms) << "  " << e.n_pairs << '\n';
  out << "speedup (PixelIntegral 8192x4096 / Ours): " << format_number(report.speedup) << ' '
      << (report.passed ? "PASS" : "FAIL") << " (>= 10 required)\n";
  return out.str();
}

std::string bench_to_json(const BenchReport& report) {
  json j;
  json entries = json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"criterion", e.criterion}, {"resolution", e.resolution}, {"median_ms", e.median_ms},
                       {"n_pairs", e.n_pairs}});
  j["entries"] = std::move(entries);
  j["speedup"] = number_or_null(report.speedup);
  j["passed"] = report.passed;
  return j.dump(2) + "\n";
}

}  // namespace sphiou
