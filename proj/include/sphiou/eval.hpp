// Copyright 2026 The sphiou Authors
// SPDX-License-Identifier: Apache-2.0
//
// Detection evaluation on the sphere: JSON-lines ingestion, greedy matching
// under any IoU criterion, COCO-style 101-point AP, criteria comparison
// tables and a small timing harness.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sphiou/criteria.hpp"
#include "sphiou/sphere.hpp"

namespace sphiou {

enum class AngleUnit { kRadians, kDegrees };

/// v scaled by pi / 180 for degrees, unchanged for radians.
double to_radians(double v, AngleUnit unit);
double from_radians(double v, AngleUnit unit);

/// Ground-truth box in a dataset.
struct AnnotationRecord {
  std::string image_id;
  int class_id = 0;
  SphericalRect bbox{0, kPi / 2, 1, 1};
  bool operator==(const AnnotationRecord&) const = default;
};

struct DetectionRecord {
  std::string image_id;
  int class_id = 0;
  double score = 0.0;
  SphericalRect bbox{0, kPi / 2, 1, 1};
  bool operator==(const DetectionRecord&) const = default;
};

/// Smallest accepted fov; smaller non-negative values are raised to it.
inline constexpr double kMinRecordFov = 1e-6;

// JSON-lines records, one object per line:
//   {"image_id": "a", "class_id": 0, "theta": .., "phi": .., "alpha": .., "beta": ..[, "score": ..]}
// image_id may be a string or an integer. Angles are in `unit` unless the
// first line is {"angle_unit": "degrees"} or {"angle_unit": "radians"}.
// Blank lines are ignored. Malformed lines raise ParseError; out-of-range
// values raise RangeError naming the field.
std::vector<AnnotationRecord> read_annotations(std::istream& in, std::vector<std::string>* warnings = nullptr,
                                               AngleUnit unit = AngleUnit::kRadians);
std::vector<DetectionRecord> read_detections(std::istream& in, std::vector<std::string>* warnings = nullptr,
                                             AngleUnit unit = AngleUnit::kRadians);
/// File versions; throw Error when the file cannot be opened.
std::vector<AnnotationRecord> load_annotations(const std::string& path, std::vector<std::string>* warnings = nullptr,
                                               AngleUnit unit = AngleUnit::kRadians);
std::vector<DetectionRecord> load_detections(const std::string& path, std::vector<std::string>* warnings = nullptr,
                                             AngleUnit unit = AngleUnit::kRadians);

void write_annotations(const std::vector<AnnotationRecord>& records, std::ostream& out,
                       AngleUnit unit = AngleUnit::kRadians);
void write_detections(const std::vector<DetectionRecord>& records, std::ostream& out,
                      AngleUnit unit = AngleUnit::kRadians);

struct MatchResult {
  /// For each input detection, the index of its matched GT or -1.
  std::vector<int> det_to_gt;
  /// IoU with the matched GT (0 for unmatched detections).
  std::vector<double> det_iou;
};

/// Greedy one-to-one matching of the detections and ground truth of a single
/// image and class. Detections go in descending score order (input order on
/// ties); each takes the unmatched GT with the highest IoU >= threshold,
/// the earliest GT on equal IoU.
MatchResult match_detections(const std::vector<DetectionRecord>& dets, const std::vector<AnnotationRecord>& gts,
                             const CriterionId& criterion, double threshold);

/// Same matching from a precomputed row-major |dets| x |gts| IoU matrix.
MatchResult match_from_ious(const std::vector<double>& scores, const std::vector<double>& ious, std::size_t n_gt,
                            double threshold);

/// 101-point interpolated AP over score-ranked decisions (score, is_tp).
/// Returns nullopt when n_gt is zero.
std::optional<double> average_precision(std::vector<std::pair<double, bool>> decisions, std::size_t n_gt);

struct EvalConfig {
  CriterionId criterion = UnbiasedSpherical{};
  std::vector<double> iou_thresholds = default_thresholds();
  std::size_t max_dets_per_image = 100;

  /// 0.50, 0.55, ..., 0.95.
  static std::vector<double> default_thresholds();
  /// Throws RangeError unless thresholds are strictly increasing in (0, 1).
  void validate() const;
};

struct ClassResult {
  int class_id = 0;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  /// AP at each configured threshold.
  std::vector<double> ap;
  double ap_mean = 0.0;
};

struct MatchLogEntry {
  double threshold = 0.0;
  std::string image_id;
  int class_id = 0;
  /// Index into the detection list passed to evaluate().
  std::size_t det_index = 0;
  double score = 0.0;
  /// Index into the GT list, -1 for a false positive.
  int gt_index = -1;
  double iou = 0.0;
};

struct EvalReport {
  std::string criterion;
  std::vector<double> thresholds;
  std::vector<ClassResult> classes;
  /// Classes that only occur in detections; they take no part in the means.
  std::vector<int> excluded_classes;
  /// NaN when no class has ground truth (or the threshold is not configured).
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::vector<MatchLogEntry> matches;
};

EvalReport evaluate(const std::vector<DetectionRecord>& dets, const std::vector<AnnotationRecord>& gts,
                    const EvalConfig& config = {});

/// JSON document for the report; the match log is included on request.
std::string report_to_json(const EvalReport& report, bool include_matches = false);
/// Aligned text table, one row per class plus the aggregate.
std::string report_to_text(const EvalReport& report);

// Criteria comparison --------------------------------------------------------

using RectPair = std::pair<SphericalRect, SphericalRect>;

/// Overlapping random pairs: the first box uniform on the sphere, the second
/// a perturbed copy of it. Fovs are drawn from [fov_lo, fov_hi].
std::vector<RectPair> random_overlapping_pairs(std::size_t n, std::uint64_t seed, double fov_lo = 0.3,
                                               double fov_hi = 1.5);

// Pair files hold one {"b1": [theta, phi, alpha, beta], "b2": [...]} per line,
// with the same header and blank-line rules as record files.
std::vector<RectPair> read_pairs(std::istream& in, AngleUnit unit = AngleUnit::kRadians);
std::vector<RectPair> load_pairs(const std::string& path, AngleUnit unit = AngleUnit::kRadians);
void write_pairs(const std::vector<RectPair>& pairs, std::ostream& out, AngleUnit unit = AngleUnit::kRadians);

/// Rectangle, Polygon, Circle, SphIoU, PixelIntegral and Ours.
std::vector<CriterionId> table_criteria();
/// 8192x4096, 10240x5120, 12288x6144.
std::vector<ErpImageSpec> table_resolutions();

struct ComparisonRow {
  std::size_t pair_index = 0;
  std::string criterion;
  /// One value per resolution, NaN where the criterion is undefined.
  std::vector<double> values;
};

struct ComparisonTable {
  std::vector<RectPair> pairs;
  std::vector<ErpImageSpec> resolutions;
  std::vector<ComparisonRow> rows;
};

ComparisonTable compare_criteria(const std::vector<RectPair>& pairs, const std::vector<CriterionId>& criteria,
                                 const std::vector<ErpImageSpec>& resolutions);
std::string comparison_to_csv(const ComparisonTable& table);
std::string comparison_to_text(const ComparisonTable& table);

// Timing ---------------------------------------------------------------------

struct BenchEntry {
  std::string criterion;
  /// "WxH" for raster criteria, "-" otherwise.
  std::string resolution;
  double median_ms = 0.0;
  std::size_t n_pairs = 0;
};

struct BenchReport {
  std::vector<BenchEntry> entries;
  /// Median PixelIntegral(8192x4096) time over median analytical time.
  double speedup = 0.0;
  /// speedup >= 10.
  bool passed = false;
};

/// Median wall time per call for each criterion over n_pairs random pairs.
/// The analytical IoU and PixelIntegral at 8192x4096 are always included.
BenchReport bench(const std::vector<CriterionId>& criteria, std::size_t n_pairs, std::uint64_t seed = 0);
std::string bench_to_text(const BenchReport& report);
std::string bench_to_json(const BenchReport& report);

/// Shortest representation that parses back to the same double; integral
/// values keep a trailing ".0". NaN prints as "nan".
std::string format_number(double v);

}  // namespace sphiou
