#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cornerforge/imaging.hpp"

namespace cornerforge {

/// A predicted box (or a ground-truth box, with confidence 1).
struct Detection {
  std::string image_id;
  std::uint16_t class_id = 0;
  BBox bbox;
  double confidence = 1.0;
};

/// COCO IoU grid 0.50:0.05:0.95.
inline constexpr std::array<double, 10> kIouThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                          0.75, 0.80, 0.85, 0.90, 0.95};
inline constexpr double kDefaultReportConfidence = 0.25;

/// Intersection over union of [x, x+w) x [y, y+h) boxes.
double iou(const BBox& a, const BBox& b);

struct MatchResult {
  /// Detection indices in processing order (confidence descending, stable).
  std::vector<std::size_t> ranked;
  /// ranked_tp[k] is true when detection ranked[k] matched a ground truth.
  std::vector<bool> ranked_tp;
  /// (detection index, ground-truth index)
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> false_positives;
  std::vector<std::size_t> false_negatives;
};

/// Greedy matching for a single class. Each detection takes the unmatched
/// ground truth in its image with the highest IoU >= threshold; on equal IoU
/// the earlier ground truth wins.
MatchResult match_detections(std::span<const Detection> detections, std::span<const Detection> ground_truth,
                             double iou_threshold);

/// 101-point interpolated AP. nullopt when num_gt == 0.
std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t num_gt);

/// Value plus a flag; undefined metrics are reported as 0 with defined=false.
struct Metric {
  double value = 0.0;
  bool defined = false;
};

struct ClassResult {
  std::uint16_t class_id = 0;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::array<std::optional<double>, kIouThresholds.size()> ap{};
};

struct EvalReport {
  std::vector<ClassResult> per_class;
  Metric map;
  Metric map50;
  Metric precision;
  Metric recall;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double report_confidence_threshold = kDefaultReportConfidence;
  double report_iou_threshold = 0.50;
  std::vector<std::string> warnings;

  std::vector<std::uint16_t> class_ids() const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& doc);
  /// Human-readable table. With `with_reference` the published real-vs-
  /// generated values are appended as a non-reproducible footnote.
  std::string to_text(bool with_reference = false, const std::vector<std::string>& class_names = {}) const;
};

/// When class_ids is given, any box with another class is UnknownClassId.
/// Otherwise the class set is the union of classes seen in either input.
EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<Detection>& ground_truth,
                    const std::optional<std::vector<std::uint16_t>>& class_ids = std::nullopt,
                    double report_confidence_threshold = kDefaultReportConfidence);

struct GapRow {
  std::string metric;
  Metric real;
  Metric synth;
  double delta = 0.0;  // synth - real
  bool delta_defined = false;
};

struct DomainGapReport {
  std::vector<GapRow> rows;  // mAP, mAP@50, precision, recall
  nlohmann::json to_json() const;
  std::string to_text() const;
};

DomainGapReport domain_gap_report(const EvalReport& real, const EvalReport& synth);

/// Published detector results on real ("Inhouse") and generated data.
struct PublishedReference {
  const char* dataset;
  double map;
  double map50;
  double precision;
  double recall;
};
inline constexpr std::array<PublishedReference, 2> kPublishedReference = {{
    {"Inhouse", 0.701, 0.805, 0.866, 0.654},
    {"Generated", 0.329, 0.600, 0.542, 0.713},
}};

/// Reads JSONL {"image","class_id","bbox":[x,y,w,h],"conf"}. With
/// require_confidence=false, "conf" is optional and defaults to 1. Errors
/// carry "path:line".
std::vector<Detection> read_detections_jsonl(const std::filesystem::path& path, bool require_confidence = true);

struct GroundTruthSet {
  std::vector<Detection> boxes;
  /// Known images (from COCO); images without boxes still count.
  std::vector<std::string> images;
  /// From COCO categories when available.
  std::optional<std::vector<std::uint16_t>> class_ids;
  std::vector<std::string> class_names;
};

/// Accepts the COCO export or a JSONL file in the prediction shape.
GroundTruthSet read_ground_truth(const std::filesystem::path& path);

}  // namespace cornerforge
