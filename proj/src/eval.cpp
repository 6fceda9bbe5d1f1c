#include "cornerforge/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cornerforge/annotations.hpp"

namespace cornerforge {

using nlohmann::json;

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

MatchResult match_detections(std::span<const Detection> detections, std::span<const Detection> ground_truth,
                             double iou_threshold) {
  MatchResult out;
  out.ranked.resize(detections.size());
  std::iota(out.ranked.begin(), out.ranked.end(), std::size_t{0});
  std::stable_sort(out.ranked.begin(), out.ranked.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::unordered_map<std::string, std::vector<std::size_t>> gt_by_image;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) gt_by_image[ground_truth[g].image_id].push_back(g);
  std::vector<bool> gt_taken(ground_truth.size(), false);

  out.ranked_tp.reserve(detections.size());
  for (const std::size_t d : out.ranked) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    if (auto it = gt_by_image.find(detections[d].image_id); it != gt_by_image.end()) {
      for (const std::size_t g : it->second) {
        if (gt_taken[g]) continue;
        const double v = iou(detections[d].bbox, ground_truth[g].bbox);
        if (v >= iou_threshold && (!best || v > best_iou)) {
          best = g;
          best_iou = v;
        }
      }
    }
    if (best) {
      gt_taken[*best] = true;
      out.matches.emplace_back(d, *best);
      out.ranked_tp.push_back(true);
    } else {
      out.false_positives.push_back(d);
      out.ranked_tp.push_back(false);
    }
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    if (!gt_taken[g]) out.false_negatives.push_back(g);
  }
  return out;
}

std::optional<double> average_precision(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  const std::size_t n = ranked_tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += ranked_tp[k] ? 1 : 0;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  // Precision envelope: best precision at any recall >= this one.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::vector<std::uint16_t> EvalReport::class_ids() const {
  std::vector<std::uint16_t> ids;
  for (const auto& c : per_class) ids.push_back(c.class_id);
  return ids;
}

EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<Detection>& ground_truth,
                    const std::optional<std::vector<std::uint16_t>>& class_ids, double report_confidence_threshold) {
  for (const auto& d : detections) {
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw Error(ErrorCode::ParseError, "detection confidence outside [0, 1] for image '" + d.image_id + "'");
    }
  }
  std::set<std::uint16_t> classes;
  if (class_ids) {
    classes.insert(class_ids->begin(), class_ids->end());
    for (const auto* set : {&detections, &ground_truth}) {
      for (const auto& d : *set) {
        if (!classes.count(d.class_id)) {
          throw Error(ErrorCode::UnknownClassId, "class id " + std::to_string(d.class_id) + " on image '" +
                                                     d.image_id + "' is not in the class set");
        }
      }
    }
  } else {
    for (const auto& d : ground_truth) classes.insert(d.class_id);
    for (const auto& d : detections) classes.insert(d.class_id);
  }

  EvalReport report;
  report.report_confidence_threshold = report_confidence_threshold;
  if (ground_truth.empty()) report.warnings.push_back("EmptyGroundTruth: no ground-truth boxes; AP and recall undefined");

  double map_sum = 0.0, map50_sum = 0.0;
  std::size_t map_n = 0, map50_n = 0;
  for (const std::uint16_t cls : classes) {
    std::vector<Detection> dets, gts;
    for (const auto& d : detections) {
      if (d.class_id == cls) dets.push_back(d);
    }
    for (const auto& g : ground_truth) {
      if (g.class_id == cls) gts.push_back(g);
    }
    ClassResult cr;
    cr.class_id = cls;
    cr.num_gt = gts.size();
    cr.num_detections = dets.size();
    for (std::size_t t = 0; t < kIouThresholds.size(); ++t) {
      cr.ap[t] = average_precision(match_detections(dets, gts, kIouThresholds[t]).ranked_tp, gts.size());
      if (cr.ap[t]) {
        map_sum += *cr.ap[t];
        ++map_n;
      }
    }
    if (cr.ap[0]) {
      map50_sum += *cr.ap[0];
      ++map50_n;
    }

    std::vector<Detection> confident;
    for (const auto& d : dets) {
      if (d.confidence >= report_confidence_threshold) confident.push_back(d);
    }
    const auto m = match_detections(confident, gts, report.report_iou_threshold);
    report.tp += m.matches.size();
    report.fp += m.false_positives.size();
    report.fn += m.false_negatives.size();
    report.per_class.push_back(cr);
  }

  if (map_n > 0) report.map = {map_sum / static_cast<double>(map_n), true};
  if (map50_n > 0) report.map50 = {map50_sum / static_cast<double>(map50_n), true};
  if (report.tp + report.fp > 0) {
    report.precision = {static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fp), true};
  }
  if (report.tp + report.fn > 0) {
    report.recall = {static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn), true};
  }
  return report;
}

namespace {

json metric_json(const Metric& m) { return {{"value", m.value}, {"defined", m.defined}}; }

Metric metric_from(const json& j) { return {j.at("value").get<double>(), j.at("defined").get<bool>()}; }

std::string fmt3(const Metric& m) {
  if (!m.defined) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", m.value);
  return buf;
}

}  // namespace

json EvalReport::to_json() const {
  json classes = json::array();
  for (const auto& c : per_class) {
    json aps = json::array();
    for (const auto& ap : c.ap) aps.push_back(ap ? json(*ap) : json(nullptr));
    classes.push_back({{"class_id", c.class_id}, {"num_gt", c.num_gt}, {"num_detections", c.num_detections}, {"ap", aps}});
  }
  return {{"conventions", "COCO: 101-point interpolated AP, IoU 0.50:0.05:0.95; precision/recall micro-averaged"},
          {"iou_thresholds", kIouThresholds},
          {"per_class", classes},
          {"mAP", metric_json(map)},
          {"mAP50", metric_json(map50)},
          {"precision", metric_json(precision)},
          {"recall", metric_json(recall)},
          {"counts", {{"tp", tp}, {"fp", fp}, {"fn", fn}}},
          {"report_confidence_threshold", report_confidence_threshold},
          {"report_iou_threshold", report_iou_threshold},
          {"warnings", warnings}};
}

EvalReport EvalReport::from_json(const json& doc) {
  try {
    EvalReport r;
    for (const auto& c : doc.at("per_class")) {
      ClassResult cr;
      cr.class_id = c.at("class_id").get<std::uint16_t>();
      cr.num_gt = c.at("num_gt").get<std::size_t>();
      cr.num_detections = c.value("num_detections", std::size_t{0});
      const auto& aps = c.at("ap");
      for (std::size_t t = 0; t < cr.ap.size() && t < aps.size(); ++t) {
        if (!aps[t].is_null()) cr.ap[t] = aps[t].get<double>();
      }
      r.per_class.push_back(cr);
    }
    r.map = metric_from(doc.at("mAP"));
    r.map50 = metric_from(doc.at("mAP50"));
    r.precision = metric_from(doc.at("precision"));
    r.recall = metric_from(doc.at("recall"));
    const auto& counts = doc.at("counts");
    r.tp = counts.at("tp").get<std::size_t>();
    r.fp = counts.at("fp").get<std::size_t>();
    r.fn = counts.at("fn").get<std::size_t>();
    r.report_confidence_threshold = doc.at("report_confidence_threshold").get<double>();
    r.report_iou_threshold = doc.value("report_iou_threshold", 0.5);
    r.warnings = doc.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("eval report: ") + e.what());
  }
}

std::string EvalReport::to_text(bool with_reference, const std::vector<std::string>& class_names) const {
  std::ostringstream out;
  char line[160];
  out << "Detection metrics (COCO conventions: 101-point interpolated AP, IoU 0.50:0.05:0.95)\n";
  std::snprintf(line, sizeof line, "Precision/recall at IoU %.2f, confidence >= %.2f\n\n", report_iou_threshold,
                report_confidence_threshold);
  out << line;
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s\n", "Class", "GT", "Dets", "AP50", "AP");
  out << line;
  for (const auto& c : per_class) {
    const std::string name =
        c.class_id < class_names.size() ? class_names[c.class_id] : "class " + std::to_string(c.class_id);
    double sum = 0;
    std::size_t k = 0;
    for (const auto& ap : c.ap) {
      if (ap) {
        sum += *ap;
        ++k;
      }
    }
    const Metric ap50{c.ap[0].value_or(0.0), c.ap[0].has_value()};
    const Metric ap{k ? sum / static_cast<double>(k) : 0.0, k > 0};
    std::snprintf(line, sizeof line, "%-24s %8zu %8zu %8s %8s\n", name.c_str(), c.num_gt, c.num_detections,
                  fmt3(ap50).c_str(), fmt3(ap).c_str());
    out << line;
  }
  out << "\n";
  std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10s\n", "mAP", "mAP@50", "Precision", "Recall");
  out << line;
  std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10s\n", fmt3(map).c_str(), fmt3(map50).c_str(),
                fmt3(precision).c_str(), fmt3(recall).c_str());
  out << line;
  std::snprintf(line, sizeof line, "TP %zu  FP %zu  FN %zu\n", tp, fp, fn);
  out << line;
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  if (with_reference) {
    out << "\nPublished reference (real-data detector; not reproduced by this run):\n";
    std::snprintf(line, sizeof line, "%-10s %8s %8s %10s %8s\n", "Dataset", "mAP", "mAP@50", "Precision", "Recall");
    out << line;
    for (const auto& r : kPublishedReference) {
      std::snprintf(line, sizeof line, "%-10s %8.3f %8.3f %10.3f %8.3f\n", r.dataset, r.map, r.map50, r.precision,
                    r.recall);
      out << line;
    }
  }
  return out.str();
}

DomainGapReport domain_gap_report(const EvalReport& real, const EvalReport& synth) {
  auto real_ids = real.class_ids();
  auto synth_ids = synth.class_ids();
  std::sort(real_ids.begin(), real_ids.end());
  std::sort(synth_ids.begin(), synth_ids.end());
  if (real_ids != synth_ids) throw Error(ErrorCode::ClassSetMismatch, "reports cover different class sets");

  DomainGapReport report;
  auto row = [](std::string name, const Metric& r, const Metric& s) {
    return GapRow{std::move(name), r, s, s.value - r.value, r.defined && s.defined};
  };
  report.rows.push_back(row("mAP", real.map, synth.map));
  report.rows.push_back(row("mAP@50", real.map50, synth.map50));
  report.rows.push_back(row("precision", real.precision, synth.precision));
  report.rows.push_back(row("recall", real.recall, synth.recall));
  return report;
}

json DomainGapReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"metric", r.metric},
                         {"real", metric_json(r.real)},
                         {"synthetic", metric_json(r.synth)},
                         {"delta", r.delta},
                         {"delta_defined", r.delta_defined}});
  }
  return {{"delta_convention", "synthetic - real"}, {"rows", rows_json}};
}

std::string DomainGapReport::to_text() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", "Metric", "Real", "Synthetic", "Delta");
  out << line;
  for (const auto& r : rows) {
    char delta[32] = "n/a";
    if (r.delta_defined) std::snprintf(delta, sizeof delta, "%+.3f", r.delta);
    std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", r.metric.c_str(), fmt3(r.real).c_str(),
                  fmt3(r.synth).c_str(), delta);
    out << line;
  }
  return out.str();
}

namespace {

Detection detection_from(const json& j, bool require_confidence) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "line is not a JSON object");
  Detection d;
  if (!j.contains("image") || !j["image"].is_string()) throw Error(ErrorCode::ParseError, "missing string 'image'");
  d.image_id = j["image"].get<std::string>();
  if (!j.contains("class_id") || !j["class_id"].is_number_integer()) {
    throw Error(ErrorCode::ParseError, "missing integer 'class_id'");
  }
  const auto cls = j["class_id"].get<std::int64_t>();
  if (cls < 0 || cls > 0xFFFF) throw Error(ErrorCode::ParseError, "class_id out of range");
  d.class_id = static_cast<std::uint16_t>(cls);
  const auto bbox = j.find("bbox");
  if (bbox == j.end() || !bbox->is_array() || bbox->size() != 4) {
    throw Error(ErrorCode::ParseError, "'bbox' must be [x, y, w, h]");
  }
  for (const auto& v : *bbox) {
    if (!v.is_number()) throw Error(ErrorCode::ParseError, "'bbox' entries must be numbers");
  }
  d.bbox = {(*bbox)[0].get<double>(), (*bbox)[1].get<double>(), (*bbox)[2].get<double>(), (*bbox)[3].get<double>()};
  if (!(d.bbox.w > 0 && d.bbox.h > 0)) throw Error(ErrorCode::ParseError, "bbox width and height must be > 0");
  if (j.contains("conf")) {
    if (!j["conf"].is_number()) throw Error(ErrorCode::ParseError, "'conf' must be a number");
    d.confidence = j["conf"].get<double>();
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw Error(ErrorCode::ParseError, "'conf' outside [0, 1]");
  } else if (require_confidence) {
    throw Error(ErrorCode::ParseError, "missing 'conf'");
  }
  return d;
}

}  // namespace

std::vector<Detection> read_detections_jsonl(const std::filesystem::path& path, bool require_confidence) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(detection_from(json::parse(line), require_confidence));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

GroundTruthSet read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  // A COCO document is a single object with an "images" array; anything
  // else is treated as JSONL.
  std::optional<json> whole;
  try {
    whole = json::parse(in);
  } catch (const json::exception&) {
  }
  GroundTruthSet out;
  if (whole && whole->is_object() && whole->contains("images")) {
    CocoDataset coco;
    try {
      coco = coco_from_json(*whole);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    for (const auto& img : coco.images) out.images.push_back(img.image_id);
    for (const auto& a : coco.annotations) out.boxes.push_back({a.image_id, a.class_id, a.bbox, 1.0});
    std::vector<std::uint16_t> ids;
    for (std::size_t i = 0; i < coco.categories.size(); ++i) ids.push_back(static_cast<std::uint16_t>(i));
    out.class_ids = std::move(ids);
    out.class_names = coco.categories;
    return out;
  }
  out.boxes = read_detections_jsonl(path, false);
  std::set<std::string> images;
  for (const auto& b : out.boxes) images.insert(b.image_id);
  out.images.assign(images.begin(), images.end());
  return out;
}

}  // namespace cornerforge
