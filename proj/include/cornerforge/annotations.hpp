#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cornerforge/imaging.hpp"

namespace cornerforge {

struct AnnotationRecord {
  std::string image_id;
  std::uint16_t class_id = 0;
  BBox bbox;  // background coordinates
  std::string object_id;
  std::string backend_id;
  std::uint64_t seed = 0;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct ImageInfo {
  std::string image_id;
  std::string split;
  std::string file_name;  // relative to the dataset root
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

/// One YOLO label line: "class cx cy w h", normalized, six decimals.
std::string yolo_line(std::uint16_t class_id, const BBox& box, std::uint32_t image_w, std::uint32_t image_h);

/// Writes <out_dir>/<split>/<image_id>.txt for every image (empty file for
/// images without annotations). MissingImage if an annotation names an
/// unknown image.
void export_yolo(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                 const std::filesystem::path& out_dir);

nlohmann::json coco_document(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                             const ClassPalette& palette);

void export_coco(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                 const ClassPalette& palette, const std::filesystem::path& out_path);

struct CocoDataset {
  std::vector<ImageInfo> images;
  std::vector<AnnotationRecord> annotations;
  std::vector<std::string> categories;  // index == class id
};

/// Inverse of export_coco. ParseError naming the file on malformed input.
CocoDataset import_coco(const std::filesystem::path& path);
CocoDataset coco_from_json(const nlohmann::json& doc);

struct DatasetStats {
  /// Palette order; one instance per image.
  std::vector<std::pair<std::string, std::size_t>> per_class;
  std::map<std::string, std::size_t> per_split;
  std::size_t total = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

DatasetStats dataset_stats(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                           const ClassPalette& palette);

}  // namespace cornerforge
