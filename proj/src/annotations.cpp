#include "cornerforge/annotations.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace cornerforge {

using nlohmann::json;

namespace {

std::unordered_map<std::string, const ImageInfo*> index_images(const std::vector<ImageInfo>& images) {
  std::unordered_map<std::string, const ImageInfo*> index;
  for (const auto& img : images) index.emplace(img.image_id, &img);
  return index;
}

const ImageInfo& lookup(const std::unordered_map<std::string, const ImageInfo*>& index, const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw Error(ErrorCode::MissingImage, "annotation references unknown image '" + id + "'");
  return *it->second;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

std::string yolo_line(std::uint16_t class_id, const BBox& box, std::uint32_t image_w, std::uint32_t image_h) {
  const double W = image_w, H = image_h;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%u %.6f %.6f %.6f %.6f", static_cast<unsigned>(class_id), (box.x + box.w / 2) / W,
                (box.y + box.h / 2) / H, box.w / W, box.h / H);
  return buf;
}

void export_yolo(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                 const std::filesystem::path& out_dir) {
  const auto index = index_images(images);
  std::map<std::string, std::string> contents;
  for (const auto& img : images) contents[img.image_id];
  for (const auto& a : annotations) {
    const ImageInfo& img = lookup(index, a.image_id);
    contents[a.image_id] += yolo_line(a.class_id, a.bbox, img.width, img.height) + "\n";
  }
  for (const auto& img : images) {
    const auto dir = img.split.empty() ? out_dir : out_dir / img.split;
    std::filesystem::create_directories(dir);
    write_text(dir / (img.image_id + ".txt"), contents[img.image_id]);
  }
}

json coco_document(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                   const ClassPalette& palette) {
  const auto index = index_images(images);
  std::unordered_map<std::string, std::size_t> numeric_id;
  json doc;
  doc["images"] = json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    numeric_id[img.image_id] = i + 1;
    doc["images"].push_back({{"id", i + 1},
                             {"name", img.image_id},
                             {"split", img.split},
                             {"file_name", img.file_name},
                             {"width", img.width},
                             {"height", img.height}});
  }
  doc["annotations"] = json::array();
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    lookup(index, a.image_id);
    if (!palette.has(a.class_id)) {
      throw Error(ErrorCode::UnknownClass, "annotation class " + std::to_string(a.class_id) + " not in palette");
    }
    doc["annotations"].push_back({{"id", i + 1},
                                  {"image_id", numeric_id[a.image_id]},
                                  {"category_id", a.class_id},
                                  {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                                  {"area", a.bbox.area()},
                                  {"iscrowd", 0},
                                  {"object_id", a.object_id},
                                  {"backend_id", a.backend_id},
                                  {"seed", a.seed}});
  }
  doc["categories"] = json::array();
  for (const auto& e : palette.entries()) {
    doc["categories"].push_back({{"id", e.class_id}, {"name", e.class_name}});
  }
  return doc;
}

void export_coco(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                 const ClassPalette& palette, const std::filesystem::path& out_path) {
  write_text(out_path, coco_document(annotations, images, palette).dump(2) + "\n");
}

CocoDataset coco_from_json(const json& doc) {
  CocoDataset out;
  std::unordered_map<std::int64_t, std::string> names;
  for (const auto& img : doc.at("images")) {
    ImageInfo info{img.at("name").get<std::string>(), img.value("split", std::string{}),
                   img.at("file_name").get<std::string>(), img.at("width").get<std::uint32_t>(),
                   img.at("height").get<std::uint32_t>()};
    names[img.at("id").get<std::int64_t>()] = info.image_id;
    out.images.push_back(std::move(info));
  }
  for (const auto& a : doc.at("annotations")) {
    const auto image = names.find(a.at("image_id").get<std::int64_t>());
    if (image == names.end()) throw Error(ErrorCode::MissingImage, "annotation references unknown image id");
    const auto& b = a.at("bbox");
    if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::ParseError, "bbox must have 4 numbers");
    out.annotations.push_back({image->second, a.at("category_id").get<std::uint16_t>(),
                               BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                               a.value("object_id", std::string{}), a.value("backend_id", std::string{}),
                               a.value("seed", std::uint64_t{0})});
  }
  for (const auto& c : doc.at("categories")) {
    const auto id = c.at("id").get<std::size_t>();
    if (out.categories.size() <= id) out.categories.resize(id + 1);
    out.categories[id] = c.at("name").get<std::string>();
  }
  return out;
}

CocoDataset import_coco(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return coco_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

json DatasetStats::to_json() const {
  json classes = json::array();
  for (const auto& [name, count] : per_class) classes.push_back({{"class", name}, {"instances", count}});
  return {{"per_class", classes}, {"per_split", per_split}, {"total", total}};
}

std::string DatasetStats::to_table() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %10s\n", "Class", "Instances");
  out << line;
  for (const auto& [name, count] : per_class) {
    std::snprintf(line, sizeof line, "%-24s %10zu\n", name.c_str(), count);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-24s %10zu\n", "Total", total);
  out << line << "\n";
  std::snprintf(line, sizeof line, "%-24s %10s\n", "Split", "Images");
  out << line;
  for (const auto& [split, count] : per_split) {
    std::snprintf(line, sizeof line, "%-24s %10zu\n", split.c_str(), count);
    out << line;
  }
  return out.str();
}

DatasetStats dataset_stats(const std::vector<AnnotationRecord>& annotations, const std::vector<ImageInfo>& images,
                           const ClassPalette& palette) {
  DatasetStats stats;
  for (const auto& e : palette.entries()) stats.per_class.emplace_back(e.class_name, 0);
  for (const auto& img : images) ++stats.per_split[img.split];
  for (const auto& a : annotations) {
    if (!palette.has(a.class_id)) {
      throw Error(ErrorCode::UnknownClass, "annotation class " + std::to_string(a.class_id) + " not in palette");
    }
    ++stats.per_class[a.class_id].second;
    ++stats.total;
  }
  return stats;
}

}  // namespace cornerforge
