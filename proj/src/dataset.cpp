#include "cornerforge/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cornerforge/conditioning.hpp"
#include "cornerforge/image_io.hpp"
#include "cornerforge/log.hpp"
#include "cornerforge/protocol.hpp"
#include "cornerforge/rng.hpp"

namespace cornerforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Fixed stream ids for run-level draws, kept apart from item indices.
constexpr std::uint64_t kBackgroundStream = 0xB6'0000'0000'0001ULL;
constexpr std::uint64_t kQuotaStream = 0xB6'0000'0000'0002ULL;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  return first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

json region_json(const CropRegion& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

CropRegion region_from(const json& j) {
  return {j.at("x").get<std::int64_t>(), j.at("y").get<std::int64_t>(), j.at("w").get<std::int64_t>(),
          j.at("h").get<std::int64_t>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

std::string_view to_string(PoolId id) { return id == PoolId::Train ? "train_pool" : "heldout_pool"; }

static PoolId pool_id_from(std::string_view s) {
  if (s == "train_pool") return PoolId::Train;
  if (s == "heldout_pool") return PoolId::Heldout;
  throw Error(ErrorCode::ParseError, "unknown pool id '" + std::string(s) + "'");
}

ObjectPool ObjectPool::load_csv(const fs::path& path, PoolId id, const ClassPalette& palette) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open pool file " + path.string());
  ObjectPool pool;
  pool.id = id;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.push_back(trim(col));
    if (line_no == 1 && !cols.empty() && cols[0] == "object_id") continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 3) throw Error(ErrorCode::ParseError, where + ": expected object_id,class_id,mask_path");
    std::uint16_t class_id = 0;
    try {
      std::size_t used = 0;
      const long v = std::stol(cols[1], &used);
      if (used != cols[1].size() || v < 0 || v > 0xFFFF) throw std::out_of_range("class id");
      class_id = static_cast<std::uint16_t>(v);
    } catch (const std::exception&) {
      // Also accept class names.
      const auto by_name = palette.find(cols[1]);
      if (!by_name) throw Error(ErrorCode::UnknownClass, where + ": unknown class '" + cols[1] + "'");
      class_id = *by_name;
    }
    if (!palette.has(class_id)) throw Error(ErrorCode::UnknownClass, where + ": class id not in palette");
    if (!seen.insert(cols[0]).second) throw Error(ErrorCode::ParseError, where + ": duplicate object_id " + cols[0]);
    fs::path mask = cols[2];
    if (mask.is_relative()) mask = path.parent_path() / mask;
    pool.entries.push_back({cols[0], class_id, mask.lexically_normal()});
  }
  return pool;
}

const PoolEntry* ObjectPool::find(std::string_view object_id) const {
  for (const auto& e : entries) {
    if (e.object_id == object_id) return &e;
  }
  return nullptr;
}

std::vector<BackgroundEntry> scan_backgrounds(const fs::path& dir, std::uint32_t crop_size,
                                              std::vector<std::string>* rejected) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "background directory " + dir.string() + " not found");
  std::vector<BackgroundEntry> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = lower(entry.path().extension().string());
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
    const auto id = entry.path().lexically_relative(dir).generic_string();
    ImageDims dims;
    try {
      dims = read_image_dims(entry.path());
    } catch (const Error& e) {
      if (rejected) rejected->push_back(id + ": " + e.what());
      continue;
    }
    if (dims.width < crop_size || dims.height < crop_size) {
      if (rejected) {
        rejected->push_back(id + ": " + std::to_string(dims.width) + "x" + std::to_string(dims.height) +
                            " is smaller than crop " + std::to_string(crop_size));
      }
      continue;
    }
    out.push_back({id, entry.path().lexically_normal(), {dims.width, dims.height}});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<SplitSpec> default_splits(std::size_t train, std::size_t val, std::size_t test) {
  return {{"train", train, PoolId::Train}, {"val", val, PoolId::Heldout}, {"test", test, PoolId::Heldout}};
}

const BackgroundEntry& GenerationManifest::background(std::string_view id) const {
  for (const auto& b : backgrounds) {
    if (b.id == id) return b;
  }
  throw Error(ErrorCode::MissingImage, "background '" + std::string(id) + "' not in manifest");
}

const ObjectPool& GenerationManifest::pool_for(std::string_view split) const {
  for (const auto& s : splits) {
    if (s.name == split) return s.pool == PoolId::Train ? train_pool : heldout_pool;
  }
  throw Error(ErrorCode::ParseError, "split '" + std::string(split) + "' not in manifest");
}

const PoolEntry& GenerationManifest::object(std::string_view split, std::string_view object_id) const {
  const auto* entry = pool_for(split).find(object_id);
  if (!entry) throw Error(ErrorCode::EmptyPool, "object '" + std::string(object_id) + "' not in split pool");
  return *entry;
}

GenerationManifest plan_dataset(const PlanConfig& cfg, const std::vector<BackgroundEntry>& backgrounds,
                                const ObjectPool& train_pool, const ObjectPool& heldout_pool,
                                std::uint64_t master_seed) {
  cfg.placement.validate();
  cfg.backend.validate();

  GenerationManifest m;
  m.master_seed = master_seed;
  m.rng_algorithm = std::string(kRngAlgorithm);
  m.palette = cfg.palette;
  m.backend = cfg.backend;
  m.placement = cfg.placement;
  m.merge_mode = cfg.merge_mode;
  m.class_quota = cfg.class_quota;
  m.train_pool = train_pool;
  m.train_pool.id = PoolId::Train;
  m.heldout_pool = heldout_pool;
  m.heldout_pool.id = PoolId::Heldout;

  std::size_t total = 0;
  std::vector<std::size_t> active;
  std::set<std::string> names;
  for (std::size_t s = 0; s < cfg.splits.size(); ++s) {
    if (!names.insert(cfg.splits[s].name).second) {
      throw Error(ErrorCode::ConfigInvalid, "duplicate split '" + cfg.splits[s].name + "'");
    }
    total += cfg.splits[s].size;
    if (cfg.splits[s].size > 0) active.push_back(s);
  }

  for (const auto& s : cfg.splits) {
    m.splits.push_back({s.name, s.pool, s.size, {}});
    const auto& pool = s.pool == PoolId::Train ? train_pool : heldout_pool;
    if (s.size > 0 && pool.entries.empty()) {
      throw Error(ErrorCode::EmptyPool, "split '" + s.name + "' draws from empty " + std::string(to_string(s.pool)));
    }
  }

  // Split hygiene: the heldout pool must not share objects with the train pool.
  {
    std::set<std::string> train_ids;
    for (const auto& e : train_pool.entries) train_ids.insert(e.object_id);
    for (const auto& e : heldout_pool.entries) {
      if (train_ids.count(e.object_id)) {
        throw Error(ErrorCode::ConfigInvalid, "object '" + e.object_id + "' is in both train and heldout pools");
      }
    }
  }
  if (total == 0) return m;

  // Backgrounds: seeded shuffle, then largest-remainder apportioning by split
  // size with at least one background per non-empty split.
  if (backgrounds.size() < active.size()) {
    throw Error(ErrorCode::InsufficientBackgrounds, std::to_string(backgrounds.size()) + " backgrounds for " +
                                                        std::to_string(active.size()) + " non-empty splits");
  }
  std::vector<std::size_t> order(backgrounds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Rng rng(hash64(master_seed, kBackgroundStream));
    shuffle(order, rng);
  }
  std::vector<std::size_t> share(cfg.splits.size(), 0);
  const std::size_t spare = backgrounds.size() - active.size();
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, split)
  std::size_t assigned = 0;
  for (auto s : active) {
    const std::size_t exact_num = spare * cfg.splits[s].size;
    share[s] = 1 + exact_num / total;
    assigned += exact_num / total;
    remainders.emplace_back(exact_num % total, s);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < spare; ++k, ++assigned) ++share[remainders[k].second];

  std::size_t cursor = 0;
  for (std::size_t s = 0; s < cfg.splits.size(); ++s) {
    for (std::size_t k = 0; k < share[s]; ++k) m.splits[s].background_ids.push_back(backgrounds[order[cursor++]].id);
    std::sort(m.splits[s].background_ids.begin(), m.splits[s].background_ids.end());
  }
  std::unordered_map<std::string, const BackgroundEntry*> bg_by_id;
  for (const auto& b : backgrounds) bg_by_id[b.id] = &b;
  for (const auto& s : m.splits) {
    for (const auto& id : s.background_ids) m.backgrounds.push_back(*bg_by_id.at(id));
  }
  std::sort(m.backgrounds.begin(), m.backgrounds.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  // Class labels from the quota table, shuffled over the whole run.
  std::vector<std::uint16_t> labels;
  if (cfg.class_quota) {
    std::size_t quota_total = 0;
    for (const auto& [cls, count] : *cfg.class_quota) {
      if (!cfg.palette.has(cls)) throw Error(ErrorCode::ConfigInvalid, "quota names unknown class " + std::to_string(cls));
      quota_total += count;
      labels.insert(labels.end(), count, cls);
    }
    if (quota_total != total) {
      throw Error(ErrorCode::ConfigInvalid, "quota sums to " + std::to_string(quota_total) + " but splits hold " +
                                                std::to_string(total) + " items");
    }
    Rng rng(hash64(master_seed, kQuotaStream));
    shuffle(labels, rng);
  }

  auto by_class = [](const ObjectPool& pool) {
    std::map<std::uint16_t, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < pool.entries.size(); ++i) index[pool.entries[i].class_id].push_back(i);
    return index;
  };
  const auto train_by_class = by_class(train_pool);
  const auto heldout_by_class = by_class(heldout_pool);

  std::map<fs::path, BinaryMask> masks;
  auto mask_for = [&](const PoolEntry& e) -> const BinaryMask& {
    auto it = masks.find(e.mask_path);
    if (it == masks.end()) {
      auto mask = read_mask(e.mask_path);
      if (mask.empty()) throw Error(ErrorCode::EmptyMask, "mask asset " + e.mask_path.string() + " is empty");
      it = masks.emplace(e.mask_path, std::move(mask)).first;
    }
    return it->second;
  };

  std::size_t index = 0;
  for (std::size_t s = 0; s < cfg.splits.size(); ++s) {
    const auto& spec = cfg.splits[s];
    const auto& pool = spec.pool == PoolId::Train ? train_pool : heldout_pool;
    const auto& pool_by_class = spec.pool == PoolId::Train ? train_by_class : heldout_by_class;
    const auto& bg_ids = m.splits[s].background_ids;
    for (std::size_t k = 0; k < spec.size; ++k, ++index) {
      const std::uint64_t item_seed = hash64(master_seed, index);
      Rng pick(hash64(item_seed, 0));
      const auto& bg = *bg_by_id.at(bg_ids[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(bg_ids.size()) - 1))]);

      std::size_t object_index;
      if (cfg.class_quota) {
        const auto it = pool_by_class.find(labels[index]);
        if (it == pool_by_class.end()) {
          throw Error(ErrorCode::EmptyPool, std::string(to_string(spec.pool)) + " has no objects of class '" +
                                                cfg.palette.at(labels[index]).class_name + "'");
        }
        object_index = it->second[static_cast<std::size_t>(
            pick.uniform_int(0, static_cast<std::int64_t>(it->second.size()) - 1))];
      } else {
        object_index =
            static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(pool.entries.size()) - 1));
      }
      const auto& object = pool.entries[object_index];

      char id[64];
      std::snprintf(id, sizeof id, "%s_%06zu", spec.name.c_str(), k);
      ManifestItem item;
      item.item_id = id;
      item.split = spec.name;
      item.background_id = bg.id;
      item.placement = sample_placement(item_seed, bg.dims, {object.object_id, object.class_id, mask_for(object)},
                                        cfg.placement);
      if (!cfg.backend.mask_conditioned()) item.prompt = build_prompt(cfg.palette.at(object.class_id).class_name);
      m.items.push_back(std::move(item));
    }
  }
  return m;
}

json manifest_to_json(const GenerationManifest& m) {
  json doc;
  doc["schema_version"] = m.schema_version;
  doc["master_seed"] = m.master_seed;
  doc["rng_algorithm"] = m.rng_algorithm;
  doc["rng_description"] =
      "std::mt19937_64 seeded with the item seed; uniform_int by rejection on raw 64-bit outputs; "
      "uniform01 = (u64 >> 11) * 2^-53; item seed = mix64(mix64(master_seed) ^ (index + 0x9E3779B97F4A7C15)) "
      "with the SplitMix64 finalizer as mix64";
  doc["heldout_sharing"] = "shared";
  doc["background_attestation"] = m.background_attestation;

  json palette = json::array();
  for (const auto& e : m.palette.entries()) {
    palette.push_back({{"class_id", e.class_id}, {"class_name", e.class_name}, {"color", {e.color.r, e.color.g, e.color.b}}});
  }
  doc["palette"] = palette;

  doc["backend"] = {{"kind", to_string(m.backend.kind)},
                    {"endpoint", m.backend.endpoint ? json(*m.backend.endpoint) : json(nullptr)},
                    {"timeout_ms", m.backend.timeout.count()},
                    {"gt_rule", to_string(m.backend.gt_rule())}};
  doc["placement"] = {{"vertical_fraction", m.placement.vertical_fraction},
                      {"crop_size", m.placement.crop_size},
                      {"mask_scale_min", m.placement.mask_scale_min},
                      {"mask_scale_max", m.placement.mask_scale_max},
                      {"edge_margin", m.placement.edge_margin}};
  if (const auto* f = std::get_if<Feather>(&m.merge_mode)) {
    doc["merge_mode"] = {{"mode", "feather"}, {"border_px", f->border_px}};
  } else {
    doc["merge_mode"] = {{"mode", "hard_paste"}};
  }
  if (m.class_quota) {
    json quota = json::object();
    for (const auto& [cls, count] : *m.class_quota) quota[std::to_string(cls)] = count;
    doc["class_quota"] = quota;
  } else {
    doc["class_quota"] = nullptr;
  }

  json bgs = json::array();
  for (const auto& b : m.backgrounds) {
    bgs.push_back({{"id", b.id}, {"path", b.path.generic_string()}, {"width", b.dims.w}, {"height", b.dims.h}});
  }
  doc["backgrounds"] = bgs;

  auto pool_json = [](const ObjectPool& p) {
    json entries = json::array();
    for (const auto& e : p.entries) {
      entries.push_back({{"object_id", e.object_id}, {"class_id", e.class_id}, {"mask_path", e.mask_path.generic_string()}});
    }
    return json{{"pool_id", to_string(p.id)}, {"entries", entries}};
  };
  doc["pools"] = {{"train", pool_json(m.train_pool)}, {"heldout", pool_json(m.heldout_pool)}};

  json splits = json::array();
  for (const auto& s : m.splits) {
    splits.push_back({{"name", s.name}, {"pool", to_string(s.pool)}, {"item_count", s.item_count},
                      {"background_ids", s.background_ids}});
  }
  doc["splits"] = splits;

  json items = json::array();
  for (const auto& it : m.items) {
    const auto& p = it.placement;
    items.push_back({{"item_id", it.item_id},
                     {"split", it.split},
                     {"background_id", it.background_id},
                     {"prompt", it.prompt ? json(*it.prompt) : json(nullptr)},
                     {"placement",
                      {{"object_ref", p.object_ref},
                       {"class_id", p.class_id},
                       {"center", {p.center.x, p.center.y}},
                       {"mask_dims", {p.mask_dims.w, p.mask_dims.h}},
                       {"mask_rect", region_json(p.mask_rect)},
                       {"crop", region_json(p.crop)},
                       {"seed", p.seed}}}});
  }
  doc["items"] = items;
  return doc;
}

GenerationManifest manifest_from_json(const json& doc) {
  try {
    GenerationManifest m;
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error(ErrorCode::ParseError, "unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    m.master_seed = doc.at("master_seed").get<std::uint64_t>();
    m.rng_algorithm = doc.at("rng_algorithm").get<std::string>();
    m.background_attestation = doc.value("background_attestation", false);
    if (m.rng_algorithm != kRngAlgorithm) {
      throw Error(ErrorCode::ParseError, "manifest uses rng '" + m.rng_algorithm + "', this build implements '" +
                                             std::string(kRngAlgorithm) + "'");
    }

    std::vector<PaletteEntry> palette;
    for (const auto& e : doc.at("palette")) {
      const auto& c = e.at("color");
      palette.push_back({e.at("class_name").get<std::string>(), e.at("class_id").get<std::uint16_t>(),
                         Rgb{c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(), c.at(2).get<std::uint8_t>()}});
    }
    m.palette = ClassPalette(std::move(palette));

    const auto& b = doc.at("backend");
    m.backend.kind = backend_kind_from_string(b.at("kind").get<std::string>());
    if (!b.at("endpoint").is_null()) m.backend.endpoint = b.at("endpoint").get<std::string>();
    m.backend.timeout = std::chrono::milliseconds(b.at("timeout_ms").get<std::int64_t>());

    const auto& p = doc.at("placement");
    m.placement.vertical_fraction = p.at("vertical_fraction").get<double>();
    m.placement.crop_size = p.at("crop_size").get<std::uint32_t>();
    m.placement.mask_scale_min = p.at("mask_scale_min").get<double>();
    m.placement.mask_scale_max = p.at("mask_scale_max").get<double>();
    m.placement.edge_margin = p.at("edge_margin").get<std::uint32_t>();

    const auto& mm = doc.at("merge_mode");
    if (mm.at("mode") == "feather") {
      m.merge_mode = Feather{mm.at("border_px").get<std::uint32_t>()};
    } else {
      m.merge_mode = HardPaste{};
    }
    if (!doc.at("class_quota").is_null()) {
      std::map<std::uint16_t, std::size_t> quota;
      for (const auto& [k, v] : doc.at("class_quota").items()) {
        quota[static_cast<std::uint16_t>(std::stoul(k))] = v.get<std::size_t>();
      }
      m.class_quota = std::move(quota);
    }

    for (const auto& bg : doc.at("backgrounds")) {
      m.backgrounds.push_back({bg.at("id").get<std::string>(), fs::path(bg.at("path").get<std::string>()),
                               {bg.at("width").get<std::uint32_t>(), bg.at("height").get<std::uint32_t>()}});
    }
    auto pool_from = [](const json& j) {
      ObjectPool pool;
      pool.id = pool_id_from(j.at("pool_id").get<std::string>());
      for (const auto& e : j.at("entries")) {
        pool.entries.push_back({e.at("object_id").get<std::string>(), e.at("class_id").get<std::uint16_t>(),
                                fs::path(e.at("mask_path").get<std::string>())});
      }
      return pool;
    };
    m.train_pool = pool_from(doc.at("pools").at("train"));
    m.heldout_pool = pool_from(doc.at("pools").at("heldout"));

    for (const auto& s : doc.at("splits")) {
      m.splits.push_back({s.at("name").get<std::string>(), pool_id_from(s.at("pool").get<std::string>()),
                          s.at("item_count").get<std::size_t>(), s.at("background_ids").get<std::vector<std::string>>()});
    }
    for (const auto& it : doc.at("items")) {
      ManifestItem item;
      item.item_id = it.at("item_id").get<std::string>();
      item.split = it.at("split").get<std::string>();
      item.background_id = it.at("background_id").get<std::string>();
      if (!it.at("prompt").is_null()) item.prompt = it.at("prompt").get<std::string>();
      const auto& pl = it.at("placement");
      item.placement.object_ref = pl.at("object_ref").get<std::string>();
      item.placement.class_id = pl.at("class_id").get<std::uint16_t>();
      item.placement.center = {pl.at("center").at(0).get<std::int64_t>(), pl.at("center").at(1).get<std::int64_t>()};
      item.placement.mask_dims = {pl.at("mask_dims").at(0).get<std::uint32_t>(),
                                  pl.at("mask_dims").at(1).get<std::uint32_t>()};
      item.placement.mask_rect = region_from(pl.at("mask_rect"));
      item.placement.crop = region_from(pl.at("crop"));
      item.placement.seed = pl.at("seed").get<std::uint64_t>();
      m.items.push_back(std::move(item));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
}

std::string serialize_manifest(const GenerationManifest& manifest) { return manifest_to_json(manifest).dump(2) + "\n"; }

GenerationManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

DatasetStats dataset_stats(const GenerationManifest& manifest) {
  DatasetStats stats;
  for (const auto& e : manifest.palette.entries()) stats.per_class.emplace_back(e.class_name, 0);
  for (const auto& s : manifest.splits) stats.per_split[s.name] = 0;
  for (const auto& item : manifest.items) {
    ++stats.per_class.at(item.placement.class_id).second;
    ++stats.per_split[item.split];
    ++stats.total;
  }
  return stats;
}

namespace {

/// Small per-worker background cache; items of one split share few backgrounds.
class BackgroundCache {
 public:
  const ImageBuffer& get(const BackgroundEntry& entry) {
    for (auto& slot : slots_) {
      if (slot.first == entry.id) return slot.second;
    }
    if (slots_.size() >= kCapacity) slots_.erase(slots_.begin());
    slots_.emplace_back(entry.id, read_image(entry.path));
    return slots_.back().second;
  }

 private:
  static constexpr std::size_t kCapacity = 4;
  std::vector<std::pair<std::string, ImageBuffer>> slots_;
};

/// Raised when the output tree cannot be written; aborts the whole run.
struct OutputWriteError : Error {
  using Error::Error;
};

struct ItemOutput {
  AnnotationRecord annotation;
  ImageInfo image;
};

ItemOutput process_item(const GenerationManifest& m, const ManifestItem& item, const BackendDescriptor& backend,
                        Generator& generator, BackgroundCache& cache,
                        const std::unordered_map<std::string, BinaryMask>& masks, const fs::path& out_dir) {
  const auto& bg_entry = m.background(item.background_id);
  const ImageBuffer& background = cache.get(bg_entry);
  const Size2 dims{background.width(), background.height()};
  const Placement& p = item.placement;
  if (!placement_valid(p, dims, m.placement.crop_size)) {
    throw Error(ErrorCode::RegionOutOfBounds, "placement does not fit background " + item.background_id + " (" +
                                                  std::to_string(dims.w) + "x" + std::to_string(dims.h) + ")");
  }
  const auto& entry = m.object(item.split, p.object_ref);
  const BinaryMask mask = scale_mask(masks.at(entry.object_id), p.mask_dims.w, p.mask_dims.h);
  const ImageBuffer crop = extract_crop(background, p.crop);
  const auto& class_entry = m.palette.at(p.class_id);

  GenerationRequest req;
  req.class_name = class_entry.class_name;
  req.class_id = p.class_id;
  req.seed = p.seed;
  req.mask_rect = p.mask_rect;
  if (backend.mask_conditioned()) {
    req.input = compose_condition_patch(crop, mask, p.mask_rect, m.palette, p.class_id);
  } else {
    req.input = PlainCrop{crop};
    req.prompt = item.prompt ? *item.prompt : build_prompt(class_entry.class_name);
  }
  validate_request(backend, req);
  auto result = generator.generate(req);
  if (result.patch.width() != crop.width() || result.patch.height() != crop.height()) {
    throw Error(ErrorCode::ProtocolError, "generated patch has the wrong size");
  }
  const ImageBuffer merged = merge_patch(background, result.patch, p.crop, m.merge_mode);

  const fs::path rel = fs::path("images") / item.split / (item.item_id + ".png");
  try {
    write_png(out_dir / rel, merged);
  } catch (const Error& e) {
    throw OutputWriteError(ErrorCode::IoError, e.what());
  }

  ItemOutput out;
  out.annotation = {item.item_id,   p.class_id, derive_ground_truth(backend, mask, p.mask_rect, p.crop),
                    entry.object_id, result.backend_id, p.seed};
  out.image = {item.item_id, item.split, rel.generic_string(), dims.w, dims.h};
  return out;
}

}  // namespace

ExecutionResult execute_plan(const GenerationManifest& m, const BackendDescriptor& backend, const fs::path& out_dir,
                             const ExecuteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  backend.validate();

  const bool existing = fs::exists(out_dir / "images") || fs::exists(out_dir / "annotations.json");
  if (existing && !options.force) {
    throw Error(ErrorCode::IoError, "output directory " + out_dir.string() + " already holds a dataset (use --force)");
  }
  std::error_code ec;
  for (const char* name : {"images", "labels"}) fs::remove_all(out_dir / name, ec);
  for (const char* name : {"annotations.json", "stats.json", "failures.json"}) fs::remove(out_dir / name, ec);
  try {
    fs::create_directories(out_dir);
    for (const auto& s : m.splits) fs::create_directories(out_dir / "images" / s.name);
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::IoError, e.what());
  }

  const std::size_t n = m.items.size();
  std::vector<std::optional<ItemOutput>> outputs(n);
  std::vector<std::optional<ItemFailure>> failures(n);

  // Masks are loaded once up front and shared read-only by all workers.
  std::unordered_map<std::string, BinaryMask> masks;
  for (const auto& item : m.items) {
    const auto& ref = item.placement.object_ref;
    if (masks.count(ref)) continue;
    try {
      masks.emplace(ref, read_mask(m.object(item.split, ref).mask_path));
    } catch (const Error& e) {
      log::warn("object {}: {}", ref, e.what());
    }
  }

  std::optional<Error> fatal_backend;
  if (backend.kind != BackendKind::Procedural && n > 0) {
    try {
      RemoteGenerator probe(backend);
      const auto status = probe.health();
      if (status.status != "ok" || status.kind != backend.kind) {
        throw Error(ErrorCode::ProtocolError, "backend health reports status '" + status.status + "' kind '" +
                                                  std::string(to_string(status.kind)) + "'");
      }
    } catch (const Error& e) {
      fatal_backend = e;
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> io_failed{false};
  std::mutex io_mutex;
  std::optional<Error> io_error;
  auto worker = [&] {
    std::unique_ptr<Generator> generator;
    BackgroundCache cache;
    for (std::size_t i = next++; i < n && !io_failed; i = next++) {
      const auto& item = m.items[i];
      try {
        if (fatal_backend) throw *fatal_backend;
        if (!masks.count(item.placement.object_ref)) {
          throw Error(ErrorCode::EmptyMask, "mask for object '" + item.placement.object_ref + "' could not be loaded");
        }
        if (!generator) generator = make_generator(backend);
        outputs[i] = process_item(m, item, backend, *generator, cache, masks, out_dir);
      } catch (const OutputWriteError& e) {
        std::lock_guard lock(io_mutex);
        io_error = e;
        io_failed = true;
        break;
      } catch (const Error& e) {
        failures[i] = ItemFailure{item.item_id, std::string(to_string(e.code())), e.what()};
      } catch (const std::exception& e) {
        failures[i] = ItemFailure{item.item_id, "Internal", e.what()};
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(n, 1)));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (io_error) throw *io_error;

  ExecutionResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (outputs[i]) {
      result.annotations.push_back(outputs[i]->annotation);
      result.images.push_back(outputs[i]->image);
    } else if (failures[i]) {
      result.failures.push_back(*failures[i]);
    }
  }

  export_yolo(result.annotations, result.images, out_dir / "labels");
  export_coco(result.annotations, result.images, m.palette, out_dir / "annotations.json");
  result.stats = dataset_stats(result.annotations, result.images, m.palette);
  write_text(out_dir / "stats.json", result.stats.to_json().dump(2) + "\n");
  json failed = json::array();
  for (const auto& f : result.failures) failed.push_back({{"item_id", f.item_id}, {"error", f.error}, {"message", f.message}});
  write_text(out_dir / "failures.json", failed.dump(2) + "\n");

  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

}  // namespace cornerforge
