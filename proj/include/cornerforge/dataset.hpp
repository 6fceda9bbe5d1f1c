#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cornerforge/annotations.hpp"
#include "cornerforge/backend.hpp"
#include "cornerforge/imaging.hpp"
#include "cornerforge/placement.hpp"

namespace cornerforge {

inline constexpr int kManifestSchemaVersion = 1;

enum class PoolId { Train, Heldout };
std::string_view to_string(PoolId id);

struct PoolEntry {
  std::string object_id;
  std::uint16_t class_id = 0;
  std::filesystem::path mask_path;

  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

struct ObjectPool {
  PoolId id = PoolId::Train;
  std::vector<PoolEntry> entries;

  /// CSV with header "object_id,class_id,mask_path"; mask paths are resolved
  /// against the CSV's directory. Checks id uniqueness and class ids.
  static ObjectPool load_csv(const std::filesystem::path& path, PoolId id, const ClassPalette& palette);

  const PoolEntry* find(std::string_view object_id) const;
};

struct BackgroundEntry {
  std::string id;
  std::filesystem::path path;
  Size2 dims;

  friend bool operator==(const BackgroundEntry&, const BackgroundEntry&) = default;
};

/// PNG/JPEG files under `dir`, sorted by id (path relative to dir). Images
/// smaller than crop_size on either side are skipped and listed in `rejected`.
std::vector<BackgroundEntry> scan_backgrounds(const std::filesystem::path& dir, std::uint32_t crop_size,
                                              std::vector<std::string>* rejected = nullptr);

struct SplitSpec {
  std::string name;
  std::size_t size = 0;
  PoolId pool = PoolId::Train;
};

/// train/val/test drawing from train/heldout/heldout.
std::vector<SplitSpec> default_splits(std::size_t train, std::size_t val, std::size_t test);

struct PlanConfig {
  ClassPalette palette = ClassPalette::airborne_default();
  PlacementConfig placement;
  BackendDescriptor backend;
  MergeMode merge_mode = HardPaste{};
  std::vector<SplitSpec> splits;
  /// Whole-run instance count per class id. When present it must sum to the
  /// total item count.
  std::optional<std::map<std::uint16_t, std::size_t>> class_quota;
};

struct ManifestItem {
  std::string item_id;
  std::string split;
  std::string background_id;
  Placement placement;
  std::optional<std::string> prompt;

  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

struct SplitPlan {
  std::string name;
  PoolId pool = PoolId::Train;
  std::size_t item_count = 0;
  std::vector<std::string> background_ids;
};

struct GenerationManifest {
  int schema_version = kManifestSchemaVersion;
  std::uint64_t master_seed = 0;
  std::string rng_algorithm;
  ClassPalette palette = ClassPalette::airborne_default();
  BackendDescriptor backend;
  PlacementConfig placement;
  MergeMode merge_mode = HardPaste{};
  std::optional<std::map<std::uint16_t, std::size_t>> class_quota;
  /// Operator confirmed the backgrounds are object-free with sky in the top half.
  bool background_attestation = false;
  std::vector<BackgroundEntry> backgrounds;
  ObjectPool train_pool;
  ObjectPool heldout_pool;
  std::vector<SplitPlan> splits;
  std::vector<ManifestItem> items;

  const BackgroundEntry& background(std::string_view id) const;
  const ObjectPool& pool_for(std::string_view split) const;
  const PoolEntry& object(std::string_view split, std::string_view object_id) const;
};

/// Deterministic in all inputs. Items are numbered across splits in split
/// order; item i uses seed hash64(master_seed, i).
GenerationManifest plan_dataset(const PlanConfig& cfg, const std::vector<BackgroundEntry>& backgrounds,
                                const ObjectPool& train_pool, const ObjectPool& heldout_pool,
                                std::uint64_t master_seed);

nlohmann::json manifest_to_json(const GenerationManifest& manifest);
GenerationManifest manifest_from_json(const nlohmann::json& doc);

/// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string serialize_manifest(const GenerationManifest& manifest);
GenerationManifest load_manifest(const std::filesystem::path& path);

DatasetStats dataset_stats(const GenerationManifest& manifest);

struct ItemFailure {
  std::string item_id;
  std::string error;
  std::string message;
};

struct ExecuteOptions {
  std::size_t workers = 1;
  /// Replace an existing dataset in the output directory.
  bool force = false;
};

struct ExecutionResult {
  DatasetStats stats;
  std::vector<AnnotationRecord> annotations;
  std::vector<ImageInfo> images;
  std::vector<ItemFailure> failures;
  std::chrono::duration<double> elapsed{0};
};

/// Generates every item, then writes images/, labels/, annotations.json,
/// stats.json and failures.json under out_dir. Item errors are collected;
/// I/O errors on the output directory are fatal.
ExecutionResult execute_plan(const GenerationManifest& manifest, const BackendDescriptor& backend,
                             const std::filesystem::path& out_dir, const ExecuteOptions& options = {});

}  // namespace cornerforge
