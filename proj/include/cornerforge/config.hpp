#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cornerforge/backend.hpp"
#include "cornerforge/dataset.hpp"
#include "cornerforge/imaging.hpp"
#include "cornerforge/placement.hpp"

namespace cornerforge {

inline constexpr int kConfigSchemaVersion = 1;

/// Value in the TOML subset we accept: strings, integers, floats, booleans
/// and (possibly multi-line) arrays of those.
struct TomlValue {
  enum class Type { String, Integer, Float, Boolean, Array } type = Type::String;
  std::string str;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;
  std::size_t line = 0;
};

/// section name ("" for top level) -> key -> value
using TomlDocument = std::map<std::string, std::map<std::string, TomlValue>>;

/// ParseError with "line N" on malformed input.
TomlDocument parse_toml(std::string_view text);

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t master_seed = 0;
  std::string rng_algorithm;
  ClassPalette palette = ClassPalette::airborne_default();
  PlacementConfig placement;
  BackendDescriptor backend;
  MergeMode merge_mode = HardPaste{};
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t test_size = 0;
  std::filesystem::path train_pool;
  std::filesystem::path heldout_pool;
  std::filesystem::path background_dir;
  std::filesystem::path output_dir;
  bool background_attestation = false;
  std::optional<std::map<std::uint16_t, std::size_t>> class_quota;

  PlanConfig plan_config() const;
};

/// Relative paths resolve against the config file's directory. Every problem
/// is reported at once in a ConfigInvalid message, one "field: reason" per line.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);

}  // namespace cornerforge
