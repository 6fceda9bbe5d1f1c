#pragma once

#include <cstdint>
#include <string>

#include "cornerforge/imaging.hpp"

namespace cornerforge {

struct Point {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Size2 {
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  friend bool operator==(const Size2&, const Size2&) = default;
};

struct PlacementConfig {
  /// The object centre must satisfy center.y <= vertical_fraction * height.
  double vertical_fraction = 0.5;
  std::uint32_t crop_size = 256;
  /// Longer mask side as a fraction of crop_size.
  double mask_scale_min = 0.05;
  double mask_scale_max = 0.5;
  std::uint32_t edge_margin = 0;

  /// Throws ConfigInvalid naming the offending field.
  void validate() const;
};

struct Placement {
  std::string object_ref;
  std::uint16_t class_id = 0;
  /// Object (mask rectangle) centre in background coordinates.
  Point center;
  Size2 mask_dims;
  /// Mask position inside the crop.
  CropRegion mask_rect;
  /// Crop in background coordinates.
  CropRegion crop;
  std::uint64_t seed = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct PlacedObject {
  std::string object_ref;
  std::uint16_t class_id = 0;
  const BinaryMask& mask;
};

/// Square crop of side crop_size centred on `center`, shifted inward to stay
/// inside the background.
CropRegion derive_crop(Point center, std::uint32_t crop_size, Size2 background);

/// Pure function of its arguments. Draw order: mask scale, object x, object y,
/// mask offset x, mask offset y.
Placement sample_placement(std::uint64_t seed, Size2 background, const PlacedObject& object,
                           const PlacementConfig& cfg);

/// Re-checks the geometric invariants of a placement against a background.
bool placement_valid(const Placement& p, Size2 background, std::uint32_t crop_size);

}  // namespace cornerforge
