#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cornerforge/error.hpp"

namespace cornerforge {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};

/// Row-major 8-bit RGB raster. Always at least 1x1.
class ImageBuffer {
 public:
  ImageBuffer(std::uint32_t width, std::uint32_t height, Rgb fill = kBlack);
  ImageBuffer(std::uint32_t width, std::uint32_t height, std::vector<Rgb> pixels);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }

  const Rgb& at(std::uint32_t x, std::uint32_t y) const { return pixels_[index(x, y)]; }
  Rgb& at(std::uint32_t x, std::uint32_t y) { return pixels_[index(x, y)]; }

  std::span<const Rgb> pixels() const noexcept { return pixels_; }
  std::span<Rgb> pixels() noexcept { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(std::uint32_t x, std::uint32_t y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<Rgb> pixels_;
};

/// Integer rectangle with top-left origin. Used both for crops in background
/// coordinates and for mask rectangles in patch coordinates.
struct CropRegion {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 1;
  std::int64_t h = 1;

  bool fits_in(std::uint32_t width, std::uint32_t height) const noexcept {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
  bool contains(const CropRegion& inner) const noexcept {
    return inner.x >= x && inner.y >= y && inner.x + inner.w <= x + w && inner.y + inner.h <= y + h;
  }
  std::int64_t area() const noexcept { return w * h; }

  friend bool operator==(const CropRegion&, const CropRegion&) = default;
};

class BinaryMask {
 public:
  BinaryMask(std::uint32_t width, std::uint32_t height, bool fill = false);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }

  bool test(std::uint32_t x, std::uint32_t y) const { return bits_[index(x, y)] != 0; }
  void set(std::uint32_t x, std::uint32_t y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(std::uint32_t x, std::uint32_t y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> bits_;
};

/// Axis-aligned box covering [x, x+w) x [y, y+h).
struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double area() const noexcept { return w * h; }
  static BBox from_region(const CropRegion& r) {
    return {static_cast<double>(r.x), static_cast<double>(r.y), static_cast<double>(r.w),
            static_cast<double>(r.h)};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct PaletteEntry {
  std::string class_name;
  std::uint16_t class_id = 0;
  Rgb color;
};

/// Ordered class list with the color each class is painted with in
/// conditioning masks. Pure black is reserved for the mask surround.
class ClassPalette {
 public:
  explicit ClassPalette(std::vector<PaletteEntry> entries);

  /// The 8 airborne object classes with maximally separated colors.
  static ClassPalette airborne_default();

  const std::vector<PaletteEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool has(std::uint16_t class_id) const noexcept { return class_id < entries_.size(); }
  const PaletteEntry& at(std::uint16_t class_id) const;
  std::optional<std::uint16_t> find(std::string_view class_name) const;

 private:
  std::vector<PaletteEntry> entries_;
};

struct HardPaste {};
struct Feather {
  std::uint32_t border_px = 4;
};
using MergeMode = std::variant<HardPaste, Feather>;

ImageBuffer extract_crop(const ImageBuffer& image, const CropRegion& region);

ImageBuffer merge_patch(const ImageBuffer& image, const ImageBuffer& patch, const CropRegion& region,
                        const MergeMode& mode = HardPaste{});

/// Smallest box containing every set bit.
BBox mask_bbox(const BinaryMask& mask);

/// Nearest-neighbour resample: target (i, j) samples source (i*w/tw, j*h/th).
BinaryMask scale_mask(const BinaryMask& mask, std::uint32_t target_w, std::uint32_t target_h);

}  // namespace cornerforge
