#include "cornerforge/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace cornerforge {

namespace {

std::string describe(const CropRegion& r) {
  return "(" + std::to_string(r.x) + "," + std::to_string(r.y) + "," + std::to_string(r.w) + "," +
         std::to_string(r.h) + ")";
}

void require_inside(const CropRegion& region, std::uint32_t width, std::uint32_t height) {
  if (!region.fits_in(width, height)) {
    throw Error(ErrorCode::RegionOutOfBounds, "region " + describe(region) + " exceeds " +
                                                  std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, Rgb fill)
    : width_(width), height_(height), pixels_(static_cast<std::size_t>(width) * height, fill) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::DimensionMismatch, "image dimensions must be >= 1");
  }
}

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::DimensionMismatch, "image dimensions must be >= 1");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::DimensionMismatch, "pixel count does not match width x height");
  }
}

BinaryMask::BinaryMask(std::uint32_t width, std::uint32_t height, bool fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions must be >= 1");
  }
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ClassPalette::ClassPalette(std::vector<PaletteEntry> entries) : entries_(std::move(entries)) {
  std::set<std::tuple<int, int, int>> colors;
  std::set<std::string> names;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.class_id != i) {
      throw Error(ErrorCode::ConfigInvalid, "palette class ids must be dense from 0 in order");
    }
    if (e.class_name.empty()) {
      throw Error(ErrorCode::ConfigInvalid, "palette class name must not be empty");
    }
    if (e.color == kBlack) {
      throw Error(ErrorCode::ConfigInvalid, "palette color for '" + e.class_name + "' is black");
    }
    if (!colors.emplace(e.color.r, e.color.g, e.color.b).second) {
      throw Error(ErrorCode::ConfigInvalid, "palette color for '" + e.class_name + "' is not unique");
    }
    if (!names.insert(e.class_name).second) {
      throw Error(ErrorCode::ConfigInvalid, "duplicate palette class '" + e.class_name + "'");
    }
  }
}

ClassPalette ClassPalette::airborne_default() {
  // Seven non-black corners of the RGB cube plus the cube centre.
  const char* names[] = {"Large Airplane", "Small Airplane", "Very Small Airplane", "Helicopter",
                         "Drone",          "Hot Air Balloon", "Paraglider",         "Airship"};
  const Rgb colors[] = {{255, 0, 0},   {0, 255, 0},   {0, 0, 255},     {255, 255, 0},
                        {255, 0, 255}, {0, 255, 255}, {255, 255, 255}, {128, 128, 128}};
  std::vector<PaletteEntry> entries;
  for (std::uint16_t i = 0; i < 8; ++i) {
    entries.push_back({names[i], i, colors[i]});
  }
  return ClassPalette(std::move(entries));
}

const PaletteEntry& ClassPalette::at(std::uint16_t class_id) const {
  if (!has(class_id)) {
    throw Error(ErrorCode::UnknownClass, "class id " + std::to_string(class_id) + " not in palette");
  }
  return entries_[class_id];
}

std::optional<std::uint16_t> ClassPalette::find(std::string_view class_name) const {
  for (const auto& e : entries_) {
    if (e.class_name == class_name) return e.class_id;
  }
  return std::nullopt;
}

ImageBuffer extract_crop(const ImageBuffer& image, const CropRegion& region) {
  require_inside(region, image.width(), image.height());
  const auto w = static_cast<std::uint32_t>(region.w);
  const auto h = static_cast<std::uint32_t>(region.h);
  std::vector<Rgb> out;
  out.reserve(static_cast<std::size_t>(w) * h);
  auto src = image.pixels();
  for (std::uint32_t j = 0; j < h; ++j) {
    auto row = src.subspan((static_cast<std::size_t>(region.y) + j) * image.width() + region.x, w);
    out.insert(out.end(), row.begin(), row.end());
  }
  return ImageBuffer(w, h, std::move(out));
}

ImageBuffer merge_patch(const ImageBuffer& image, const ImageBuffer& patch, const CropRegion& region,
                        const MergeMode& mode) {
  require_inside(region, image.width(), image.height());
  if (patch.width() != region.w || patch.height() != region.h) {
    throw Error(ErrorCode::DimensionMismatch, "patch " + std::to_string(patch.width()) + "x" +
                                                  std::to_string(patch.height()) + " vs region " +
                                                  describe(region));
  }
  ImageBuffer out = image;
  const auto w = static_cast<std::uint32_t>(region.w);
  const auto h = static_cast<std::uint32_t>(region.h);
  const auto ox = static_cast<std::uint32_t>(region.x);
  const auto oy = static_cast<std::uint32_t>(region.y);

  if (std::holds_alternative<HardPaste>(mode)) {
    for (std::uint32_t j = 0; j < h; ++j) {
      for (std::uint32_t i = 0; i < w; ++i) out.at(ox + i, oy + j) = patch.at(i, j);
    }
    return out;
  }

  // Feather: alpha ramps from 1/(b+1) on the outermost ring up to 1 at depth b.
  const std::uint32_t border = std::get<Feather>(mode).border_px;
  auto blend = [](std::uint8_t fg, std::uint8_t bg, double alpha) {
    return static_cast<std::uint8_t>(std::lround(alpha * fg + (1.0 - alpha) * bg));
  };
  for (std::uint32_t j = 0; j < h; ++j) {
    for (std::uint32_t i = 0; i < w; ++i) {
      const std::uint32_t depth = std::min({i, j, w - 1 - i, h - 1 - j});
      const Rgb& fg = patch.at(i, j);
      Rgb& dst = out.at(ox + i, oy + j);
      if (depth >= border) {
        dst = fg;
        continue;
      }
      const double alpha = static_cast<double>(depth + 1) / static_cast<double>(border + 1);
      dst = {blend(fg.r, dst.r, alpha), blend(fg.g, dst.g, alpha), blend(fg.b, dst.b, alpha)};
    }
  }
  return out;
}

BBox mask_bbox(const BinaryMask& mask) {
  std::uint32_t min_x = mask.width(), min_y = mask.height(), max_x = 0, max_y = 0;
  bool any = false;
  for (std::uint32_t y = 0; y < mask.height(); ++y) {
    for (std::uint32_t x = 0; x < mask.width(); ++x) {
      if (!mask.test(x, y)) continue;
      any = true;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (!any) throw Error(ErrorCode::EmptyMask, "mask has no set pixels");
  return {static_cast<double>(min_x), static_cast<double>(min_y), static_cast<double>(max_x - min_x + 1),
          static_cast<double>(max_y - min_y + 1)};
}

BinaryMask scale_mask(const BinaryMask& mask, std::uint32_t target_w, std::uint32_t target_h) {
  if (target_w == 0 || target_h == 0) {
    throw Error(ErrorCode::DimensionMismatch, "target mask dimensions must be >= 1");
  }
  if (mask.empty()) throw Error(ErrorCode::EmptyMask, "cannot scale an empty mask");

  const std::uint64_t sw = mask.width(), sh = mask.height();
  BinaryMask out(target_w, target_h);
  bool any = false;
  for (std::uint32_t j = 0; j < target_h; ++j) {
    const auto sy = static_cast<std::uint32_t>(j * sh / target_h);
    for (std::uint32_t i = 0; i < target_w; ++i) {
      const auto sx = static_cast<std::uint32_t>(i * sw / target_w);
      if (mask.test(sx, sy)) {
        out.set(i, j);
        any = true;
      }
    }
  }
  if (!any) {
    // Downsampling skipped every set pixel; forward-map them instead so thin
    // silhouettes survive.
    for (std::uint32_t y = 0; y < sh; ++y) {
      for (std::uint32_t x = 0; x < sw; ++x) {
        if (mask.test(x, y)) {
          out.set(static_cast<std::uint32_t>(x * target_w / sw), static_cast<std::uint32_t>(y * target_h / sh));
        }
      }
    }
  }
  return out;
}

}  // namespace cornerforge
