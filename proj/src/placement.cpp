#include "cornerforge/placement.hpp"

#include <algorithm>
#include <cmath>

#include "cornerforge/rng.hpp"

namespace cornerforge {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::ConfigInvalid, "placement." + field + ": " + why);
}

std::string dims(Size2 s) { return std::to_string(s.w) + "x" + std::to_string(s.h); }

}  // namespace

void PlacementConfig::validate() const {
  if (!(vertical_fraction > 0.0 && vertical_fraction <= 1.0)) invalid("vertical_fraction", "must be in (0, 1]");
  if (crop_size < 16) invalid("crop_size", "must be >= 16");
  if (!(mask_scale_min > 0.0)) invalid("mask_scale_min", "must be > 0");
  if (!(mask_scale_min <= mask_scale_max)) invalid("mask_scale_max", "must be >= mask_scale_min");
  if (!(mask_scale_max < 1.0)) invalid("mask_scale_max", "must be < 1 so the mask is smaller than the crop");
}

CropRegion derive_crop(Point center, std::uint32_t crop_size, Size2 background) {
  if (crop_size == 0 || crop_size > background.w || crop_size > background.h) {
    throw Error(ErrorCode::BackgroundTooSmall,
                "crop " + std::to_string(crop_size) + " does not fit background " + dims(background));
  }
  const std::int64_t size = crop_size;
  const std::int64_t x = std::clamp<std::int64_t>(center.x - size / 2, 0, background.w - size);
  const std::int64_t y = std::clamp<std::int64_t>(center.y - size / 2, 0, background.h - size);
  return {x, y, size, size};
}

Placement sample_placement(std::uint64_t seed, Size2 background, const PlacedObject& object,
                           const PlacementConfig& cfg) {
  cfg.validate();
  const std::int64_t crop = cfg.crop_size;
  const std::int64_t margin = cfg.edge_margin;
  if (background.w < crop + 2 * margin || background.h < crop + 2 * margin) {
    throw Error(ErrorCode::BackgroundTooSmall, "background " + dims(background) + " cannot hold crop " +
                                                   std::to_string(crop) + " with margin " +
                                                   std::to_string(margin));
  }
  const BinaryMask& source = object.mask;
  if (source.empty()) throw Error(ErrorCode::EmptyMask, "object '" + object.object_ref + "' has an empty mask");

  Rng rng(seed);

  // Longer side first; the shorter side keeps the aspect ratio (rounded).
  const double frac = rng.uniform_real(cfg.mask_scale_min, cfg.mask_scale_max);
  const std::int64_t longer = std::clamp<std::int64_t>(std::llround(frac * static_cast<double>(crop)), 1, crop - 1);
  std::int64_t mw, mh;
  if (source.width() >= source.height()) {
    mw = longer;
    mh = std::clamp<std::int64_t>(std::llround(static_cast<double>(source.height()) * longer / source.width()), 1,
                                  longer);
  } else {
    mh = longer;
    mw = std::clamp<std::int64_t>(std::llround(static_cast<double>(source.width()) * longer / source.height()), 1,
                                  longer);
  }

  // Object top-left such that the mask respects the margins and its centre
  // stays at or above the vertical limit.
  const auto limit_y = static_cast<std::int64_t>(std::floor(cfg.vertical_fraction * background.h));
  const std::int64_t max_x = background.w - margin - mw;
  const std::int64_t max_y = std::min<std::int64_t>(background.h - margin - mh, limit_y - mh / 2);
  if (max_x < margin || max_y < margin) {
    throw Error(ErrorCode::BackgroundTooSmall,
                "no admissible object position in " + dims(background) + " for vertical_fraction " +
                    std::to_string(cfg.vertical_fraction));
  }
  const std::int64_t obj_x = rng.uniform_int(margin, max_x);
  const std::int64_t obj_y = rng.uniform_int(margin, max_y);

  const std::int64_t off_x = rng.uniform_int(0, crop - mw);
  const std::int64_t off_y = rng.uniform_int(0, crop - mh);

  // derive_crop subtracts crop/2 again, so the nominal top-left is obj - off.
  // The nominal centre is pulled into the image first; this does not change the
  // clamped result.
  const Point nominal{std::clamp<std::int64_t>(obj_x - off_x + crop / 2, 0, background.w - 1),
                      std::clamp<std::int64_t>(obj_y - off_y + crop / 2, 0, background.h - 1)};
  const CropRegion crop_region = derive_crop(nominal, cfg.crop_size, background);

  Placement p;
  p.object_ref = object.object_ref;
  p.class_id = object.class_id;
  p.center = {obj_x + mw / 2, obj_y + mh / 2};
  p.mask_dims = {static_cast<std::uint32_t>(mw), static_cast<std::uint32_t>(mh)};
  p.mask_rect = {obj_x - crop_region.x, obj_y - crop_region.y, mw, mh};
  p.crop = crop_region;
  p.seed = seed;
  return p;
}

bool placement_valid(const Placement& p, Size2 background, std::uint32_t crop_size) {
  const CropRegion local_crop{0, 0, p.crop.w, p.crop.h};
  return p.crop.w == crop_size && p.crop.h == crop_size && p.crop.fits_in(background.w, background.h) &&
         local_crop.contains(p.mask_rect) && p.mask_rect.area() < p.crop.area() &&
         p.mask_rect.w == p.mask_dims.w && p.mask_rect.h == p.mask_dims.h;
}

}  // namespace cornerforge
