#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cornerforge/imaging.hpp"

namespace cornerforge {

/// Generator input: the crop with the mask rectangle replaced by the class
/// color on object pixels and black everywhere else inside the rectangle.
struct ConditionedPatch {
  ImageBuffer pixels;
  CropRegion mask_rect;
  BinaryMask mask;
  std::uint16_t class_id = 0;
};

enum class Zone { ClassColor, Black, Source };

/// Which of the three zones a patch pixel belongs to.
inline Zone zone_of(const CropRegion& mask_rect, const BinaryMask& mask, std::uint32_t x, std::uint32_t y) {
  const CropRegion px{x, y, 1, 1};
  if (!mask_rect.contains(px)) return Zone::Source;
  return mask.test(static_cast<std::uint32_t>(x - mask_rect.x), static_cast<std::uint32_t>(y - mask_rect.y))
             ? Zone::ClassColor
             : Zone::Black;
}

ConditionedPatch compose_condition_patch(const ImageBuffer& crop, const BinaryMask& mask, const CropRegion& mask_rect,
                                         const ClassPalette& palette, std::uint16_t class_id);

/// "a photograph of a|an <class>, Nikon D850"; article by leading vowel letter.
std::string build_prompt(std::string_view class_name);

}  // namespace cornerforge
