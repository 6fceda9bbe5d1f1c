#include "cornerforge/conditioning.hpp"

#include <cctype>

namespace cornerforge {

ConditionedPatch compose_condition_patch(const ImageBuffer& crop, const BinaryMask& mask, const CropRegion& mask_rect,
                                         const ClassPalette& palette, std::uint16_t class_id) {
  if (mask.width() != mask_rect.w || mask.height() != mask_rect.h) {
    throw Error(ErrorCode::DimensionMismatch, "mask dims do not match mask_rect");
  }
  if (!mask_rect.fits_in(crop.width(), crop.height())) {
    throw Error(ErrorCode::DimensionMismatch, "mask_rect is not inside the crop");
  }
  const Rgb color = palette.at(class_id).color;

  ImageBuffer pixels = crop;
  for (std::uint32_t j = 0; j < mask.height(); ++j) {
    for (std::uint32_t i = 0; i < mask.width(); ++i) {
      pixels.at(static_cast<std::uint32_t>(mask_rect.x) + i, static_cast<std::uint32_t>(mask_rect.y) + j) =
          mask.test(i, j) ? color : kBlack;
    }
  }
  return {std::move(pixels), mask_rect, mask, class_id};
}

std::string build_prompt(std::string_view class_name) {
  if (class_name.empty()) throw Error(ErrorCode::EmptyClassName, "class name must not be empty");
  const char first = static_cast<char>(std::tolower(static_cast<unsigned char>(class_name.front())));
  const bool vowel = first == 'a' || first == 'e' || first == 'i' || first == 'o' || first == 'u';
  std::string prompt = "a photograph of ";
  prompt += vowel ? "an " : "a ";
  prompt += class_name;
  prompt += ", Nikon D850";
  return prompt;
}

}  // namespace cornerforge
